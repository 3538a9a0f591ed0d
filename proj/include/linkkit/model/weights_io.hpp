#pragma once

// Named float32 tensors in a small binary container:
//   "LKW1", u32 count, then per tensor: u32 name length, name bytes,
//   u32 rows, u32 cols, rows*cols little-endian float32 (row-major).

#include <filesystem>
#include <map>
#include <string>

#include "linkkit/model/encoder.hpp"

namespace linkkit {

using TensorMap = std::map<std::string, Matrix<float>>;

void write_tensors(const TensorMap& tensors, const std::filesystem::path& path);
TensorMap read_tensors(const std::filesystem::path& path);

template <typename Scalar>
TensorMap to_tensors(const EncoderParams<Scalar>& params);

/// Copies tensors into `params`, whose shapes must already match.
template <typename Scalar>
void from_tensors(const TensorMap& tensors, EncoderParams<Scalar>& params);

}  // namespace linkkit
