#include "linkkit/model/weights_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "linkkit/error.hpp"

namespace linkkit {

static_assert(std::endian::native == std::endian::little, "weights files are little-endian");

namespace {

constexpr char kMagic[4] = {'L', 'K', 'W', '1'};

void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), sizeof v); }

std::uint32_t get_u32(std::istream& in, const std::filesystem::path& path) {
  std::uint32_t v = 0;
  if (!in.read(reinterpret_cast<char*>(&v), sizeof v)) throw DataError("truncated weights file '" + path.string() + "'");
  return v;
}

}  // namespace

void write_tensors(const TensorMap& tensors, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  out.write(kMagic, 4);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, m] : tensors) {
    put_u32(out, static_cast<std::uint32_t>(name.size()));
    out.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(out, static_cast<std::uint32_t>(m.rows()));
    put_u32(out, static_cast<std::uint32_t>(m.cols()));
    out.write(reinterpret_cast<const char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)));
  }
  if (!out) throw DataError("failed writing '" + path.string() + "'");
}

TensorMap read_tensors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) {
    throw DataError("'" + path.string() + "' is not a weights file");
  }
  TensorMap out;
  const std::uint32_t count = get_u32(in, path);
  for (std::uint32_t k = 0; k < count; ++k) {
    std::string name(get_u32(in, path), '\0');
    if (!in.read(name.data(), static_cast<std::streamsize>(name.size()))) {
      throw DataError("truncated weights file '" + path.string() + "'");
    }
    const std::uint32_t rows = get_u32(in, path);
    const std::uint32_t cols = get_u32(in, path);
    Matrix<float> m(rows, cols);
    if (!in.read(reinterpret_cast<char*>(m.data()), static_cast<std::streamsize>(m.size() * sizeof(float)))) {
      throw DataError("truncated weights file '" + path.string() + "'");
    }
    out.emplace(std::move(name), std::move(m));
  }
  return out;
}

template <typename Scalar>
TensorMap to_tensors(const EncoderParams<Scalar>& params) {
  TensorMap out;
  params.for_each([&](const std::string& name, const Matrix<Scalar>& m) { out.emplace(name, m.template cast<float>()); });
  return out;
}

template <typename Scalar>
void from_tensors(const TensorMap& tensors, EncoderParams<Scalar>& params) {
  std::size_t used = 0;
  params.for_each([&](const std::string& name, Matrix<Scalar>& m) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw DataError("weights lack tensor '" + name + "'");
    if (it->second.rows() != m.rows() || it->second.cols() != m.cols()) {
      throw DataError("tensor '" + name + "' has shape " + std::to_string(it->second.rows()) + "x" +
                      std::to_string(it->second.cols()) + ", expected " + std::to_string(m.rows()) + "x" +
                      std::to_string(m.cols()));
    }
    m = it->second.template cast<Scalar>();
    ++used;
  });
  if (used != tensors.size()) throw DataError("weights contain tensors the encoder does not use");
}

template TensorMap to_tensors<float>(const EncoderParams<float>&);
template TensorMap to_tensors<double>(const EncoderParams<double>&);
template void from_tensors<float>(const TensorMap&, EncoderParams<float>&);
template void from_tensors<double>(const TensorMap&, EncoderParams<double>&);

}  // namespace linkkit
