#pragma once

// Small transformer encoder with a single-logit head, forward and backward
// written out by hand over Eigen dense matrices. Activations are T x d with
// one row per token; weights map rows, y = x W + b.

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "linkkit/model/serialize.hpp"
#include "linkkit/model/tokenizer.hpp"
#include "linkkit/random.hpp"

namespace linkkit {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

struct EncoderShape {
  EncoderFamily family = EncoderFamily::roberta;
  std::size_t vocab_size = 0;
  std::size_t d_model = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t d_ff = 256;
  std::size_t max_positions = 512;
  /// Factorized embedding width; 0 means embeddings are d_model wide.
  std::size_t embedding_dim = 0;
  /// One set of layer weights reused at every depth.
  bool shared_layers = false;
  double dropout = 0.1;
  double init_std = 0.02;

  std::size_t layer_sets() const { return shared_layers ? 1 : n_layers; }
  void validate() const;
};

/// Named presets: roberta-tiny, roberta-small, distilbert-tiny, albert-tiny.
/// The vocabulary size is filled in later.
bool encoder_preset(const std::string& name, EncoderShape& shape);
std::vector<std::string> encoder_preset_names();

template <typename Scalar>
struct LayerParams {
  Matrix<Scalar> wq, wk, wv, wo;
  Matrix<Scalar> bq, bk, bv, bo;
  Matrix<Scalar> ln1_g, ln1_b;
  Matrix<Scalar> w1, w2;
  Matrix<Scalar> b1, b2;
  Matrix<Scalar> ln2_g, ln2_b;
};

/// Every tensor, biases included, is a Matrix; row vectors are 1 x n.
template <typename Scalar>
struct EncoderParams {
  Matrix<Scalar> tok_emb;
  /// embedding_dim x d_model; empty unless factorized.
  Matrix<Scalar> emb_proj;
  Matrix<Scalar> pos_emb;
  Matrix<Scalar> match_emb;
  Matrix<Scalar> emb_ln_g, emb_ln_b;
  std::vector<LayerParams<Scalar>> layers;
  Matrix<Scalar> head_w;
  Matrix<Scalar> head_b;

  /// Zero-filled parameters of the given shape.
  static EncoderParams zeros(const EncoderShape& shape);
  /// Normal(0, init_std) weights, zero biases, unit layer-norm gains.
  static EncoderParams init(const EncoderShape& shape, Rng& rng);

  /// Calls f(name, tensor) for every tensor in a fixed order.
  template <typename F>
  void for_each(F&& f) {
    visit(*this, f);
  }
  template <typename F>
  void for_each(F&& f) const {
    visit(*this, f);
  }

  std::size_t parameter_count() const;
  void set_zero();

 private:
  template <typename Self, typename F>
  static void visit(Self& self, F& f) {
    f(std::string("tok_emb"), self.tok_emb);
    if (self.emb_proj.size() > 0) f(std::string("emb_proj"), self.emb_proj);
    f(std::string("pos_emb"), self.pos_emb);
    f(std::string("match_emb"), self.match_emb);
    f(std::string("emb_ln_g"), self.emb_ln_g);
    f(std::string("emb_ln_b"), self.emb_ln_b);
    for (std::size_t l = 0; l < self.layers.size(); ++l) {
      auto& L = self.layers[l];
      const std::string p = "layers." + std::to_string(l) + ".";
      f(p + "wq", L.wq);
      f(p + "bq", L.bq);
      f(p + "wk", L.wk);
      f(p + "bk", L.bk);
      f(p + "wv", L.wv);
      f(p + "bv", L.bv);
      f(p + "wo", L.wo);
      f(p + "bo", L.bo);
      f(p + "ln1_g", L.ln1_g);
      f(p + "ln1_b", L.ln1_b);
      f(p + "w1", L.w1);
      f(p + "b1", L.b1);
      f(p + "w2", L.w2);
      f(p + "b2", L.b2);
      f(p + "ln2_g", L.ln2_g);
      f(p + "ln2_b", L.ln2_b);
    }
    f(std::string("head_w"), self.head_w);
    f(std::string("head_b"), self.head_b);
  }
};

/// Logit of P(true_link) for one encoded pair, without dropout.
template <typename Scalar>
Scalar encoder_logit(const EncoderShape& shape, const EncoderParams<Scalar>& params, const EncodedPair& input);

/// Binary cross-entropy of one pair. When `grads` is given, adds
/// `loss_scale` times the gradient of the loss into it. Dropout is applied
/// when `dropout_rng` is given.
template <typename Scalar>
Scalar encoder_loss(const EncoderShape& shape, const EncoderParams<Scalar>& params, const EncodedPair& input,
                    Scalar target, EncoderParams<Scalar>* grads, Scalar loss_scale, Rng* dropout_rng);

template <typename Scalar>
Scalar sigmoid(Scalar x) {
  if (x >= 0) return Scalar(1) / (Scalar(1) + std::exp(-x));
  const Scalar e = std::exp(x);
  return e / (Scalar(1) + e);
}

}  // namespace linkkit
