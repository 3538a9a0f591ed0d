#include "linkkit/model/encoder.hpp"

#include <cmath>

#include "linkkit/error.hpp"

namespace linkkit {

void EncoderShape::validate() const {
  if (vocab_size == 0) throw TrainingError("encoder vocabulary is empty");
  if (d_model == 0 || n_layers == 0 || n_heads == 0 || d_ff == 0 || max_positions == 0) {
    throw TrainingError("encoder dimensions must be positive");
  }
  if (d_model % n_heads != 0) throw TrainingError("d_model must be divisible by n_heads");
  if (dropout < 0.0 || dropout >= 1.0) throw TrainingError("dropout must lie in [0, 1)");
}

bool encoder_preset(const std::string& name, EncoderShape& shape) {
  EncoderShape s;
  if (name == "roberta-tiny") {
    s.family = EncoderFamily::roberta;
  } else if (name == "roberta-small") {
    s.family = EncoderFamily::roberta;
    s.d_model = 256;
    s.n_layers = 4;
    s.n_heads = 4;
    s.d_ff = 1024;
  } else if (name == "distilbert-tiny") {
    s.family = EncoderFamily::distilbert;
  } else if (name == "albert-tiny") {
    s.family = EncoderFamily::albert;
    s.embedding_dim = 32;
    s.shared_layers = true;
  } else {
    return false;
  }
  shape = s;
  return true;
}

std::vector<std::string> encoder_preset_names() {
  return {"roberta-tiny", "roberta-small", "distilbert-tiny", "albert-tiny"};
}

// ---------------------------------------------------------------------------
// Parameters

template <typename Scalar>
EncoderParams<Scalar> EncoderParams<Scalar>::zeros(const EncoderShape& s) {
  using M = Matrix<Scalar>;
  const auto d = static_cast<Eigen::Index>(s.d_model);
  const auto ff = static_cast<Eigen::Index>(s.d_ff);
  const auto e = static_cast<Eigen::Index>(s.embedding_dim ? s.embedding_dim : s.d_model);
  EncoderParams p;
  p.tok_emb = M::Zero(static_cast<Eigen::Index>(s.vocab_size), e);
  if (s.embedding_dim) p.emb_proj = M::Zero(e, d);
  p.pos_emb = M::Zero(static_cast<Eigen::Index>(s.max_positions), d);
  p.match_emb = M::Zero(2, d);
  p.emb_ln_g = M::Zero(1, d);
  p.emb_ln_b = M::Zero(1, d);
  p.layers.resize(s.layer_sets());
  for (auto& L : p.layers) {
    L.wq = L.wk = L.wv = L.wo = M::Zero(d, d);
    L.bq = L.bk = L.bv = L.bo = M::Zero(1, d);
    L.ln1_g = L.ln1_b = L.ln2_g = L.ln2_b = M::Zero(1, d);
    L.w1 = M::Zero(d, ff);
    L.b1 = M::Zero(1, ff);
    L.w2 = M::Zero(ff, d);
    L.b2 = M::Zero(1, d);
  }
  p.head_w = M::Zero(d, 1);
  p.head_b = M::Zero(1, 1);
  return p;
}

template <typename Scalar>
EncoderParams<Scalar> EncoderParams<Scalar>::init(const EncoderShape& s, Rng& rng) {
  s.validate();
  EncoderParams p = zeros(s);
  p.for_each([&](const std::string& name, Matrix<Scalar>& m) {
    const bool gain = name.ends_with("_g");
    const bool bias = name.ends_with("_b") || name.rfind(".b") == name.size() - 3;
    if (gain) {
      m.setOnes();
    } else if (!bias) {
      for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(s.init_std * standard_normal(rng));
    }
  });
  return p;
}

template <typename Scalar>
std::size_t EncoderParams<Scalar>::parameter_count() const {
  std::size_t n = 0;
  for_each([&](const std::string&, const Matrix<Scalar>& m) { n += static_cast<std::size_t>(m.size()); });
  return n;
}

template <typename Scalar>
void EncoderParams<Scalar>::set_zero() {
  for_each([](const std::string&, Matrix<Scalar>& m) { m.setZero(); });
}

// ---------------------------------------------------------------------------
// Building blocks

namespace {

constexpr double kLnEps = 1e-5;

template <typename Scalar>
struct LnCache {
  Matrix<Scalar> xhat;
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd;
};

template <typename Scalar>
Matrix<Scalar> layer_norm(const Matrix<Scalar>& x, const Matrix<Scalar>& g, const Matrix<Scalar>& b,
                          LnCache<Scalar>* cache) {
  const Eigen::Index n = x.cols();
  Matrix<Scalar> xhat(x.rows(), n);
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rstd(x.rows());
  for (Eigen::Index r = 0; r < x.rows(); ++r) {
    const Scalar mu = x.row(r).mean();
    const Scalar var = (x.row(r).array() - mu).square().mean();
    rstd(r) = Scalar(1) / std::sqrt(var + Scalar(kLnEps));
    xhat.row(r) = (x.row(r).array() - mu) * rstd(r);
  }
  Matrix<Scalar> y = (xhat.array().rowwise() * g.row(0).array()).rowwise() + b.row(0).array();
  if (cache) {
    cache->xhat = std::move(xhat);
    cache->rstd = std::move(rstd);
  }
  return y;
}

template <typename Scalar>
Matrix<Scalar> layer_norm_backward(const Matrix<Scalar>& dy, const LnCache<Scalar>& c, const Matrix<Scalar>& g,
                                   Matrix<Scalar>& dg, Matrix<Scalar>& db) {
  dg.row(0) += (dy.array() * c.xhat.array()).colwise().sum().matrix();
  db.row(0) += dy.colwise().sum();
  const Matrix<Scalar> dxhat = dy.array().rowwise() * g.row(0).array();
  Matrix<Scalar> dx(dy.rows(), dy.cols());
  for (Eigen::Index r = 0; r < dy.rows(); ++r) {
    const Scalar m1 = dxhat.row(r).mean();
    const Scalar m2 = (dxhat.row(r).array() * c.xhat.row(r).array()).mean();
    dx.row(r) = c.rstd(r) * (dxhat.row(r).array() - m1 - c.xhat.row(r).array() * m2);
  }
  return dx;
}

template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
}

template <typename Scalar>
Scalar gelu_grad(Scalar x) {
  const Scalar cdf = Scalar(0.5) * (Scalar(1) + std::erf(x / std::sqrt(Scalar(2))));
  const Scalar pdf = std::exp(Scalar(-0.5) * x * x) / std::sqrt(Scalar(2 * M_PI));
  return cdf + x * pdf;
}

/// Inverted-dropout mask (entries 0 or 1/(1-p)); empty when disabled.
template <typename Scalar>
Matrix<Scalar> dropout_mask(Eigen::Index rows, Eigen::Index cols, double p, Rng* rng) {
  if (!rng || p <= 0.0) return {};
  Matrix<Scalar> m(rows, cols);
  const Scalar keep = static_cast<Scalar>(1.0 / (1.0 - p));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = uniform_unit(*rng) < p ? Scalar(0) : keep;
  return m;
}

template <typename Scalar>
void apply_mask(Matrix<Scalar>& x, const Matrix<Scalar>& mask) {
  if (mask.size() > 0) x.array() *= mask.array();
}

template <typename Scalar>
struct LayerCache {
  Matrix<Scalar> x, q, k, v, o;
  std::vector<Matrix<Scalar>> attn;
  Matrix<Scalar> attn_mask;
  LnCache<Scalar> ln1;
  Matrix<Scalar> h1, u, g;
  Matrix<Scalar> ffn_mask;
  LnCache<Scalar> ln2;
};

template <typename Scalar>
Matrix<Scalar> layer_forward(const EncoderShape& s, const LayerParams<Scalar>& L, const Matrix<Scalar>& x,
                             LayerCache<Scalar>* c, Rng* rng) {
  const Eigen::Index T = x.rows();
  const Eigen::Index dh = static_cast<Eigen::Index>(s.d_model / s.n_heads);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  Matrix<Scalar> q = (x * L.wq).rowwise() + L.bq.row(0);
  Matrix<Scalar> k = (x * L.wk).rowwise() + L.bk.row(0);
  Matrix<Scalar> v = (x * L.wv).rowwise() + L.bv.row(0);
  Matrix<Scalar> o(T, x.cols());
  std::vector<Matrix<Scalar>> attn(s.n_heads);
  for (std::size_t h = 0; h < s.n_heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    Matrix<Scalar> a = (q.middleCols(c0, dh) * k.middleCols(c0, dh).transpose()) * scale;
    for (Eigen::Index r = 0; r < T; ++r) {
      const Scalar mx = a.row(r).maxCoeff();
      a.row(r) = (a.row(r).array() - mx).exp();
      a.row(r) /= a.row(r).sum();
    }
    o.middleCols(c0, dh) = a * v.middleCols(c0, dh);
    attn[h] = std::move(a);
  }
  Matrix<Scalar> proj = (o * L.wo).rowwise() + L.bo.row(0);
  Matrix<Scalar> attn_mask = dropout_mask<Scalar>(T, proj.cols(), s.dropout, rng);
  apply_mask(proj, attn_mask);
  LnCache<Scalar> ln1;
  Matrix<Scalar> h1 = layer_norm<Scalar>(x + proj, L.ln1_g, L.ln1_b, c ? &ln1 : nullptr);

  Matrix<Scalar> u = (h1 * L.w1).rowwise() + L.b1.row(0);
  Matrix<Scalar> g = u.unaryExpr([](Scalar z) { return gelu(z); });
  Matrix<Scalar> f = (g * L.w2).rowwise() + L.b2.row(0);
  Matrix<Scalar> ffn_mask = dropout_mask<Scalar>(T, f.cols(), s.dropout, rng);
  apply_mask(f, ffn_mask);
  LnCache<Scalar> ln2;
  Matrix<Scalar> out = layer_norm<Scalar>(h1 + f, L.ln2_g, L.ln2_b, c ? &ln2 : nullptr);

  if (c) {
    c->x = x;
    c->q = std::move(q);
    c->k = std::move(k);
    c->v = std::move(v);
    c->o = std::move(o);
    c->attn = std::move(attn);
    c->attn_mask = std::move(attn_mask);
    c->ln1 = std::move(ln1);
    c->h1 = std::move(h1);
    c->u = std::move(u);
    c->g = std::move(g);
    c->ffn_mask = std::move(ffn_mask);
    c->ln2 = std::move(ln2);
  }
  return out;
}

/// Returns d(loss)/d(layer input) and accumulates parameter gradients.
template <typename Scalar>
Matrix<Scalar> layer_backward(const EncoderShape& s, const LayerParams<Scalar>& L, const LayerCache<Scalar>& c,
                              const Matrix<Scalar>& dout, LayerParams<Scalar>& G) {
  const Eigen::Index T = c.x.rows();
  const Eigen::Index dh = static_cast<Eigen::Index>(s.d_model / s.n_heads);
  const Scalar scale = Scalar(1) / std::sqrt(static_cast<Scalar>(dh));

  // out = LN2(h1 + drop(g W2 + b2))
  const Matrix<Scalar> dr2 = layer_norm_backward<Scalar>(dout, c.ln2, L.ln2_g, G.ln2_g, G.ln2_b);
  Matrix<Scalar> df = dr2;
  apply_mask(df, c.ffn_mask);
  G.w2.noalias() += c.g.transpose() * df;
  G.b2.row(0) += df.colwise().sum();
  Matrix<Scalar> du = df * L.w2.transpose();
  du.array() *= c.u.unaryExpr([](Scalar z) { return gelu_grad(z); }).array();
  G.w1.noalias() += c.h1.transpose() * du;
  G.b1.row(0) += du.colwise().sum();
  Matrix<Scalar> dh1 = dr2;
  dh1.noalias() += du * L.w1.transpose();

  // h1 = LN1(x + drop(o Wo + bo))
  const Matrix<Scalar> dr1 = layer_norm_backward<Scalar>(dh1, c.ln1, L.ln1_g, G.ln1_g, G.ln1_b);
  Matrix<Scalar> dproj = dr1;
  apply_mask(dproj, c.attn_mask);
  G.wo.noalias() += c.o.transpose() * dproj;
  G.bo.row(0) += dproj.colwise().sum();
  const Matrix<Scalar> dO = dproj * L.wo.transpose();

  Matrix<Scalar> dq(T, c.q.cols()), dk(T, c.k.cols()), dv(T, c.v.cols());
  for (std::size_t h = 0; h < s.n_heads; ++h) {
    const Eigen::Index c0 = static_cast<Eigen::Index>(h) * dh;
    const Matrix<Scalar>& a = c.attn[h];
    const Matrix<Scalar> dOh = dO.middleCols(c0, dh);
    const Matrix<Scalar> da = dOh * c.v.middleCols(c0, dh).transpose();
    dv.middleCols(c0, dh) = a.transpose() * dOh;
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> rowdot = (da.array() * a.array()).rowwise().sum();
    Matrix<Scalar> ds = a.array() * (da.array().colwise() - rowdot.array());
    ds *= scale;
    dq.middleCols(c0, dh) = ds * c.k.middleCols(c0, dh);
    dk.middleCols(c0, dh) = ds.transpose() * c.q.middleCols(c0, dh);
  }
  G.wq.noalias() += c.x.transpose() * dq;
  G.wk.noalias() += c.x.transpose() * dk;
  G.wv.noalias() += c.x.transpose() * dv;
  G.bq.row(0) += dq.colwise().sum();
  G.bk.row(0) += dk.colwise().sum();
  G.bv.row(0) += dv.colwise().sum();

  Matrix<Scalar> dx = dr1;
  dx.noalias() += dq * L.wq.transpose();
  dx.noalias() += dk * L.wk.transpose();
  dx.noalias() += dv * L.wv.transpose();
  return dx;
}

template <typename Scalar>
struct ForwardCache {
  Matrix<Scalar> tok_rows;  // looked-up (possibly narrow) embeddings
  LnCache<Scalar> emb_ln;
  Matrix<Scalar> emb_mask;
  std::vector<LayerCache<Scalar>> layers;
  Matrix<Scalar> cls;  // 1 x d after head dropout
  Matrix<Scalar> head_mask;
};

template <typename Scalar>
Scalar forward(const EncoderShape& s, const EncoderParams<Scalar>& p, const EncodedPair& in, ForwardCache<Scalar>* c,
               Rng* rng) {
  const auto T = static_cast<Eigen::Index>(in.ids.size());
  if (T == 0) throw DataError("cannot encode an empty token sequence");
  if (static_cast<std::size_t>(T) > s.max_positions) {
    throw DataError("sequence of " + std::to_string(T) + " tokens exceeds the encoder's " +
                    std::to_string(s.max_positions) + " positions");
  }
  Matrix<Scalar> rows(T, p.tok_emb.cols());
  for (Eigen::Index t = 0; t < T; ++t) {
    const auto id = in.ids[static_cast<std::size_t>(t)];
    if (id < 0 || id >= p.tok_emb.rows()) throw DataError("token id " + std::to_string(id) + " outside vocabulary");
    rows.row(t) = p.tok_emb.row(id);
  }
  Matrix<Scalar> x = p.emb_proj.size() > 0 ? Matrix<Scalar>(rows * p.emb_proj) : rows;
  x += p.pos_emb.topRows(T);
  for (Eigen::Index t = 0; t < T; ++t) x.row(t) += p.match_emb.row(in.match[static_cast<std::size_t>(t)] ? 1 : 0);

  LnCache<Scalar> emb_ln;
  Matrix<Scalar> h = layer_norm<Scalar>(x, p.emb_ln_g, p.emb_ln_b, c ? &emb_ln : nullptr);
  Matrix<Scalar> emb_mask = dropout_mask<Scalar>(T, h.cols(), s.dropout, rng);
  apply_mask(h, emb_mask);

  if (c) c->layers.resize(s.n_layers);
  for (std::size_t l = 0; l < s.n_layers; ++l) {
    const LayerParams<Scalar>& L = p.layers[s.shared_layers ? 0 : l];
    h = layer_forward<Scalar>(s, L, h, c ? &c->layers[l] : nullptr, rng);
  }
  Matrix<Scalar> cls = h.topRows(1);
  Matrix<Scalar> head_mask = dropout_mask<Scalar>(1, cls.cols(), s.dropout, rng);
  apply_mask(cls, head_mask);
  const Scalar logit = (cls * p.head_w)(0, 0) + p.head_b(0, 0);
  if (c) {
    c->tok_rows = std::move(rows);
    c->emb_ln = std::move(emb_ln);
    c->emb_mask = std::move(emb_mask);
    c->cls = std::move(cls);
    c->head_mask = std::move(head_mask);
  }
  return logit;
}

template <typename Scalar>
void backward(const EncoderShape& s, const EncoderParams<Scalar>& p, const EncodedPair& in,
              const ForwardCache<Scalar>& c, Scalar dlogit, EncoderParams<Scalar>& G) {
  G.head_w.noalias() += c.cls.transpose() * dlogit;
  G.head_b(0, 0) += dlogit;
  Matrix<Scalar> dcls = p.head_w.transpose() * dlogit;
  apply_mask(dcls, c.head_mask);

  const Eigen::Index T = static_cast<Eigen::Index>(in.ids.size());
  Matrix<Scalar> dh = Matrix<Scalar>::Zero(T, static_cast<Eigen::Index>(s.d_model));
  dh.row(0) = dcls.row(0);
  for (std::size_t l = s.n_layers; l-- > 0;) {
    const std::size_t set = s.shared_layers ? 0 : l;
    dh = layer_backward<Scalar>(s, p.layers[set], c.layers[l], dh, G.layers[set]);
  }
  apply_mask(dh, c.emb_mask);
  const Matrix<Scalar> dx = layer_norm_backward<Scalar>(dh, c.emb_ln, p.emb_ln_g, G.emb_ln_g, G.emb_ln_b);

  G.pos_emb.topRows(T) += dx;
  for (Eigen::Index t = 0; t < T; ++t) G.match_emb.row(in.match[static_cast<std::size_t>(t)] ? 1 : 0) += dx.row(t);
  Matrix<Scalar> drows;
  if (p.emb_proj.size() > 0) {
    G.emb_proj.noalias() += c.tok_rows.transpose() * dx;
    drows = dx * p.emb_proj.transpose();
  } else {
    drows = dx;
  }
  for (Eigen::Index t = 0; t < T; ++t) G.tok_emb.row(in.ids[static_cast<std::size_t>(t)]) += drows.row(t);
}

}  // namespace

template <typename Scalar>
Scalar encoder_logit(const EncoderShape& shape, const EncoderParams<Scalar>& params, const EncodedPair& input) {
  return forward<Scalar>(shape, params, input, nullptr, nullptr);
}

template <typename Scalar>
Scalar encoder_loss(const EncoderShape& shape, const EncoderParams<Scalar>& params, const EncodedPair& input,
                    Scalar target, EncoderParams<Scalar>* grads, Scalar loss_scale, Rng* dropout_rng) {
  ForwardCache<Scalar> cache;
  const Scalar z = forward<Scalar>(shape, params, input, grads ? &cache : nullptr, dropout_rng);
  // Numerically stable binary cross-entropy with logits.
  const Scalar loss = std::max(z, Scalar(0)) - z * target + std::log1p(std::exp(-std::abs(z)));
  if (grads) backward<Scalar>(shape, params, input, cache, (sigmoid(z) - target) * loss_scale, *grads);
  return loss;
}

template struct EncoderParams<float>;
template struct EncoderParams<double>;
template float encoder_logit<float>(const EncoderShape&, const EncoderParams<float>&, const EncodedPair&);
template double encoder_logit<double>(const EncoderShape&, const EncoderParams<double>&, const EncodedPair&);
template float encoder_loss<float>(const EncoderShape&, const EncoderParams<float>&, const EncodedPair&, float,
                                   EncoderParams<float>*, float, Rng*);
template double encoder_loss<double>(const EncoderShape&, const EncoderParams<double>&, const EncodedPair&, double,
                                     EncoderParams<double>*, double, Rng*);

}  // namespace linkkit
