#include "linkkit/model/lexical.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "../json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/preprocess.hpp"

namespace linkkit {

using detail::Json;

TfIdf TfIdf::fit(const std::vector<std::vector<std::string>>& documents) {
  std::map<std::string, std::size_t> df;
  for (const auto& doc : documents) {
    const std::set<std::string> unique(doc.begin(), doc.end());
    for (const auto& t : unique) ++df[t];
  }
  TfIdf m;
  const double n = static_cast<double>(documents.size());
  for (const auto& [t, k] : df) m.idf_[t] = std::log((1.0 + n) / (1.0 + static_cast<double>(k))) + 1.0;
  m.unseen_idf_ = std::log(1.0 + n) + 1.0;
  return m;
}

TfIdf TfIdf::from_idf(std::map<std::string, double> idf, double unseen_idf) {
  TfIdf m;
  m.idf_ = std::move(idf);
  m.unseen_idf_ = unseen_idf;
  return m;
}

double TfIdf::cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) const {
  auto weigh = [&](const std::vector<std::string>& doc) {
    std::map<std::string, double> v;
    for (const auto& t : doc) {
      const auto it = idf_.find(t);
      v[t] += it != idf_.end() ? it->second : unseen_idf_;
    }
    double norm = 0.0;
    for (const auto& [_, x] : v) norm += x * x;
    norm = std::sqrt(norm);
    if (norm > 0.0) {
      for (auto& [_, x] : v) x /= norm;
    }
    return v;
  };
  const auto va = weigh(a);
  const auto vb = weigh(b);
  double dot = 0.0;
  for (const auto& [t, x] : va) {
    if (auto it = vb.find(t); it != vb.end()) dot += x * it->second;
  }
  return std::min(1.0, dot);
}

std::pair<std::vector<std::string>, std::vector<std::string>> lexical_halves(const Example& e,
                                                                             const SerializeOptions& options) {
  const PairSegments s = pair_segments(e.issue, e.commit, options);
  return {word_tokens(s.issue_text), word_tokens(s.commit_text)};
}

Eigen::VectorXd LexicalModel::features(const Example& e) const {
  const auto [a, b] = lexical_halves(e, options_);
  const std::vector<double> oh = one_hot_encode(e.issue, e.commit);
  Eigen::VectorXd x(static_cast<Eigen::Index>(1 + oh.size()));
  x(0) = tfidf_.cosine(a, b);
  for (std::size_t k = 0; k < oh.size(); ++k) x(static_cast<Eigen::Index>(k + 1)) = oh[k];
  return x;
}

double LexicalModel::probability(const Example& e) const {
  const double z = weights_.dot(features(e)) + bias_;
  return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
}

LexicalModel LexicalModel::fit(const std::vector<Example>& train, const TrainConfig& cfg) {
  if (train.empty()) throw TrainingError("cannot fit the lexical baseline on an empty train set");
  LexicalModel m;
  m.options_.include_description = cfg.include_description;
  std::vector<std::vector<std::string>> docs;
  for (const Example& e : train) {
    auto [a, b] = lexical_halves(e, m.options_);
    docs.push_back(std::move(a));
    docs.push_back(std::move(b));
  }
  m.tfidf_ = TfIdf::fit(docs);
  if (m.tfidf_.size() == 0) throw TrainingError("lexical baseline: empty vocabulary");

  const auto n = static_cast<Eigen::Index>(train.size());
  const Eigen::Index p = static_cast<Eigen::Index>(one_hot_length()) + 1;
  // Design matrix with a trailing intercept column.
  Eigen::MatrixXd X(n, p + 1);
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    X.row(i).head(p) = m.features(train[static_cast<std::size_t>(i)]).transpose();
    X(i, p) = 1.0;
    y(i) = train[static_cast<std::size_t>(i)].label == Label::true_link ? 1.0 : 0.0;
  }
  Eigen::VectorXd reg = Eigen::VectorXd::Constant(p + 1, cfg.l2);
  reg(p) = 0.0;
  Eigen::VectorXd w = Eigen::VectorXd::Zero(p + 1);
  for (int iter = 0; iter < 100; ++iter) {
    const Eigen::VectorXd z = X * w;
    Eigen::VectorXd mu(n), s(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      mu(i) = z(i) >= 0 ? 1.0 / (1.0 + std::exp(-z(i))) : std::exp(z(i)) / (1.0 + std::exp(z(i)));
      s(i) = std::max(mu(i) * (1.0 - mu(i)), 1e-12);
    }
    const Eigen::VectorXd grad = X.transpose() * (mu - y) + reg.cwiseProduct(w);
    Eigen::MatrixXd H = X.transpose() * s.asDiagonal() * X;
    H.diagonal() += reg + Eigen::VectorXd::Constant(p + 1, 1e-9);
    const Eigen::VectorXd step = H.ldlt().solve(grad);
    w -= step;
    if (!w.allFinite()) throw TrainingError("lexical baseline: logistic regression diverged");
    if (step.lpNorm<Eigen::Infinity>() < 1e-10) break;
  }
  m.weights_ = w.head(p);
  m.bias_ = w(p);
  return m;
}

void LexicalModel::save(const std::filesystem::path& path) const {
  Json j;
  j["include_description"] = options_.include_description;
  Json idf = Json::object();
  for (const auto& [t, v] : tfidf_.idf()) idf[t] = v;
  j["idf"] = std::move(idf);
  j["unseen_idf"] = tfidf_.unseen_idf();
  j["weights"] = std::vector<double>(weights_.data(), weights_.data() + weights_.size());
  j["bias"] = bias_;
  detail::write_text_file(path, detail::dump_pretty(j));
}

LexicalModel LexicalModel::load(const std::filesystem::path& path) {
  const Json j = detail::parse_json_file(path);
  LexicalModel m;
  try {
    m.options_.include_description = j.at("include_description").get<bool>();
    std::map<std::string, double> idf;
    for (const auto& [t, v] : j.at("idf").items()) idf[t] = v.get<double>();
    m.tfidf_ = TfIdf::from_idf(std::move(idf), j.at("unseen_idf").get<double>());
    const auto w = j.at("weights").get<std::vector<double>>();
    m.weights_ = Eigen::Map<const Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
    m.bias_ = j.at("bias").get<double>();
  } catch (const Json::exception& e) {
    throw DataError("malformed lexical model '" + path.string() + "': " + e.what());
  }
  if (m.weights_.size() != static_cast<Eigen::Index>(one_hot_length()) + 1) {
    throw DataError("lexical model '" + path.string() + "' has the wrong feature width");
  }
  return m;
}

}  // namespace linkkit
