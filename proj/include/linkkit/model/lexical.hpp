#pragma once

// TF-IDF cosine between the two free-text halves, concatenated with the
// one-hot metadata vector, scored by L2-regularized logistic regression.

#include <Eigen/Dense>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "linkkit/model/model.hpp"

namespace linkkit {

class TfIdf {
 public:
  /// Smoothed idf, ln((1 + n) / (1 + df)) + 1, over the given documents.
  static TfIdf fit(const std::vector<std::vector<std::string>>& documents);

  /// Cosine of the L2-normalized tf-idf vectors. Terms outside the fitted
  /// vocabulary weigh as if their document frequency were 0. 0 when either
  /// side is empty.
  double cosine(const std::vector<std::string>& a, const std::vector<std::string>& b) const;

  std::size_t size() const { return idf_.size(); }
  const std::map<std::string, double>& idf() const { return idf_; }
  double unseen_idf() const { return unseen_idf_; }
  static TfIdf from_idf(std::map<std::string, double> idf, double unseen_idf);

 private:
  std::map<std::string, double> idf_;
  double unseen_idf_ = 1.0;
};

class LexicalModel {
 public:
  static LexicalModel fit(const std::vector<Example>& train, const TrainConfig& cfg);

  Eigen::VectorXd features(const Example& e) const;
  double probability(const Example& e) const;

  void save(const std::filesystem::path& path) const;
  static LexicalModel load(const std::filesystem::path& path);

  const TfIdf& tfidf() const { return tfidf_; }
  const Eigen::VectorXd& weights() const { return weights_; }
  double bias() const { return bias_; }

 private:
  TfIdf tfidf_;
  SerializeOptions options_;
  Eigen::VectorXd weights_;
  double bias_ = 0.0;
};

/// Token lists of the issue text and the commit message.
std::pair<std::vector<std::string>, std::vector<std::string>> lexical_halves(const Example& e,
                                                                             const SerializeOptions& options);

}  // namespace linkkit
