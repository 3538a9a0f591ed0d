#pragma once

// Pair classifiers: the transformer backend (fine-tuned encoder + sigmoid
// head) and the lexical TF-IDF baseline, behind one training/prediction
// interface backed by an artifact directory.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"
#include "linkkit/evaluation.hpp"
#include "linkkit/kvconfig.hpp"
#include "linkkit/model/serialize.hpp"

namespace linkkit {

enum class Backend { transformer, lexical };

std::string_view to_string(Backend b);
Backend parse_backend(std::string_view s);

struct TrainConfig {
  /// A preset (roberta-tiny, roberta-small, distilbert-tiny, albert-tiny)
  /// or the directory of a trained transformer artifact to continue from.
  std::string encoder_name = "roberta-tiny";
  double learning_rate = 3e-5;
  std::size_t epochs = 6;
  std::size_t max_input_length = 512;
  std::size_t batch_size = 32;
  double threshold = 0.5;
  std::int64_t seed = 0;
  Backend backend = Backend::transformer;

  bool include_description = false;
  double warmup_ratio = 0.06;
  double weight_decay = 0.0;
  double max_grad_norm = 1.0;
  double dropout = 0.1;
  std::size_t min_word_freq = 1;
  /// L2 strength of the lexical baseline's logistic regression.
  double l2 = 0.01;
  bool verbose = false;

  void validate() const;

  /// Reads `<prefix><field>` keys; absent keys keep their defaults.
  static TrainConfig from_kv(const KvConfig& kv, const std::string& prefix = "");
  static std::vector<std::string> keys();
  std::map<std::string, std::string> to_map() const;
};

/// A labeled pair together with the records it refers to.
struct Example {
  std::string project;
  Issue issue;
  Commit commit;
  Label label = Label::false_link;

  PairId id() const { return {issue.issue_id, commit.sha}; }
};

std::vector<Example> make_examples(const ProjectDataset& dataset, const std::vector<LinkPair>& pairs);

/// Per-project pairs_fingerprint of the examples.
std::map<std::string, std::string> source_fingerprints(const std::vector<Example>& examples);
/// SHA-256 over the per-project fingerprints.
std::string data_fingerprint(const std::vector<Example>& examples);

struct TrainManifest {
  Backend backend = Backend::transformer;
  std::map<std::string, std::string> config;
  std::string data_fingerprint;
  std::map<std::string, std::string> source_fingerprints;
  std::size_t n_train = 0;
  std::size_t n_val = 0;
  std::int64_t seed = 0;
  double wall_time_seconds = 0.0;
  std::optional<Evaluation> val;
  std::size_t best_epoch = 0;
  std::vector<double> epoch_losses;
  std::vector<double> step_losses;
  std::size_t parameter_count = 0;
};

struct ModelHandle {
  Backend backend = Backend::transformer;
  std::filesystem::path artifact_path;
  TrainManifest train_manifest;
};

/// Trains on `train`, keeps the epoch with the best validation F1, and
/// writes the artifact into `artifact_dir`. Throws TrainingError on an
/// empty train set, an unresolvable encoder or a diverging loss.
ModelHandle fine_tune(const std::vector<Example>& train, const std::vector<Example>& val, const TrainConfig& cfg,
                      const std::filesystem::path& artifact_dir);

ModelHandle load_model(const std::filesystem::path& artifact_dir);

/// P(true_link) per example, in input order.
std::vector<double> predict(const ModelHandle& model, const std::vector<Example>& examples);

/// true_link iff prob >= threshold.
Label classify(double prob, double threshold = 0.5);

/// Classifies with the model's threshold and scores against the labels.
Evaluation evaluate(const ModelHandle& model, const std::vector<Example>& examples);

}  // namespace linkkit
