#include "linkkit/model/model.hpp"

#include <chrono>
#include <cmath>
#include <iostream>
#include <new>

#include "../json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/hash.hpp"
#include "linkkit/model/encoder.hpp"
#include "linkkit/model/lexical.hpp"
#include "linkkit/model/weights_io.hpp"

namespace linkkit {

using detail::FieldReader;
using detail::Json;

std::string_view to_string(Backend b) { return b == Backend::lexical ? "lexical" : "transformer"; }

Backend parse_backend(std::string_view s) {
  if (s == "transformer") return Backend::transformer;
  if (s == "lexical") return Backend::lexical;
  throw UsageError("unknown backend '" + std::string(s) + "' (expected transformer or lexical)");
}

// ---------------------------------------------------------------------------
// TrainConfig

void TrainConfig::validate() const {
  if (!(threshold > 0.0 && threshold < 1.0)) throw UsageError("threshold must lie strictly between 0 and 1");
  if (max_input_length < 16) throw UsageError("max_input_length must be at least 16");
  if (batch_size == 0) throw UsageError("batch_size must be positive");
  if (epochs == 0) throw UsageError("epochs must be positive");
  if (!(learning_rate > 0.0)) throw UsageError("learning_rate must be positive");
  if (warmup_ratio < 0.0 || warmup_ratio > 1.0) throw UsageError("warmup_ratio must lie in [0, 1]");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("dropout must lie in [0, 1)");
  if (l2 < 0.0 || weight_decay < 0.0 || max_grad_norm < 0.0) {
    throw UsageError("l2, weight_decay and max_grad_norm must be non-negative");
  }
}

std::vector<std::string> TrainConfig::keys() {
  return {"encoder_name", "learning_rate", "epochs",        "max_input_length", "batch_size", "threshold",
          "seed",         "backend",       "include_description", "warmup_ratio", "weight_decay",
          "max_grad_norm", "dropout",      "min_word_freq", "l2",               "verbose"};
}

TrainConfig TrainConfig::from_kv(const KvConfig& kv, const std::string& prefix) {
  TrainConfig c;
  auto count = [&](const std::string& key, std::size_t fallback) {
    const std::int64_t v = kv.integer_or(prefix + key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw UsageError("'" + prefix + key + "' must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.encoder_name = kv.string_or(prefix + "encoder_name", c.encoder_name);
  c.learning_rate = kv.number_or(prefix + "learning_rate", c.learning_rate);
  c.epochs = count("epochs", c.epochs);
  c.max_input_length = count("max_input_length", c.max_input_length);
  c.batch_size = count("batch_size", c.batch_size);
  c.threshold = kv.number_or(prefix + "threshold", c.threshold);
  c.seed = kv.integer_or(prefix + "seed", c.seed);
  if (kv.has(prefix + "backend")) c.backend = parse_backend(kv.string(prefix + "backend"));
  c.include_description = kv.boolean_or(prefix + "include_description", c.include_description);
  c.warmup_ratio = kv.number_or(prefix + "warmup_ratio", c.warmup_ratio);
  c.weight_decay = kv.number_or(prefix + "weight_decay", c.weight_decay);
  c.max_grad_norm = kv.number_or(prefix + "max_grad_norm", c.max_grad_norm);
  c.dropout = kv.number_or(prefix + "dropout", c.dropout);
  c.min_word_freq = count("min_word_freq", c.min_word_freq);
  c.l2 = kv.number_or(prefix + "l2", c.l2);
  c.verbose = kv.boolean_or(prefix + "verbose", c.verbose);
  c.validate();
  return c;
}

namespace {

std::string num(double v) { return Json(v).dump(); }

}  // namespace

std::map<std::string, std::string> TrainConfig::to_map() const {
  return {{"encoder_name", encoder_name},
          {"learning_rate", num(learning_rate)},
          {"epochs", std::to_string(epochs)},
          {"max_input_length", std::to_string(max_input_length)},
          {"batch_size", std::to_string(batch_size)},
          {"threshold", num(threshold)},
          {"seed", std::to_string(seed)},
          {"backend", std::string(to_string(backend))},
          {"include_description", include_description ? "true" : "false"},
          {"warmup_ratio", num(warmup_ratio)},
          {"weight_decay", num(weight_decay)},
          {"max_grad_norm", num(max_grad_norm)},
          {"dropout", num(dropout)},
          {"min_word_freq", std::to_string(min_word_freq)},
          {"l2", num(l2)},
          {"verbose", verbose ? "true" : "false"}};
}

// ---------------------------------------------------------------------------
// Examples and fingerprints

std::vector<Example> make_examples(const ProjectDataset& dataset, const std::vector<LinkPair>& pairs) {
  std::vector<Example> out;
  out.reserve(pairs.size());
  for (const LinkPair& p : pairs) {
    out.push_back({dataset.project, dataset.issue(p.issue_id), dataset.commit(p.commit_sha), p.label});
  }
  return out;
}

std::map<std::string, std::string> source_fingerprints(const std::vector<Example>& examples) {
  std::map<std::string, std::vector<LinkPair>> by_project;
  for (const Example& e : examples) {
    LinkPair p;
    p.issue_id = e.issue.issue_id;
    p.commit_sha = e.commit.sha;
    p.label = e.label;
    by_project[e.project].push_back(std::move(p));
  }
  std::map<std::string, std::string> out;
  for (const auto& [project, pairs] : by_project) out[project] = pairs_fingerprint(project, pairs);
  return out;
}

std::string data_fingerprint(const std::vector<Example>& examples) {
  std::string text;
  for (const auto& [project, fp] : source_fingerprints(examples)) text += project + "\t" + fp + "\n";
  return sha256_hex(text);
}

Label classify(double prob, double threshold) { return prob >= threshold ? Label::true_link : Label::false_link; }

// ---------------------------------------------------------------------------
// Artifact files

namespace {

constexpr const char* kConfigFile = "config.json";
constexpr const char* kManifestFile = "train_manifest.json";
constexpr const char* kVocabFile = "vocab.txt";
constexpr const char* kWeightsFile = "weights.bin";
constexpr const char* kLexicalFile = "lexical.json";

Json shape_json(const EncoderShape& s) {
  Json j;
  j["family"] = to_string(s.family);
  j["vocab_size"] = s.vocab_size;
  j["d_model"] = s.d_model;
  j["n_layers"] = s.n_layers;
  j["n_heads"] = s.n_heads;
  j["d_ff"] = s.d_ff;
  j["max_positions"] = s.max_positions;
  j["embedding_dim"] = s.embedding_dim;
  j["shared_layers"] = s.shared_layers;
  return j;
}

EncoderShape shape_from(const Json& j) {
  EncoderShape s;
  try {
    s.family = parse_encoder_family(j.at("family").get<std::string>());
    s.vocab_size = j.at("vocab_size").get<std::size_t>();
    s.d_model = j.at("d_model").get<std::size_t>();
    s.n_layers = j.at("n_layers").get<std::size_t>();
    s.n_heads = j.at("n_heads").get<std::size_t>();
    s.d_ff = j.at("d_ff").get<std::size_t>();
    s.max_positions = j.at("max_positions").get<std::size_t>();
    s.embedding_dim = j.at("embedding_dim").get<std::size_t>();
    s.shared_layers = j.at("shared_layers").get<bool>();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed encoder shape: ") + e.what());
  } catch (const UsageError& e) {
    throw DataError(std::string("malformed encoder shape: ") + e.what());
  }
  return s;
}

Json evaluation_json(const Evaluation& e) {
  Json j;
  j["tp"] = e.counts.tp;
  j["fp"] = e.counts.fp;
  j["tn"] = e.counts.tn;
  j["fn"] = e.counts.fn;
  j["precision"] = e.metrics.precision;
  j["recall"] = e.metrics.recall;
  j["f1"] = e.metrics.f1;
  return j;
}

void write_manifest(const TrainManifest& m, const std::filesystem::path& path) {
  Json j;
  j["backend"] = to_string(m.backend);
  Json cfg = Json::object();
  for (const auto& [k, v] : m.config) cfg[k] = v;
  j["config"] = std::move(cfg);
  j["data_fingerprint"] = m.data_fingerprint;
  Json src = Json::object();
  for (const auto& [k, v] : m.source_fingerprints) src[k] = v;
  j["source_fingerprints"] = std::move(src);
  j["n_train"] = m.n_train;
  j["n_val"] = m.n_val;
  j["seed"] = m.seed;
  j["wall_time_seconds"] = m.wall_time_seconds;
  j["val_metrics"] = m.val ? evaluation_json(*m.val) : Json(nullptr);
  j["best_epoch"] = m.best_epoch;
  j["epoch_losses"] = m.epoch_losses;
  j["step_losses"] = m.step_losses;
  j["parameter_count"] = m.parameter_count;
  detail::write_text_file(path, detail::dump_pretty(j));
}

TrainManifest read_manifest(const std::filesystem::path& path) {
  const Json j = detail::parse_json_file(path);
  TrainManifest m;
  try {
    m.backend = parse_backend(j.at("backend").get<std::string>());
    for (const auto& [k, v] : j.at("config").items()) m.config[k] = v.get<std::string>();
    m.data_fingerprint = j.at("data_fingerprint").get<std::string>();
    for (const auto& [k, v] : j.at("source_fingerprints").items()) m.source_fingerprints[k] = v.get<std::string>();
    m.n_train = j.at("n_train").get<std::size_t>();
    m.n_val = j.at("n_val").get<std::size_t>();
    m.seed = j.at("seed").get<std::int64_t>();
    m.wall_time_seconds = j.at("wall_time_seconds").get<double>();
    if (!j.at("val_metrics").is_null()) {
      const Json& v = j.at("val_metrics");
      Evaluation e;
      e.counts = {v.at("tp").get<std::size_t>(), v.at("fp").get<std::size_t>(), v.at("tn").get<std::size_t>(),
                  v.at("fn").get<std::size_t>()};
      e.metrics = {v.at("precision").get<double>(), v.at("recall").get<double>(), v.at("f1").get<double>()};
      m.val = e;
    }
    m.best_epoch = j.at("best_epoch").get<std::size_t>();
    m.epoch_losses = j.at("epoch_losses").get<std::vector<double>>();
    m.step_losses = j.at("step_losses").get<std::vector<double>>();
    m.parameter_count = j.at("parameter_count").get<std::size_t>();
  } catch (const Json::exception& e) {
    throw DataError("malformed train manifest '" + path.string() + "': " + e.what());
  } catch (const UsageError& e) {
    throw DataError("malformed train manifest '" + path.string() + "': " + e.what());
  }
  return m;
}

/// Everything needed for inference, loaded from an artifact directory.
struct LoadedModel {
  Backend backend = Backend::transformer;
  double threshold = 0.5;
  SerializeOptions options;
  std::size_t max_length = 512;
  EncoderShape shape;
  Tokenizer tokenizer;
  EncoderParams<float> params;
  std::optional<LexicalModel> lexical;

  static LoadedModel load(const std::filesystem::path& dir) {
    const Json cfg = detail::parse_json_file(dir / kConfigFile);
    LoadedModel m;
    try {
      m.backend = parse_backend(cfg.at("backend").get<std::string>());
      m.threshold = cfg.at("threshold").get<double>();
      m.options.include_description = cfg.at("include_description").get<bool>();
      m.max_length = cfg.at("max_input_length").get<std::size_t>();
    } catch (const Json::exception& e) {
      throw DataError("malformed model config in '" + dir.string() + "': " + e.what());
    } catch (const UsageError& e) {
      throw DataError("malformed model config in '" + dir.string() + "': " + e.what());
    }
    if (m.backend == Backend::lexical) {
      m.lexical = LexicalModel::load(dir / kLexicalFile);
      return m;
    }
    m.shape = shape_from(cfg.at("encoder"));
    m.tokenizer = Tokenizer::load(m.shape.family, dir / kVocabFile);
    if (m.tokenizer.size() != m.shape.vocab_size) throw DataError("vocabulary size does not match the encoder");
    m.params = EncoderParams<float>::zeros(m.shape);
    from_tensors(read_tensors(dir / kWeightsFile), m.params);
    return m;
  }

  EncodedPair encode(const Example& e) const {
    return encode_pair(tokenizer, e.issue, e.commit, std::min(max_length, shape.max_positions), options);
  }

  double probability(const Example& e) const {
    if (lexical) return lexical->probability(e);
    try {
      return static_cast<double>(sigmoid(encoder_logit(shape, params, encode(e))));
    } catch (const DataError& err) {
      throw DataError("cannot score pair " + e.project + "/" + e.id().to_string() + ": " + err.what());
    }
  }
};

Json base_config_json(const TrainConfig& cfg) {
  Json j;
  j["backend"] = to_string(cfg.backend);
  j["threshold"] = cfg.threshold;
  j["include_description"] = cfg.include_description;
  j["max_input_length"] = cfg.max_input_length;
  return j;
}

double f1_of(const std::vector<Label>& truth, const std::vector<Label>& pred) {
  return compute_metrics(truth, pred).metrics.f1;
}

// ---------------------------------------------------------------------------
// Transformer training

struct AdamState {
  EncoderParams<float> m, v;
};

std::vector<Matrix<float>*> tensor_list(EncoderParams<float>& p) {
  std::vector<Matrix<float>*> out;
  p.for_each([&](const std::string&, Matrix<float>& m) { out.push_back(&m); });
  return out;
}

std::vector<bool> decay_mask(const EncoderParams<float>& p) {
  std::vector<bool> out;
  p.for_each([&](const std::string& name, const Matrix<float>& m) {
    const bool norm_or_bias = m.rows() == 1 || name.find("_emb") != std::string::npos;
    out.push_back(!norm_or_bias);
  });
  return out;
}

std::uint64_t derive_seed(std::int64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer keeps the streams uncorrelated.
  std::uint64_t z = static_cast<std::uint64_t>(seed) + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct TransformerStart {
  EncoderShape shape;
  Tokenizer tokenizer;
  EncoderParams<float> params;
};

TransformerStart resolve_encoder(const TrainConfig& cfg, const std::vector<Example>& train) {
  TransformerStart st;
  if (encoder_preset(cfg.encoder_name, st.shape)) {
    std::vector<std::vector<std::string>> docs;
    SerializeOptions options{cfg.include_description};
    for (const Example& e : train) docs.push_back(pair_words(e.issue, e.commit, options));
    st.tokenizer = Tokenizer::build(st.shape.family, docs, cfg.min_word_freq);
    st.shape.vocab_size = st.tokenizer.size();
    st.shape.max_positions = cfg.max_input_length;
    st.shape.dropout = cfg.dropout;
    Rng rng(derive_seed(cfg.seed, 0));
    st.params = EncoderParams<float>::init(st.shape, rng);
    return st;
  }
  const std::filesystem::path dir(cfg.encoder_name);
  std::error_code ec;
  if (!cfg.encoder_name.empty() && std::filesystem::is_directory(dir, ec) &&
      std::filesystem::exists(dir / kWeightsFile, ec)) {
    LoadedModel base = LoadedModel::load(dir);
    st.shape = base.shape;
    st.shape.dropout = cfg.dropout;
    st.tokenizer = std::move(base.tokenizer);
    st.params = std::move(base.params);
    return st;
  }
  std::string known;
  for (const auto& n : encoder_preset_names()) known += (known.empty() ? "" : ", ") + n;
  throw TrainingError("unresolvable encoder '" + cfg.encoder_name + "': expected one of " + known +
                      " or a trained transformer artifact directory");
}

void train_transformer(const std::vector<Example>& train, const std::vector<Example>& val, const TrainConfig& cfg,
                       const std::filesystem::path& dir, TrainManifest& manifest) {
  TransformerStart st = resolve_encoder(cfg, train);
  st.shape.validate();
  const std::size_t max_len = std::min(cfg.max_input_length, st.shape.max_positions);
  const SerializeOptions options{cfg.include_description};

  std::vector<EncodedPair> xtr, xva;
  std::vector<float> ytr;
  std::vector<Label> yva;
  for (const Example& e : train) {
    xtr.push_back(encode_pair(st.tokenizer, e.issue, e.commit, max_len, options));
    ytr.push_back(e.label == Label::true_link ? 1.0f : 0.0f);
  }
  for (const Example& e : val) {
    xva.push_back(encode_pair(st.tokenizer, e.issue, e.commit, max_len, options));
    yva.push_back(e.label);
  }

  EncoderParams<float>& params = st.params;
  EncoderParams<float> grads = EncoderParams<float>::zeros(st.shape);
  AdamState adam{EncoderParams<float>::zeros(st.shape), EncoderParams<float>::zeros(st.shape)};
  const auto P = tensor_list(params);
  const auto G = tensor_list(grads);
  const auto M = tensor_list(adam.m);
  const auto V = tensor_list(adam.v);
  const auto decay = decay_mask(params);

  const std::size_t steps_per_epoch = (xtr.size() + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t total = steps_per_epoch * cfg.epochs;
  const std::size_t warm = static_cast<std::size_t>(std::floor(cfg.warmup_ratio * static_cast<double>(total)));
  auto lr_at = [&](std::size_t step) {
    if (step < warm) return cfg.learning_rate * static_cast<double>(step + 1) / static_cast<double>(warm);
    return cfg.learning_rate * static_cast<double>(total - step) / static_cast<double>(std::max<std::size_t>(1, total - warm));
  };
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;

  Rng order_rng(derive_seed(cfg.seed, 1));
  Rng dropout_rng(derive_seed(cfg.seed, 2));
  std::vector<std::size_t> order(xtr.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  std::optional<EncoderParams<float>> best;
  double best_f1 = -1.0;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    shuffle_in_place(order, order_rng);
    double epoch_loss = 0.0;
    for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), b + cfg.batch_size);
      const float scale = 1.0f / static_cast<float>(end - b);
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t k = b; k < end; ++k) {
        batch_loss += encoder_loss<float>(st.shape, params, xtr[order[k]], ytr[order[k]], &grads, scale, &dropout_rng);
      }
      batch_loss /= static_cast<double>(end - b);
      if (!std::isfinite(batch_loss)) {
        throw TrainingError("training loss diverged at epoch " + std::to_string(epoch + 1) + ", step " +
                            std::to_string(step + 1));
      }
      double sq = 0.0;
      for (const auto* g : G) sq += static_cast<double>(g->squaredNorm());
      const double norm = std::sqrt(sq);
      const float clip =
          cfg.max_grad_norm > 0.0 && norm > cfg.max_grad_norm ? static_cast<float>(cfg.max_grad_norm / norm) : 1.0f;
      const double lr = lr_at(step);
      ++step;
      const float bc1 = static_cast<float>(1.0 - std::pow(beta1, static_cast<double>(step)));
      const float bc2 = static_cast<float>(1.0 - std::pow(beta2, static_cast<double>(step)));
      for (std::size_t t = 0; t < P.size(); ++t) {
        auto g = (G[t]->array() * clip);
        M[t]->array() = static_cast<float>(beta1) * M[t]->array() + static_cast<float>(1 - beta1) * g;
        V[t]->array() = static_cast<float>(beta2) * V[t]->array() + static_cast<float>(1 - beta2) * g.square();
        if (decay[t] && cfg.weight_decay > 0.0) P[t]->array() *= static_cast<float>(1.0 - lr * cfg.weight_decay);
        P[t]->array() -= static_cast<float>(lr) * (M[t]->array() / bc1) /
                         ((V[t]->array() / bc2).sqrt() + static_cast<float>(eps));
      }
      manifest.step_losses.push_back(batch_loss);
      epoch_loss += batch_loss * static_cast<double>(end - b);
    }
    epoch_loss /= static_cast<double>(order.size());
    manifest.epoch_losses.push_back(epoch_loss);

    double f1 = 0.0;
    if (!xva.empty()) {
      std::vector<Label> pred;
      for (const auto& x : xva) pred.push_back(classify(sigmoid(encoder_logit(st.shape, params, x)), cfg.threshold));
      f1 = f1_of(yva, pred);
    }
    if (cfg.verbose) {
      std::cerr << "epoch " << epoch + 1 << "/" << cfg.epochs << " loss " << epoch_loss << " val_f1 " << f1 << "\n";
    }
    if (xva.empty() || f1 > best_f1) {
      best_f1 = f1;
      best = params;
      manifest.best_epoch = epoch + 1;
    }
  }
  if (best) params = std::move(*best);

  st.shape.dropout = cfg.dropout;
  Json config = base_config_json(cfg);
  config["max_input_length"] = max_len;
  config["encoder_name"] = cfg.encoder_name;
  config["encoder"] = shape_json(st.shape);
  detail::write_text_file(dir / kConfigFile, detail::dump_pretty(config));
  st.tokenizer.save(dir / kVocabFile);
  write_tensors(to_tensors(params), dir / kWeightsFile);
  manifest.parameter_count = params.parameter_count();
}

void train_lexical(const std::vector<Example>& train, const TrainConfig& cfg, const std::filesystem::path& dir,
                   TrainManifest& manifest) {
  const LexicalModel model = LexicalModel::fit(train, cfg);
  model.save(dir / kLexicalFile);
  detail::write_text_file(dir / kConfigFile, detail::dump_pretty(base_config_json(cfg)));
  manifest.parameter_count = static_cast<std::size_t>(model.weights().size()) + 1;
  manifest.best_epoch = 1;
}

}  // namespace

ModelHandle fine_tune(const std::vector<Example>& train, const std::vector<Example>& val, const TrainConfig& cfg,
                      const std::filesystem::path& artifact_dir) {
  cfg.validate();
  if (train.empty()) throw TrainingError("cannot train on an empty train set");
  const auto t0 = std::chrono::steady_clock::now();
  std::filesystem::create_directories(artifact_dir);

  TrainManifest manifest;
  manifest.backend = cfg.backend;
  manifest.config = cfg.to_map();
  manifest.data_fingerprint = data_fingerprint(train);
  manifest.source_fingerprints = source_fingerprints(train);
  manifest.n_train = train.size();
  manifest.n_val = val.size();
  manifest.seed = cfg.seed;
  try {
    if (cfg.backend == Backend::lexical) {
      train_lexical(train, cfg, artifact_dir, manifest);
    } else {
      train_transformer(train, val, cfg, artifact_dir, manifest);
    }
  } catch (const std::bad_alloc&) {
    throw TrainingError("out of memory while training with batch_size " + std::to_string(cfg.batch_size));
  }

  ModelHandle handle;
  handle.backend = cfg.backend;
  handle.artifact_path = artifact_dir;
  if (!val.empty()) manifest.val = evaluate(handle, val);
  manifest.wall_time_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_manifest(manifest, artifact_dir / kManifestFile);
  handle.train_manifest = std::move(manifest);
  return handle;
}

ModelHandle load_model(const std::filesystem::path& artifact_dir) {
  ModelHandle h;
  h.train_manifest = read_manifest(artifact_dir / kManifestFile);
  h.backend = h.train_manifest.backend;
  h.artifact_path = artifact_dir;
  return h;
}

std::vector<double> predict(const ModelHandle& model, const std::vector<Example>& examples) {
  if (examples.empty()) return {};
  const LoadedModel m = LoadedModel::load(model.artifact_path);
  std::vector<double> out;
  out.reserve(examples.size());
  for (const Example& e : examples) out.push_back(m.probability(e));
  return out;
}

Evaluation evaluate(const ModelHandle& model, const std::vector<Example>& examples) {
  const LoadedModel m = LoadedModel::load(model.artifact_path);
  std::vector<Label> truth, pred;
  for (const Example& e : examples) {
    truth.push_back(e.label);
    pred.push_back(classify(m.probability(e), m.threshold));
  }
  return compute_metrics(truth, pred);
}

}  // namespace linkkit
