#include "linkkit/splitting.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <sstream>

#include "json_util.hpp"
#include "linkkit/error.hpp"
#include "linkkit/random.hpp"

namespace linkkit {

using detail::FieldReader;
using detail::Json;

std::string_view to_string(SplitPolicy p) { return p == SplitPolicy::temporal ? "temporal" : "random"; }

SplitPolicy parse_split_policy(std::string_view s) {
  if (s == "random") return SplitPolicy::random;
  if (s == "temporal") return SplitPolicy::temporal;
  throw UsageError("unknown split policy '" + std::string(s) + "' (expected random or temporal)");
}

Ratios parse_ratios(std::string_view text) {
  Ratios r{};
  std::istringstream in{std::string(text)};
  std::string part;
  std::size_t k = 0;
  while (std::getline(in, part, ',')) {
    if (k == 3) throw UsageError("ratios need exactly three values, got '" + std::string(text) + "'");
    const auto b = part.find_first_not_of(" \t");
    const auto e = part.find_last_not_of(" \t");
    part = b == std::string::npos ? std::string() : part.substr(b, e - b + 1);
    try {
      std::size_t used = 0;
      r[k] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw UsageError("ratio '" + part + "' is not a number");
    }
    ++k;
  }
  if (k != 3) throw UsageError("ratios need exactly three values, got '" + std::string(text) + "'");
  validate_ratios(r);
  return r;
}

void validate_ratios(const Ratios& ratios) {
  for (double r : ratios) {
    if (!(r >= 0.0) || r > 1.0) throw UsageError("each ratio must lie in [0, 1]");
  }
  const double sum = ratios[0] + ratios[1] + ratios[2];
  if (std::abs(sum - 1.0) > 1e-9) {
    throw UsageError("ratios must sum to 1 (got " + std::to_string(sum) + ")");
  }
}

std::array<std::size_t, 3> partition_sizes(std::size_t n, const Ratios& ratios) {
  validate_ratios(ratios);
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  auto part = [n](double r) { return static_cast<std::size_t>(std::floor(r * static_cast<double>(n) + 1e-9)); };
  const std::size_t train = std::min(part(ratios[0]), n);
  const std::size_t val = std::min(part(ratios[1]), n - train);
  return {train, val, n - train - val};
}

namespace {

SplitPlan cut(std::vector<PairId> order, SplitPolicy policy, const Ratios& ratios) {
  const auto [n_train, n_val, n_test] = partition_sizes(order.size(), ratios);
  SplitPlan plan;
  plan.policy = policy;
  plan.ratios = ratios;
  auto it = order.begin();
  plan.train.assign(std::make_move_iterator(it), std::make_move_iterator(it + n_train));
  it += n_train;
  plan.val.assign(std::make_move_iterator(it), std::make_move_iterator(it + n_val));
  it += n_val;
  plan.test.assign(std::make_move_iterator(it), std::make_move_iterator(it + n_test));
  return plan;
}

std::map<PairId, Date> date_index(const ProjectDataset& dataset) {
  std::map<PairId, Date> dates;
  for (const LinkPair& p : dataset.pairs) dates.emplace(p.id(), p.pair_date);
  return dates;
}

}  // namespace

SplitPlan random_split(const ProjectDataset& dataset, const Ratios& ratios, std::int64_t seed) {
  validate_ratios(ratios);
  if (dataset.pairs.empty()) throw DataError("dataset '" + dataset.project + "' is empty");
  std::vector<PairId> order;
  order.reserve(dataset.pairs.size());
  for (const LinkPair& p : dataset.pairs) order.push_back(p.id());
  // Canonical order first so the result does not depend on file order.
  std::sort(order.begin(), order.end());
  Rng rng(static_cast<std::uint64_t>(seed));
  shuffle_in_place(order, rng);
  SplitPlan plan = cut(std::move(order), SplitPolicy::random, ratios);
  plan.seed = seed;
  plan.audit = audit_leakage(plan, dataset);
  return plan;
}

SplitPlan temporal_split(const ProjectDataset& dataset, const Ratios& ratios) {
  validate_ratios(ratios);
  if (dataset.pairs.empty()) throw DataError("dataset '" + dataset.project + "' is empty");
  std::vector<const LinkPair*> sorted;
  sorted.reserve(dataset.pairs.size());
  for (const LinkPair& p : dataset.pairs) {
    if (p.pair_date == Date{}) throw DataError("pair " + p.id().to_string() + " has no pair_date");
    sorted.push_back(&p);
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const LinkPair* a, const LinkPair* b) {
    return std::tie(a->pair_date, a->issue_id, a->commit_sha) < std::tie(b->pair_date, b->issue_id, b->commit_sha);
  });
  std::vector<PairId> order;
  order.reserve(sorted.size());
  for (const LinkPair* p : sorted) order.push_back(p->id());
  SplitPlan plan = cut(std::move(order), SplitPolicy::temporal, ratios);
  plan.audit = audit_leakage(plan, dataset);
  if (!plan.audit.passed) {
    throw AuditError("temporal split of '" + dataset.project + "' failed the leakage audit");
  }
  return plan;
}

AuditReport audit_leakage(const SplitPlan& plan, const ProjectDataset& dataset) {
  const auto dates = date_index(dataset);
  auto date_of = [&](const PairId& id) {
    auto it = dates.find(id);
    if (it == dates.end()) throw DataError("split plan refers to unknown pair " + id.to_string());
    return it->second;
  };
  AuditReport report;
  report.policy = plan.policy;
  std::optional<Date> max_train;
  for (const auto* part : {&plan.train, &plan.val}) {
    for (const PairId& id : *part) {
      const Date d = date_of(id);
      if (!max_train || d > *max_train) max_train = d;
    }
  }
  if (max_train) {
    for (const PairId& id : plan.test) {
      if (date_of(id) < *max_train) report.leaked_pairs.push_back({id, *max_train});
    }
  } else {
    for (const PairId& id : plan.test) date_of(id);
  }
  report.passed = report.leaked_pairs.empty();
  return report;
}

std::vector<LinkPair> select_pairs(const ProjectDataset& dataset, const std::vector<PairId>& ids) {
  std::map<PairId, const LinkPair*> index;
  for (const LinkPair& p : dataset.pairs) index.emplace(p.id(), &p);
  std::vector<LinkPair> out;
  out.reserve(ids.size());
  for (const PairId& id : ids) {
    auto it = index.find(id);
    if (it == index.end()) throw DataError("split plan refers to unknown pair " + id.to_string());
    out.push_back(*it->second);
  }
  return out;
}

std::vector<Fold> project_folds(const std::vector<std::string>& projects, std::int64_t seed,
                                std::size_t fold_count) {
  if (fold_count < 2) throw UsageError("fold count must be at least 2");
  const std::set<std::string> unique(projects.begin(), projects.end());
  if (unique.size() != projects.size()) throw UsageError("project list contains duplicates");
  if (projects.empty() || projects.size() % fold_count != 0) {
    std::string hint;
    for (std::size_t k = 2; k <= projects.size(); ++k) {
      if (projects.size() % k == 0) hint += (hint.empty() ? "" : ", ") + std::to_string(k);
    }
    throw UsageError(std::to_string(projects.size()) + " projects cannot be divided into " +
                     std::to_string(fold_count) + " equal folds" +
                     (hint.empty() ? std::string() : "; try a fold count of " + hint));
  }
  std::vector<std::string> order(unique.begin(), unique.end());
  Rng rng(static_cast<std::uint64_t>(seed));
  shuffle_in_place(order, rng);
  const std::size_t per_fold = order.size() / fold_count;
  std::vector<Fold> folds(fold_count);
  for (std::size_t f = 0; f < fold_count; ++f) {
    folds[f].fold_index = f;
    for (std::size_t k = 0; k < order.size(); ++k) {
      (k / per_fold == f ? folds[f].test_projects : folds[f].train_projects).push_back(order[k]);
    }
    std::sort(folds[f].test_projects.begin(), folds[f].test_projects.end());
    std::sort(folds[f].train_projects.begin(), folds[f].train_projects.end());
  }
  return folds;
}

namespace {

Json ids_json(const std::vector<PairId>& ids) {
  Json arr = Json::array();
  for (const PairId& id : ids) {
    Json j;
    j["issue_id"] = id.issue_id;
    j["commit_sha"] = id.commit_sha;
    arr.push_back(std::move(j));
  }
  return arr;
}

std::vector<PairId> ids_from(const Json& arr, const std::string& field) {
  if (!arr.is_array()) throw SchemaError(0, field, "expected an array");
  std::vector<PairId> out;
  std::size_t k = 0;
  for (const Json& j : arr) {
    FieldReader r(j, 0, field + "[" + std::to_string(k++) + "].");
    out.push_back({r.string("issue_id"), r.string("commit_sha")});
  }
  return out;
}

}  // namespace

void write_split_plan(const SplitPlan& plan, const std::filesystem::path& path) {
  Json j;
  j["policy"] = to_string(plan.policy);
  j["ratios"] = Json::array({plan.ratios[0], plan.ratios[1], plan.ratios[2]});
  j["seed"] = plan.seed ? Json(*plan.seed) : Json(nullptr);
  j["train"] = ids_json(plan.train);
  j["val"] = ids_json(plan.val);
  j["test"] = ids_json(plan.test);
  Json audit;
  audit["policy"] = to_string(plan.audit.policy);
  audit["passed"] = plan.audit.passed;
  Json leaked = Json::array();
  for (const LeakedPair& l : plan.audit.leaked_pairs) {
    Json e;
    e["issue_id"] = l.test_pair.issue_id;
    e["commit_sha"] = l.test_pair.commit_sha;
    e["max_train_date"] = l.max_train_date.to_string();
    leaked.push_back(std::move(e));
  }
  audit["leaked_pairs"] = std::move(leaked);
  j["audit"] = std::move(audit);
  detail::write_text_file(path, detail::dump_pretty(j));
}

SplitPlan read_split_plan(const std::filesystem::path& path) {
  const Json j = detail::parse_json_file(path);
  FieldReader r(j, 0);
  SplitPlan plan;
  plan.policy = r.parse("policy", parse_split_policy);
  const Json& ratios = r.at("ratios");
  if (!ratios.is_array() || ratios.size() != 3) throw SchemaError(0, "ratios", "expected three numbers");
  for (std::size_t k = 0; k < 3; ++k) plan.ratios[k] = ratios.at(k).get<double>();
  plan.seed = r.optional_integer("seed");
  plan.train = ids_from(r.at("train"), "train");
  plan.val = ids_from(r.at("val"), "val");
  plan.test = ids_from(r.at("test"), "test");
  FieldReader ar = r.object("audit");
  plan.audit.policy = ar.parse("policy", parse_split_policy);
  plan.audit.passed = ar.at("passed").get<bool>();
  std::size_t k = 0;
  for (const Json& e : ar.at("leaked_pairs")) {
    FieldReader er(e, 0, "audit.leaked_pairs[" + std::to_string(k++) + "].");
    plan.audit.leaked_pairs.push_back(
        {{er.string("issue_id"), er.string("commit_sha")}, er.parse("max_train_date", Date::parse)});
  }
  return plan;
}

}  // namespace linkkit
