#pragma once

// Confusion counts, precision/recall/F1, cross-project aggregates and
// report rendering.

#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "linkkit/corpus.hpp"

namespace linkkit {

struct ConfusionCounts {
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;

  std::size_t total() const { return tp + fp + tn + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

struct Metrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Zero denominators yield 0 for the affected metric.
Metrics metrics_from_counts(const ConfusionCounts& c);

/// F1 as the harmonic mean of P and R (0 when P + R = 0).
double f1_score(double precision, double recall);

struct Evaluation {
  ConfusionCounts counts;
  Metrics metrics;
};

/// Throws DataError on length mismatch or empty input.
Evaluation compute_metrics(std::span<const Label> labels, std::span<const Label> predictions);

struct Aggregate {
  Metrics mean;
  /// Population standard deviation.
  Metrics std;
};

Aggregate aggregate(const std::map<std::string, Metrics>& per_project);

struct ProjectResult {
  std::string project;
  ConfusionCounts counts;
  Metrics metrics;
};

/// Per-project rows keyed by project name.
struct MetricsReport {
  std::vector<ProjectResult> rows;

  std::map<std::string, Metrics> metrics_by_project() const;
};

enum class ReportFormat { csv, markdown };

ReportFormat parse_report_format(std::string_view s);

/// Rows sorted by project, then mean and standard-deviation rows (omitted
/// when there are no projects). Numbers carry four decimals.
std::string render_report(const MetricsReport& report, ReportFormat format);
void write_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path);

/// Reads back the per-project rows of a CSV report.
MetricsReport parse_csv_report(std::string_view text);

}  // namespace linkkit
