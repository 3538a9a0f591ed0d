#include "linkkit/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json_util.hpp"
#include "linkkit/error.hpp"

namespace linkkit {

double f1_score(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

Metrics metrics_from_counts(const ConfusionCounts& c) {
  Metrics m;
  m.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  m.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

Evaluation compute_metrics(std::span<const Label> labels, std::span<const Label> predictions) {
  if (labels.size() != predictions.size()) {
    throw DataError("label/prediction length mismatch: " + std::to_string(labels.size()) + " vs " +
                    std::to_string(predictions.size()));
  }
  if (labels.empty()) throw DataError("cannot compute metrics over zero pairs");
  Evaluation e;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool truth = labels[i] == Label::true_link;
    const bool pred = predictions[i] == Label::true_link;
    if (truth && pred) ++e.counts.tp;
    else if (!truth && pred) ++e.counts.fp;
    else if (!truth && !pred) ++e.counts.tn;
    else ++e.counts.fn;
  }
  e.metrics = metrics_from_counts(e.counts);
  return e;
}

Aggregate aggregate(const std::map<std::string, Metrics>& per_project) {
  Aggregate a;
  if (per_project.empty()) return a;
  const double n = static_cast<double>(per_project.size());
  for (const auto& [_, m] : per_project) {
    a.mean.precision += m.precision / n;
    a.mean.recall += m.recall / n;
    a.mean.f1 += m.f1 / n;
  }
  for (const auto& [_, m] : per_project) {
    a.std.precision += (m.precision - a.mean.precision) * (m.precision - a.mean.precision) / n;
    a.std.recall += (m.recall - a.mean.recall) * (m.recall - a.mean.recall) / n;
    a.std.f1 += (m.f1 - a.mean.f1) * (m.f1 - a.mean.f1) / n;
  }
  a.std.precision = std::sqrt(a.std.precision);
  a.std.recall = std::sqrt(a.std.recall);
  a.std.f1 = std::sqrt(a.std.f1);
  return a;
}

std::map<std::string, Metrics> MetricsReport::metrics_by_project() const {
  std::map<std::string, Metrics> out;
  for (const ProjectResult& r : rows) out[r.project] = r.metrics;
  return out;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "csv") return ReportFormat::csv;
  if (s == "markdown" || s == "md") return ReportFormat::markdown;
  throw UsageError("unknown report format '" + std::string(s) + "'");
}

namespace {

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  // Avoid a "-0.0000" row for tiny negative rounding noise.
  if (std::string(buf) == "-0.0000") return "0.0000";
  return buf;
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '|') out += '\\';
    out += c;
  }
  return out;
}

}  // namespace

std::string render_report(const MetricsReport& report, ReportFormat format) {
  std::vector<ProjectResult> rows = report.rows;
  std::sort(rows.begin(), rows.end(), [](const ProjectResult& a, const ProjectResult& b) { return a.project < b.project; });
  const Aggregate agg = aggregate(report.metrics_by_project());

  std::string out;
  if (format == ReportFormat::csv) {
    out += "project,tp,fp,tn,fn,precision,recall,f1\n";
    for (const ProjectResult& r : rows) {
      out += csv_field(r.project) + "," + std::to_string(r.counts.tp) + "," + std::to_string(r.counts.fp) + "," +
             std::to_string(r.counts.tn) + "," + std::to_string(r.counts.fn) + "," + fixed4(r.metrics.precision) +
             "," + fixed4(r.metrics.recall) + "," + fixed4(r.metrics.f1) + "\n";
    }
    if (!rows.empty()) {
      out += "__mean__,,,,," + fixed4(agg.mean.precision) + "," + fixed4(agg.mean.recall) + "," +
             fixed4(agg.mean.f1) + "\n";
      out += "__std__,,,,," + fixed4(agg.std.precision) + "," + fixed4(agg.std.recall) + "," + fixed4(agg.std.f1) +
             "\n";
    }
    return out;
  }
  out += "| Project | TP | FP | TN | FN | Precision | Recall | F1 |\n";
  out += "|---|---:|---:|---:|---:|---:|---:|---:|\n";
  for (const ProjectResult& r : rows) {
    out += "| " + md_cell(r.project) + " | " + std::to_string(r.counts.tp) + " | " + std::to_string(r.counts.fp) +
           " | " + std::to_string(r.counts.tn) + " | " + std::to_string(r.counts.fn) + " | " +
           fixed4(r.metrics.precision) + " | " + fixed4(r.metrics.recall) + " | " + fixed4(r.metrics.f1) + " |\n";
  }
  if (!rows.empty()) {
    out += "| Average score |  |  |  |  | " + fixed4(agg.mean.precision) + " | " + fixed4(agg.mean.recall) + " | " +
           fixed4(agg.mean.f1) + " |\n";
    out += "| Standard deviation |  |  |  |  | " + fixed4(agg.std.precision) + " | " + fixed4(agg.std.recall) +
           " | " + fixed4(agg.std.f1) + " |\n";
  }
  return out;
}

void write_report(const MetricsReport& report, ReportFormat format, const std::filesystem::path& path) {
  detail::write_text_file(path, render_report(report, format));
}

MetricsReport parse_csv_report(std::string_view text) {
  MetricsReport report;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    if (++lineno == 1 || line.empty()) continue;
    std::vector<std::string> cells;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quoted) {
        if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else if (c == '"') {
          quoted = false;
        } else {
          cell += c;
        }
      } else if (c == '"') {
        quoted = true;
      } else if (c == ',') {
        cells.push_back(std::move(cell));
        cell.clear();
      } else {
        cell += c;
      }
    }
    cells.push_back(std::move(cell));
    if (cells.size() != 8) throw DataError("report line " + std::to_string(lineno) + ": expected 8 columns");
    if (cells[0] == "__mean__" || cells[0] == "__std__") continue;
    try {
      ProjectResult r;
      r.project = cells[0];
      r.counts = {std::stoul(cells[1]), std::stoul(cells[2]), std::stoul(cells[3]), std::stoul(cells[4])};
      r.metrics = {std::stod(cells[5]), std::stod(cells[6]), std::stod(cells[7])};
      report.rows.push_back(std::move(r));
    } catch (const std::exception&) {
      throw DataError("report line " + std::to_string(lineno) + ": malformed number");
    }
  }
  return report;
}

}  // namespace linkkit
