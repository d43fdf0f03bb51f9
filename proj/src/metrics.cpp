#include "eviscreen/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>

#include "eviscreen/error.hpp"

namespace eviscreen {

namespace {

struct ClassCounts {
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;
};

ClassCounts require_both_classes(std::span<const ScoredCase> cases, const char* metric) {
  ClassCounts c;
  for (const auto& sc : cases) {
    if (!std::isfinite(sc.score)) {
      throw MetricError(std::string(metric) + ": non-finite score for case " + sc.case_id);
    }
    if (sc.label == 1) {
      ++c.n_pos;
    } else if (sc.label == 0) {
      ++c.n_neg;
    } else {
      throw MetricError(std::string(metric) + ": label must be 0 or 1, got " +
                        std::to_string(sc.label));
    }
  }
  if (c.n_pos == 0 || c.n_neg == 0) {
    throw MetricError(std::string(metric) + " requires both classes, got " +
                      std::to_string(c.n_pos) + " positive / " + std::to_string(c.n_neg) +
                      " negative");
  }
  return c;
}

std::string format_value(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

double MetricsReport::spe(double x) const {
  for (const auto& [rx, v] : spe_at) {
    if (rx == x) return v;
  }
  throw MetricError("Spe@" + std::to_string(x) + "%R was not requested in this report");
}

double spe_at_recall(std::span<const ScoredCase> cases, double x_percent) {
  if (!(x_percent > 0.0 && x_percent <= 100.0)) {
    throw MetricError("recall target must lie in (0,100], got " + std::to_string(x_percent));
  }
  const auto counts = require_both_classes(cases, "spe_at_recall");

  // Sorted distinct scores; sweeping tau over them visits every attainable
  // (recall, specificity) pair for the rule "positive iff s >= tau".
  std::vector<double> taus;
  taus.reserve(cases.size());
  for (const auto& sc : cases) taus.push_back(sc.score);
  std::sort(taus.begin(), taus.end());
  taus.erase(std::unique(taus.begin(), taus.end()), taus.end());

  const double min_recall = x_percent / 100.0;
  double best = -1.0;
  for (double tau : taus) {
    std::size_t tp = 0;
    std::size_t tn = 0;
    for (const auto& sc : cases) {
      if (sc.label == 1 && sc.score >= tau) ++tp;
      if (sc.label == 0 && sc.score < tau) ++tn;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(counts.n_pos);
    if (recall >= min_recall) {
      best = std::max(best, static_cast<double>(tn) / static_cast<double>(counts.n_neg));
    }
  }
  // tau = min score always yields recall 1, so the sweep cannot come back
  // empty for any x_percent <= 100.
  return best;
}

double csr(std::span<const ScoredCase> cases) {
  require_both_classes(cases, "csr");
  double min_pos = std::numeric_limits<double>::infinity();
  double max_neg = -std::numeric_limits<double>::infinity();
  for (const auto& sc : cases) {
    if (sc.label == 1) min_pos = std::min(min_pos, sc.score);
    if (sc.label == 0) max_neg = std::max(max_neg, sc.score);
  }
  std::size_t clear = 0;
  for (const auto& sc : cases) {
    if (sc.score < min_pos) ++clear;
    if (sc.score > max_neg) ++clear;
  }
  return static_cast<double>(clear) / static_cast<double>(cases.size());
}

double auroc(std::span<const ScoredCase> cases) {
  const auto counts = require_both_classes(cases, "auroc");

  // Rank-sum form of the pairwise win count; average ranks handle ties
  // exactly (half-integer arithmetic below 2^53 stays lossless).
  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(cases.size());
  for (const auto& sc : cases) sorted.emplace_back(sc.score, sc.label);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });

  double rank_sum_pos = 0.0;
  std::size_t i = 0;
  while (i < sorted.size()) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j].first == sorted[i].first) ++j;
    const double avg_rank = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) {
      if (sorted[t].second == 1) rank_sum_pos += avg_rank;
    }
    i = j;
  }
  const double n_pos = static_cast<double>(counts.n_pos);
  const double n_neg = static_cast<double>(counts.n_neg);
  const double u = rank_sum_pos - n_pos * (n_pos + 1.0) / 2.0;
  return u / (n_pos * n_neg);
}

double average_precision(std::span<const ScoredCase> cases) {
  const auto counts = require_both_classes(cases, "average_precision");

  std::vector<std::pair<double, int>> sorted;
  sorted.reserve(cases.size());
  for (const auto& sc : cases) sorted.emplace_back(sc.score, sc.label);
  // Descending score; negatives first among equals (pessimistic ties).
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });

  double ap = 0.0;
  std::size_t tp = 0;
  for (std::size_t rank = 0; rank < sorted.size(); ++rank) {
    if (sorted[rank].second == 1) {
      ++tp;
      ap += static_cast<double>(tp) / static_cast<double>(rank + 1);
    }
  }
  return ap / static_cast<double>(counts.n_pos);
}

namespace {

MetricsReport report_for(std::span<const ScoredCase> cases, std::span<const double> requested_x) {
  MetricsReport r;
  const auto counts = require_both_classes(cases, "full_report");
  r.n_pos = counts.n_pos;
  r.n_neg = counts.n_neg;
  r.auroc = auroc(cases);
  r.ap = average_precision(cases);
  r.csr = csr(cases);
  for (double x : requested_x) r.spe_at.emplace_back(x, spe_at_recall(cases, x));
  return r;
}

}  // namespace

FullReport full_report(std::span<const ScoredCase> cases, std::span<const double> requested_x) {
  FullReport report;
  report.overall = report_for(cases, requested_x);

  bool has_categories = false;
  for (const auto& sc : cases) {
    if (!sc.category.empty()) {
      has_categories = true;
      break;
    }
  }
  if (has_categories) {
    std::map<std::string, std::vector<ScoredCase>> groups;
    std::vector<ScoredCase> negatives;
    for (const auto& sc : cases) {
      if (sc.label == 0) {
        negatives.push_back(sc);
      } else {
        groups[sc.category.empty() ? "(uncategorized)" : sc.category].push_back(sc);
      }
    }
    // Each category is scored against the full negative pool, mirroring
    // per-abnormality screening breakdowns.
    for (auto& [name, positives] : groups) {
      std::vector<ScoredCase> subset = negatives;
      subset.insert(subset.end(), positives.begin(), positives.end());
      report.by_category.emplace_back(name, report_for(subset, requested_x));
    }
  }
  return report;
}

std::vector<ScoredCase> load_scores_csv(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open scores file " + path);

  std::string line;
  if (!std::getline(is, line)) throw FormatError(path + ": empty scores file");
  while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
  bool with_category = false;
  if (line == "case_id,score,label") {
    with_category = false;
  } else if (line == "case_id,score,label,category") {
    with_category = true;
  } else {
    throw FormatError(path + ": unexpected header \"" + line + "\"");
  }

  std::vector<ScoredCase> cases;
  std::size_t line_no = 1;
  while (std::getline(is, line)) {
    ++line_no;
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) line.pop_back();
    if (line.empty()) continue;
    std::stringstream ss(line);
    ScoredCase sc;
    std::string field;
    if (!std::getline(ss, sc.case_id, ',')) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": missing case_id");
    }
    if (!std::getline(ss, field, ',')) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": missing score");
    }
    try {
      sc.score = std::stod(field);
    } catch (const std::exception&) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad score \"" + field + "\"");
    }
    if (!std::getline(ss, field, ',')) {
      throw FormatError(path + ":" + std::to_string(line_no) + ": missing label");
    }
    if (field == "0") {
      sc.label = 0;
    } else if (field == "1") {
      sc.label = 1;
    } else {
      throw FormatError(path + ":" + std::to_string(line_no) + ": bad label \"" + field + "\"");
    }
    if (with_category) std::getline(ss, sc.category, ',');
    cases.push_back(std::move(sc));
  }
  return cases;
}

void write_scores_csv(const std::string& path, std::span<const ScoredCase> cases) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  bool with_category = false;
  for (const auto& sc : cases) with_category |= !sc.category.empty();
  os << "case_id,score,label" << (with_category ? ",category" : "") << '\n';
  for (const auto& sc : cases) {
    os << sc.case_id << ',' << format_value(sc.score) << ',' << sc.label;
    if (with_category) os << ',' << sc.category;
    os << '\n';
  }
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

namespace {

void write_report_rows(std::ostream& os, const std::string& scope, const MetricsReport& r) {
  os << scope << ",AUROC," << format_value(r.auroc) << '\n';
  os << scope << ",AP," << format_value(r.ap) << '\n';
  for (const auto& [x, v] : r.spe_at) {
    os << scope << ",Spe@" << format_value(x) << "%R," << format_value(v) << '\n';
  }
  os << scope << ",CSR," << format_value(r.csr) << '\n';
}

}  // namespace

void write_report_csv(const std::string& path, const FullReport& report) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot open " + path + " for writing");
  os << "scope,metric,value\n";
  write_report_rows(os, "overall", report.overall);
  for (const auto& [name, r] : report.by_category) write_report_rows(os, name, r);
  os.flush();
  if (!os) throw IoError("write failed for " + path);
}

std::string render_report_table(const FullReport& report) {
  std::vector<std::string> metric_names{"AUROC", "AP"};
  for (const auto& [x, v] : report.overall.spe_at) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "Spe@%g%%R", x);
    metric_names.push_back(buf);
  }
  metric_names.push_back("CSR");

  const auto values_of = [](const MetricsReport& r) {
    std::vector<double> v{r.auroc, r.ap};
    for (const auto& [x, s] : r.spe_at) v.push_back(s);
    v.push_back(r.csr);
    return v;
  };

  std::vector<std::pair<std::string, std::vector<double>>> columns;
  columns.emplace_back("overall", values_of(report.overall));
  for (const auto& [name, r] : report.by_category) columns.emplace_back(name, values_of(r));

  std::size_t name_width = 6;
  for (const auto& m : metric_names) name_width = std::max(name_width, m.size());

  std::ostringstream os;
  os << std::string(name_width, ' ');
  for (const auto& [name, v] : columns) {
    os << "  " << name;
    if (name.size() < 8) os << std::string(8 - name.size(), ' ');
  }
  os << '\n';
  for (std::size_t row = 0; row < metric_names.size(); ++row) {
    os << metric_names[row] << std::string(name_width - metric_names[row].size(), ' ');
    for (const auto& [name, v] : columns) {
      char buf[32];
      std::snprintf(buf, sizeof(buf), "  %8.4f", v[row]);
      os << buf;
      if (name.size() > 8) os << std::string(name.size() - 8, ' ');
    }
    os << '\n';
  }
  return os.str();
}

}  // namespace eviscreen
