#pragma once

#include <span>
#include <string>
#include <vector>

namespace eviscreen {

struct ScoredCase {
  std::string case_id;
  double score = 0.0;
  int label = 0;  // 0 negative (normal), 1 positive (pathological)
  std::string category;
};

struct MetricsReport {
  double auroc = 0.0;
  double ap = 0.0;
  double csr = 0.0;
  // (X, specificity) pairs in the requested order.
  std::vector<std::pair<double, double>> spe_at;
  std::size_t n_pos = 0;
  std::size_t n_neg = 0;

  double spe(double x) const;
};

/// Report over all cases plus one sub-report per category when the cases
/// carry category tags.
struct FullReport {
  MetricsReport overall;
  std::vector<std::pair<std::string, MetricsReport>> by_category;
};

/// Maximum specificity over all thresholds whose recall is at least
/// x_percent/100, with the rule "positive iff score >= threshold" and
/// candidate thresholds drawn from the observed scores.
double spe_at_recall(std::span<const ScoredCase> cases, double x_percent);

/// Fraction of cases scoring strictly below every positive or strictly
/// above every negative.
double csr(std::span<const ScoredCase> cases);

/// Probability that a random positive outscores a random negative, ties
/// counting half.
double auroc(std::span<const ScoredCase> cases);

/// Step-wise average precision with pessimistic tie handling (equal-score
/// negatives ranked before positives).
double average_precision(std::span<const ScoredCase> cases);

FullReport full_report(std::span<const ScoredCase> cases, std::span<const double> requested_x);

/// CSV with header case_id,score,label[,category].
std::vector<ScoredCase> load_scores_csv(const std::string& path);
void write_scores_csv(const std::string& path, std::span<const ScoredCase> cases);

void write_report_csv(const std::string& path, const FullReport& report);

/// Aligned text table, one metric per row: AUROC, AP, Spe@X%R rows in the
/// requested order, then CSR.
std::string render_report_table(const FullReport& report);

}  // namespace eviscreen
