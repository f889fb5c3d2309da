#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace mono {

struct AttackOutcome;  // attacks.hpp

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

struct RougeScores {
  Prf rouge1, rouge2, rougeL;
};

// Lowercased whitespace tokens; no stemming.
std::vector<std::string> rouge_tokenize(const std::string& text);

// Clipped n-gram overlap: each reference n-gram is matched at most as often
// as it occurs in the reference.
Prf rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            size_t n);
// Longest common subsequence variant.
Prf rouge_l(const std::vector<std::string>& candidate, const std::vector<std::string>& reference);

RougeScores rouge_all(const std::string& candidate_text, const std::string& reference_text);

// Percentile bootstrap over resampled means, deterministic per seed.
std::pair<double, double> bootstrap_ci(const std::vector<double>& values, size_t resamples = 1000,
                                       double level = 0.95, uint64_t seed = 42);

struct TTest {
  double t = 0.0;
  double p = 1.0;
  double cohen_d = 0.0;
  double df = 0.0;
  size_t n = 0;
  bool degenerate = false;  // zero difference variance
};

// Paired two-sided t test; d = mean(diff) / sd(diff). Zero-variance input
// degenerates to t = 0 (all-equal) or an infinite sentinel with p = 0.
TTest paired_t(const std::vector<double>& x, const std::vector<double>& y);
// Welch's unequal-variance test; d uses the pooled standard deviation.
TTest independent_t(const std::vector<double>& x, const std::vector<double>& y);

// Two-sided p for a Student-t statistic via the regularized incomplete beta.
double student_t_two_sided_p(double t, double df);

// Bonferroni correction for m comparisons: min(1, p * m).
double bonferroni_adjust(double p, size_t comparisons);

struct StatSummary {
  double mean = 0.0;
  double lo = 0.0;
  double hi = 0.0;
  size_t n = 0;
};

StatSummary summarize_mean(const std::vector<double>& values, size_t resamples = 1000,
                           uint64_t seed = 42);

struct RobustnessSummary {
  StatSummary degradation;  // relative loss increase
  StatSummary delta_loss;   // absolute loss increase
  double success_rate = 0.0;
  double threshold = 0.10;
  size_t n = 0;
};

// Average degradation, success rate at the threshold, and mean loss increase
// with bootstrap intervals.
RobustnessSummary robustness_summary(const std::vector<AttackOutcome>& outcomes,
                                     double threshold = 0.10, uint64_t seed = 42);

// Per-example rows plus a trailing summary block.
void write_attack_report_csv(const std::vector<AttackOutcome>& outcomes,
                             const RobustnessSummary& summary, const std::string& path);

}  // namespace mono
