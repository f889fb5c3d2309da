#include "mono/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <map>

#include "mono/attacks.hpp"
#include "mono/common.hpp"
#include "mono/rng.hpp"

namespace mono {

std::vector<std::string> rouge_tokenize(const std::string& text) {
  std::vector<std::string> toks;
  std::string cur;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) toks.push_back(cur);
      cur.clear();
    } else {
      cur += char(std::tolower(static_cast<unsigned char>(c)));
    }
  }
  if (!cur.empty()) toks.push_back(cur);
  return toks;
}

static Prf prf_from_counts(double overlap, double cand_total, double ref_total) {
  Prf s;
  s.precision = cand_total > 0 ? overlap / cand_total : 0.0;
  s.recall = ref_total > 0 ? overlap / ref_total : 0.0;
  s.f1 = (s.precision + s.recall) > 0.0
             ? 2.0 * s.precision * s.recall / (s.precision + s.recall)
             : 0.0;
  return s;
}

Prf rouge_n(const std::vector<std::string>& candidate, const std::vector<std::string>& reference,
            size_t n) {
  check(n >= 1, "rouge_n: n must be >= 1");
  auto grams = [&](const std::vector<std::string>& toks) {
    std::map<std::string, size_t> counts;
    if (toks.size() >= n)
      for (size_t i = 0; i + n <= toks.size(); ++i) {
        std::string key;
        for (size_t k = 0; k < n; ++k) {
          key += toks[i + k];
          key += '\x1f';
        }
        ++counts[key];
      }
    return counts;
  };
  const auto cg = grams(candidate), rg = grams(reference);
  double overlap = 0.0, cand_total = 0.0, ref_total = 0.0;
  for (const auto& [k, c] : cg) cand_total += double(c);
  for (const auto& [k, c] : rg) ref_total += double(c);
  for (const auto& [k, c] : cg) {
    auto it = rg.find(k);
    if (it != rg.end()) overlap += double(std::min(c, it->second));
  }
  return prf_from_counts(overlap, cand_total, ref_total);
}

Prf rouge_l(const std::vector<std::string>& candidate,
            const std::vector<std::string>& reference) {
  const size_t nc = candidate.size(), nr = reference.size();
  if (nc == 0 || nr == 0) return {};
  std::vector<size_t> prev(nr + 1, 0), cur(nr + 1, 0);
  for (size_t i = 1; i <= nc; ++i) {
    for (size_t j = 1; j <= nr; ++j) {
      if (candidate[i - 1] == reference[j - 1])
        cur[j] = prev[j - 1] + 1;
      else
        cur[j] = std::max(prev[j], cur[j - 1]);
    }
    std::swap(prev, cur);
  }
  const double lcs = double(prev[nr]);
  return prf_from_counts(lcs, double(nc), double(nr));
}

RougeScores rouge_all(const std::string& candidate_text, const std::string& reference_text) {
  const auto c = rouge_tokenize(candidate_text);
  const auto r = rouge_tokenize(reference_text);
  RougeScores s;
  s.rouge1 = rouge_n(c, r, 1);
  s.rouge2 = rouge_n(c, r, 2);
  s.rougeL = rouge_l(c, r);
  return s;
}

std::pair<double, double> bootstrap_ci(const std::vector<double>& values, size_t resamples,
                                       double level, uint64_t seed) {
  check(values.size() >= 2, "bootstrap_ci: need at least 2 values, got ", values.size());
  check(resamples >= 1 && level > 0.0 && level < 1.0, "bootstrap_ci: bad parameters");
  Rng rng(seed);
  std::vector<double> means(resamples);
  const size_t n = values.size();
  for (size_t r = 0; r < resamples; ++r) {
    double acc = 0.0;
    for (size_t i = 0; i < n; ++i) acc += values[rng.below(n)];
    means[r] = acc / double(n);
  }
  std::sort(means.begin(), means.end());
  const double alpha = (1.0 - level) / 2.0;
  const size_t lo_idx = size_t(alpha * double(resamples - 1) + 0.5);
  const size_t hi_idx = size_t((1.0 - alpha) * double(resamples - 1) + 0.5);
  return {means[lo_idx], means[hi_idx]};
}

// Regularized incomplete beta by Lentz's continued fraction.
static double betacf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 3e-16, kFpMin = 1e-300;
  const double qab = a + b, qap = a + 1.0, qam = a - 1.0;
  double c = 1.0, d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kFpMin) d = kFpMin;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kFpMin) d = kFpMin;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kFpMin) c = kFpMin;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

static double reg_inc_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log(1.0 - x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
  return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

double student_t_two_sided_p(double t, double df) {
  check(df > 0.0, "student_t_two_sided_p: df must be positive");
  if (std::isinf(t)) return 0.0;
  const double x = df / (df + t * t);
  return reg_inc_beta(df / 2.0, 0.5, x);
}

double bonferroni_adjust(double p, size_t comparisons) {
  check(comparisons >= 1, "bonferroni_adjust: need at least one comparison");
  return std::min(1.0, p * double(comparisons));
}

static TTest finish_paired(const std::vector<double>& diff) {
  const size_t n = diff.size();
  TTest r;
  r.n = n;
  r.df = double(n - 1);
  double mean = 0.0;
  for (double d : diff) mean += d;
  mean /= double(n);
  double var = 0.0;
  for (double d : diff) var += (d - mean) * (d - mean);
  var /= double(n - 1);
  if (var == 0.0) {
    r.degenerate = true;
    if (mean == 0.0) return r;  // identical samples: t = 0, p = 1, d = 0
    r.t = mean > 0.0 ? INFINITY : -INFINITY;
    r.cohen_d = r.t;
    r.p = 0.0;
    return r;
  }
  const double sd = std::sqrt(var);
  r.t = mean / (sd / std::sqrt(double(n)));
  r.cohen_d = mean / sd;
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

TTest paired_t(const std::vector<double>& x, const std::vector<double>& y) {
  check(x.size() == y.size(), "paired_t: samples differ in length");
  check(x.size() >= 2, "paired_t: need at least 2 pairs");
  std::vector<double> diff(x.size());
  for (size_t i = 0; i < x.size(); ++i) diff[i] = x[i] - y[i];
  return finish_paired(diff);
}

TTest independent_t(const std::vector<double>& x, const std::vector<double>& y) {
  check(x.size() >= 2 && y.size() >= 2, "independent_t: need at least 2 values per sample");
  auto stats = [](const std::vector<double>& v) {
    double m = 0.0;
    for (double a : v) m += a;
    m /= double(v.size());
    double var = 0.0;
    for (double a : v) var += (a - m) * (a - m);
    var /= double(v.size() - 1);
    return std::pair<double, double>(m, var);
  };
  const auto [mx, vx] = stats(x);
  const auto [my, vy] = stats(y);
  const double nx = double(x.size()), ny = double(y.size());
  TTest r;
  r.n = x.size() + y.size();
  const double se2 = vx / nx + vy / ny;
  if (se2 == 0.0) {
    r.degenerate = true;
    if (mx == my) return r;
    r.t = mx > my ? INFINITY : -INFINITY;
    r.cohen_d = r.t;
    r.p = 0.0;
    return r;
  }
  r.t = (mx - my) / std::sqrt(se2);
  r.df = se2 * se2 /
         ((vx / nx) * (vx / nx) / (nx - 1.0) + (vy / ny) * (vy / ny) / (ny - 1.0));
  const double pooled =
      std::sqrt(((nx - 1.0) * vx + (ny - 1.0) * vy) / (nx + ny - 2.0));
  r.cohen_d = pooled > 0.0 ? (mx - my) / pooled : 0.0;
  r.p = student_t_two_sided_p(r.t, r.df);
  return r;
}

StatSummary summarize_mean(const std::vector<double>& values, size_t resamples, uint64_t seed) {
  StatSummary s;
  s.n = values.size();
  for (double v : values) s.mean += v;
  if (s.n) s.mean /= double(s.n);
  if (s.n >= 2) {
    auto [lo, hi] = bootstrap_ci(values, resamples, 0.95, seed);
    s.lo = lo;
    s.hi = hi;
  } else {
    s.lo = s.hi = s.mean;
  }
  return s;
}

RobustnessSummary robustness_summary(const std::vector<AttackOutcome>& outcomes,
                                     double threshold, uint64_t seed) {
  check(!outcomes.empty(), "robustness_summary: no outcomes");
  RobustnessSummary s;
  s.threshold = threshold;
  s.n = outcomes.size();
  std::vector<double> degr, dloss;
  size_t successes = 0;
  for (const auto& o : outcomes) {
    degr.push_back(o.loss_degradation());
    dloss.push_back(o.attacked_loss - o.clean_loss);
    if (o.loss_degradation() > threshold) ++successes;
  }
  s.degradation = summarize_mean(degr, 1000, seed);
  s.delta_loss = summarize_mean(dloss, 1000, seed + 1);
  s.success_rate = double(successes) / double(outcomes.size());
  return s;
}

void write_attack_report_csv(const std::vector<AttackOutcome>& outcomes,
                             const RobustnessSummary& summary, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "attack report: cannot write ", path);
  out << "id,clean_loss,attacked_loss,degradation,success\n";
  char buf[256];
  for (const auto& o : outcomes) {
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%d\n", o.example_id, o.clean_loss,
                  o.attacked_loss, o.loss_degradation(),
                  o.loss_degradation() > summary.threshold ? 1 : 0);
    out << buf;
  }
  out << "# summary\n";
  std::snprintf(buf, sizeof buf, "# n,%zu\n# threshold,%.4g\n", summary.n, summary.threshold);
  out << buf;
  std::snprintf(buf, sizeof buf, "# mean_degradation,%.6g,ci95,%.6g,%.6g\n",
                summary.degradation.mean, summary.degradation.lo, summary.degradation.hi);
  out << buf;
  std::snprintf(buf, sizeof buf, "# mean_delta_loss,%.6g,ci95,%.6g,%.6g\n",
                summary.delta_loss.mean, summary.delta_loss.lo, summary.delta_loss.hi);
  out << buf;
  std::snprintf(buf, sizeof buf, "# success_rate,%.6g\n", summary.success_rate);
  out << buf;
  check(out.good(), "attack report: write failed for ", path);
}

}  // namespace mono
