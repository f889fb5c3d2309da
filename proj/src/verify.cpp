#include "mono/verify.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <ostream>
#include <sstream>

#include "mono/rng.hpp"

namespace mono {

namespace {

constexpr double kOrderTol = 1e-12;

std::string vec_str(const std::vector<double>& v) {
  std::ostringstream os;
  os.precision(17);
  for (size_t i = 0; i < v.size(); ++i) os << (i ? " " : "") << v[i];
  return os.str();
}

std::vector<double> sample_box(size_t n, Rng& rng, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.uniform(lo, hi);
  return v;
}

void note_violation(PropertyReport& rep, double margin, const std::string& witness) {
  ++rep.violations;
  if (margin < rep.worst_margin) {
    rep.worst_margin = margin;
    rep.witness = witness;
  }
}

}  // namespace

PropertyReport check_order_preservation(const RealizedFfn& ffn, size_t n_samples, uint64_t seed) {
  PropertyReport rep;
  rep.name = "order-preservation";
  rep.tolerance = kOrderTol;
  rep.samples = n_samples;
  const size_t p = ffn.order->p();
  Rng rng(seed);
  for (size_t t = 0; t < n_samples; ++t) {
    std::vector<double> s = sample_box(p, rng, -5.0, 5.0);
    std::vector<double> delta = sample_box(p, rng, 0.0, 5.0);
    if (t == 0) delta.assign(p, 0.0);  // boundary case rides along
    std::vector<double> s2 = s;
    for (size_t i = 0; i < p; ++i) s2[i] += delta[i];
    std::vector<double> fa = ffn.order->project(ffn.forward_row(ffn.order->lift(s)));
    std::vector<double> fb = ffn.order->project(ffn.forward_row(ffn.order->lift(s2)));
    double margin = 0.0;
    for (size_t i = 0; i < p; ++i) margin = std::min(margin, fb[i] - fa[i]);
    if (margin < -kOrderTol)
      note_violation(rep, margin,
                     strcat_msg("seed=", seed, " sample=", t, " s=[", vec_str(s), "] delta=[",
                                vec_str(delta), "]"));
  }
  rep.pass = rep.violations == 0;
  return rep;
}

PropertyReport check_jacobian_nonneg(const RealizedMlp& g, size_t n_samples, uint64_t seed) {
  PropertyReport rep;
  rep.name = "jacobian-nonnegativity";
  rep.tolerance = kOrderTol;
  rep.samples = n_samples;
  SemanticMap tmap(&g);
  const size_t p = g.in_width();
  Rng rng(seed);
  for (size_t t = 0; t < n_samples; ++t) {
    std::vector<double> s = sample_box(p, rng, -5.0, 5.0);
    Tensor j = tmap.jacobian(s);
    double margin = 0.0;
    for (double x : j.v) margin = std::min(margin, x);
    if (margin < -kOrderTol)
      note_violation(rep, margin,
                     strcat_msg("seed=", seed, " sample=", t, " s=[", vec_str(s), "]"));
  }
  rep.pass = rep.violations == 0;
  return rep;
}

PropertyReport check_persistence(const RealizedMlp& g, size_t n_samples, double tau,
                                 uint64_t seed) {
  PropertyReport rep;
  rep.name = "saturation-persistence";
  rep.tolerance = 0.0;
  const size_t p = g.in_width();
  Rng rng(seed);
  size_t with_saturation = 0;
  for (size_t t = 0; t < n_samples; ++t) {
    // Mixed scales so large pre-activations are actually reached.
    const double scale = t % 3 == 0 ? 1.0 : (t % 3 == 1 ? 5.0 : 25.0);
    std::vector<double> s = sample_box(p, rng, -5.0 * scale, 5.0 * scale);
    std::vector<double> delta = sample_box(p, rng, 0.0, 5.0 * scale);
    std::vector<double> s2 = s;
    for (size_t i = 0; i < p; ++i) s2[i] += delta[i];

    const std::vector<double> z0 = g.first_layer_preactivations(s);
    const std::vector<double> z1 = g.first_layer_preactivations(s2);
    bool any_saturated = false;
    for (size_t j = 0; j < z0.size(); ++j) {
      if (z0[j] < tau) continue;
      any_saturated = true;
      if (z1[j] < z0[j])
        note_violation(rep, z1[j] - z0[j],
                       strcat_msg("seed=", seed, " sample=", t, " unit=", j, " s=[", vec_str(s),
                                  "] delta=[", vec_str(delta), "]"));
    }
    if (any_saturated) ++with_saturation;
  }
  rep.samples = with_saturation;  // pairs where the lemma premise held
  rep.pass = rep.violations == 0;
  if (with_saturation == 0)
    rep.witness = "no sampled point reached the saturation threshold";
  return rep;
}

PropertyReport check_persistence(const RealizedMlp& g, size_t n_samples, uint64_t seed) {
  return check_persistence(g, n_samples, default_saturation_threshold(g.activation()), seed);
}

PropertyReport check_attenuation(const RealizedMlp& g, const std::vector<double>& ray,
                                 size_t k_max) {
  check(g.activation() != Activation::Relu,
        "check_attenuation: requires a saturating activation, got relu");
  check(ray.size() == g.in_width(), "check_attenuation: ray width mismatch");
  bool nonzero = false;
  for (double u : ray) {
    check(u >= 0.0, "check_attenuation: ray must be elementwise nonnegative");
    if (u > 0.0) nonzero = true;
  }
  check(nonzero, "check_attenuation: ray must be nonzero");

  PropertyReport rep;
  rep.name = "gradient-attenuation";
  rep.tolerance = 1e-6;
  rep.samples = k_max + 1;

  // Applicability: every first-layer row must push along the ray for the
  // whole-network norm to vanish; rows orthogonal to the ray keep their units
  // active and are reported, not failed.
  const auto& w1 = g.layers().front().w;
  size_t positive_rows = 0;
  for (size_t i = 0; i < w1.shape[0]; ++i) {
    double dot = 0.0;
    for (size_t j = 0; j < w1.shape[1]; ++j) dot += w1.at(i, j) * ray[j];
    if (dot > 0.0) ++positive_rows;
  }
  const bool applicable = positive_rows == w1.shape[0];

  for (size_t k = 0; k <= k_max; ++k) {
    std::vector<double> s(ray.size());
    for (size_t i = 0; i < s.size(); ++i) s[i] = double(k) * ray[i];
    rep.profile.push_back(frobenius_norm(g.jacobian(s)));
  }
  size_t peak = 0;
  for (size_t i = 1; i < rep.profile.size(); ++i)
    if (rep.profile[i] > rep.profile[peak]) peak = i;
  for (size_t i = peak + 1; i < rep.profile.size(); ++i)
    if (rep.profile[i] > rep.profile[i - 1] + 1e-15)
      note_violation(rep, rep.profile[i - 1] - rep.profile[i],
                     strcat_msg("norm rose at k=", i));
  if (applicable && rep.profile.back() >= 1e-6)
    note_violation(rep, 1e-6 - rep.profile.back(),
                   strcat_msg("final norm ", rep.profile.back(), " at k=", k_max));
  rep.pass = rep.violations == 0;
  if (!applicable)
    rep.witness = strcat_msg(positive_rows, "/", w1.shape[0],
                             " first-layer rows push along the ray; vanishing criterion "
                             "not applicable to the rest");
  return rep;
}

PropertyReport check_composition(const RealizedMlp& f, const RealizedMlp& g, size_t n_samples,
                                 uint64_t seed) {
  check(f.out_width() == g.in_width(), "check_composition: widths do not compose");
  PropertyReport rep;
  rep.name = "composition-closure";
  rep.tolerance = kOrderTol;
  rep.samples = n_samples;
  Rng rng(seed);
  const size_t p = f.in_width();
  for (size_t t = 0; t < n_samples; ++t) {
    std::vector<double> s = sample_box(p, rng, -5.0, 5.0);
    std::vector<double> delta = sample_box(p, rng, 0.0, 5.0);
    std::vector<double> s2 = s;
    for (size_t i = 0; i < p; ++i) s2[i] += delta[i];
    std::vector<double> a = g.forward(f.forward(s));
    std::vector<double> b = g.forward(f.forward(s2));
    double margin = 0.0;
    for (size_t i = 0; i < a.size(); ++i) margin = std::min(margin, b[i] - a[i]);
    if (margin < -kOrderTol)
      note_violation(rep, margin,
                     strcat_msg("seed=", seed, " sample=", t, " s=[", vec_str(s), "] delta=[",
                                vec_str(delta), "]"));
  }
  rep.pass = rep.violations == 0;
  return rep;
}

PropertyReport extreme_point_range(const RealizedMlp& g, const std::vector<double>& lower,
                                   const std::vector<double>& upper, size_t n_samples,
                                   uint64_t seed) {
  check(lower.size() == g.in_width() && upper.size() == g.in_width(),
        "extreme_point_range: box width mismatch");
  for (size_t i = 0; i < lower.size(); ++i)
    check(lower[i] <= upper[i], "extreme_point_range: lower exceeds upper at coordinate ", i);

  PropertyReport rep;
  rep.name = "extreme-point-range";
  rep.tolerance = kOrderTol;
  rep.samples = n_samples;
  const std::vector<double> g_lo = g.forward(lower);
  const std::vector<double> g_hi = g.forward(upper);
  Rng rng(seed);
  for (size_t t = 0; t < n_samples; ++t) {
    std::vector<double> x(lower.size());
    for (size_t i = 0; i < x.size(); ++i) x[i] = rng.uniform(lower[i], upper[i]);
    const std::vector<double> gx = g.forward(x);
    double margin = 0.0;
    for (size_t i = 0; i < gx.size(); ++i)
      margin = std::min({margin, gx[i] - g_lo[i], g_hi[i] - gx[i]});
    if (margin < -kOrderTol)
      note_violation(rep, margin,
                     strcat_msg("seed=", seed, " sample=", t, " x=[", vec_str(x), "]"));
  }
  rep.pass = rep.violations == 0;
  return rep;
}

RealizedMlp inject_negative_weight(RealizedMlp g, size_t layer, size_t row, size_t col,
                                   double value) {
  check(value < 0.0, "inject_negative_weight: value must be negative");
  check(layer < g.depth(), "inject_negative_weight: layer out of range");
  Tensor& w = g.layers()[layer].w;
  check(row < w.shape[0] && col < w.shape[1], "inject_negative_weight: index out of range");
  w.at(row, col) = value;
  return g;
}

VerificationReport verify_model(const ModelGraph& model, size_t order_samples,
                                size_t jacobian_samples, size_t persistence_samples,
                                uint64_t seed, bool negative_control) {
  check(model.config().ffn_mode == FfnMode::Monotone,
        "verify_model: checkpoint is not a monotone model");
  VerificationReport report;
  const size_t p = model.config().p_sem;
  Rng rng(seed);

  std::vector<RealizedMlp> gs;
  for (size_t i = 0; i < model.ffn_sublayer_count(); ++i) {
    RealizedFfn ffn = model.realized_ffn(i);
    if (negative_control && i == 0)
      ffn.g = inject_negative_weight(std::move(ffn.g), 0, 0, 0);
    gs.push_back(ffn.g);
    const std::string tag = strcat_msg("[ffn ", i, "] ");

    PropertyReport r1 = check_order_preservation(ffn, order_samples, seed + i);
    r1.name = tag + r1.name;
    report.checks.push_back(std::move(r1));

    PropertyReport r2 = check_jacobian_nonneg(ffn.g, jacobian_samples, seed + i);
    r2.name = tag + r2.name;
    report.checks.push_back(std::move(r2));

    if (ffn.g.activation() != Activation::Relu) {
      PropertyReport r3 = check_persistence(ffn.g, persistence_samples, seed + i);
      r3.name = tag + r3.name;
      report.checks.push_back(std::move(r3));

      Rng ray_rng = rng.split("ray", i);
      std::vector<double> ray(p);
      for (double& u : ray) u = ray_rng.uniform(0.1, 1.0);
      PropertyReport r4 = check_attenuation(ffn.g, ray, 50);
      r4.name = tag + r4.name;
      report.checks.push_back(std::move(r4));
    }

    PropertyReport r5 = extreme_point_range(ffn.g, std::vector<double>(p, -3.0),
                                            std::vector<double>(p, 3.0), 1000, seed + i);
    r5.name = tag + r5.name;
    report.checks.push_back(std::move(r5));
  }

  if (gs.size() >= 2) {
    PropertyReport rc = check_composition(gs[0], gs[1], order_samples, seed + 101);
    rc.name = "[ffn 0 -> ffn 1] " + rc.name;
    report.checks.push_back(std::move(rc));
  }
  return report;
}

void write_report_text(const VerificationReport& report, std::ostream& out) {
  for (const auto& c : report.checks) {
    out << (c.pass ? "[PASS] " : "[FAIL] ") << c.name << ": samples=" << c.samples
        << " violations=" << c.violations << " tolerance=" << c.tolerance;
    if (!c.pass) out << " worst_margin=" << c.worst_margin;
    if (!c.witness.empty()) out << "\n        " << (c.pass ? "note: " : "witness: ") << c.witness;
    out << "\n";
  }
  out << (report.all_pass() ? "VERIFICATION PASSED" : "VERIFICATION FAILED") << " ("
      << report.checks.size() << " checks)\n";
}

void write_report_csv(const VerificationReport& report, const std::string& path) {
  std::ofstream out(path);
  check(out.good(), "verification csv: cannot write ", path);
  out << "name,samples,violations,tolerance,worst_margin,pass\n";
  for (const auto& c : report.checks) {
    std::string name = c.name;
    for (char& ch : name)
      if (ch == ',') ch = ';';
    char buf[128];
    std::snprintf(buf, sizeof buf, ",%zu,%zu,%.3g,%.17g,%d\n", c.samples, c.violations,
                  c.tolerance, c.worst_margin, c.pass ? 1 : 0);
    out << name << buf;
  }
  check(out.good(), "verification csv: write failed for ", path);
}

}  // namespace mono
