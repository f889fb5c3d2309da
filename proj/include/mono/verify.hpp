#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "mono/model.hpp"
#include "mono/monomlp.hpp"

namespace mono {

struct PropertyReport {
  std::string name;
  size_t samples = 0;
  size_t violations = 0;
  double worst_margin = 0.0;  // most negative margin observed
  std::string witness;        // seed/sample/inputs of the worst case, replayable
  bool pass = false;
  double tolerance = 0.0;
  std::vector<double> profile;  // attenuation only: |J_g| along the ray
};

struct VerificationReport {
  std::vector<PropertyReport> checks;
  bool all_pass() const {
    for (const auto& c : checks)
      if (!c.pass) return false;
    return true;
  }
};

// Order preservation of the lifted sublayer: s ~ U(-5,5)^p, delta ~ U(0,5)^p,
// h = Adag s, h' = Adag (s + delta); A F(h) <= A F(h') elementwise within
// 1e-12.
PropertyReport check_order_preservation(const RealizedFfn& ffn, size_t n_samples, uint64_t seed);

// min entry of J_T(s) = I + J_g(s) over sampled s is >= -1e-12.
PropertyReport check_jacobian_nonneg(const RealizedMlp& g, size_t n_samples, uint64_t seed);

// Saturated first-layer units stay saturated under delta >= 0. Samples mix
// scales so saturation actually occurs when the weights allow it.
PropertyReport check_persistence(const RealizedMlp& g, size_t n_samples, double tau,
                                 uint64_t seed);
PropertyReport check_persistence(const RealizedMlp& g, size_t n_samples, uint64_t seed);

// |J_g(k u)|_F profile for k = 0..k_max along a ray u >= 0: non-increasing
// beyond its peak; vanishes below 1e-6 when every first-layer row has a
// positive dot product with u (otherwise those units are reported as not
// applicable rather than failed).
PropertyReport check_attenuation(const RealizedMlp& g, const std::vector<double>& ray,
                                 size_t k_max);

// The pair test applied to the composition g(f(.)).
PropertyReport check_composition(const RealizedMlp& f, const RealizedMlp& g, size_t n_samples,
                                 uint64_t seed);

// Coordinatewise-monotone g attains its box range at the corners:
// g(lower) <= g(x) <= g(upper) for interior samples.
PropertyReport extreme_point_range(const RealizedMlp& g, const std::vector<double>& lower,
                                   const std::vector<double>& upper, size_t n_samples,
                                   uint64_t seed);

// Flips one realized weight to a negative value; the resulting map is a
// negative control that every check above must catch.
RealizedMlp inject_negative_weight(RealizedMlp g, size_t layer, size_t row, size_t col,
                                   double value = -0.8);

// Full battery over every feed-forward sublayer of a monotone checkpoint.
// `negative_control` injects a violation after realization, to prove the
// harness can fail.
VerificationReport verify_model(const ModelGraph& model, size_t order_samples,
                                size_t jacobian_samples, size_t persistence_samples,
                                uint64_t seed, bool negative_control = false);

void write_report_text(const VerificationReport& report, std::ostream& out);
void write_report_csv(const VerificationReport& report, const std::string& path);

}  // namespace mono
