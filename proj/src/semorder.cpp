#include "mono/semorder.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "mono/linalg.hpp"

namespace mono {

SemanticOrder SemanticOrder::identity(size_t d) {
  check(d >= 1, "identity order: d must be >= 1, got 0");
  Tensor a = Tensor::zeros({d, d});
  for (size_t i = 0; i < d; ++i) a.v[i * d + i] = 1.0;
  SemanticOrder so(a, a);
  so.validate();
  return so;
}

Tensor SemanticOrder::right_inverse(const Tensor& a) {
  check(a.ndim() == 2, "right_inverse: A must be 2-d, got ", a.shape_str());
  const size_t p = a.shape[0], d = a.shape[1];
  check(p >= 1 && d >= 1 && p <= d, "right_inverse: need 1 <= p <= d, got ", a.shape_str());

  // Adag = A^T (A A^T)^{-1}: solve (A A^T) X = A, then Adag = X^T.
  Tensor gram = mat_mul(a, mat_transpose(a));
  Tensor x;
  try {
    x = chol_solve_spd(gram, a);
  } catch (const Error& e) {
    fail("right_inverse: A is rank deficient; its first rows do not span ", p,
         " independent directions (", e.what(), ")");
  }
  return mat_transpose(x);
}

SemanticOrder SemanticOrder::from_matrix(Tensor a) {
  Tensor adag = right_inverse(a);
  SemanticOrder so(std::move(a), std::move(adag));
  so.validate();
  return so;
}

void SemanticOrder::validate() const {
  const double sv = smallest_singular_value();
  check(sv > kRankTol, "SemanticOrder: smallest singular value ", sv, " below rank tolerance ",
        kRankTol);
  const double res = right_inverse_residual();
  check(res < kResidualTol, "SemanticOrder: right-inverse residual ", res, " exceeds ",
        kResidualTol);
}

double SemanticOrder::right_inverse_residual() const {
  Tensor prod = mat_mul(a_, adag_);
  const size_t p = prod.shape[0];
  double worst = 0.0;
  for (size_t i = 0; i < p; ++i)
    for (size_t j = 0; j < p; ++j) {
      const double want = i == j ? 1.0 : 0.0;
      worst = std::max(worst, std::fabs(prod.v[i * p + j] - want));
    }
  return worst;
}

double SemanticOrder::smallest_singular_value() const {
  Tensor gram = mat_mul(a_, mat_transpose(a_));
  std::vector<double> eig = sym_eigenvalues(gram);
  const double lo = eig.front();
  return lo > 0.0 ? std::sqrt(lo) : 0.0;
}

std::vector<double> SemanticOrder::project(const std::vector<double>& h) const {
  check(h.size() == d(), "project: expected length ", d(), ", got ", h.size());
  return mat_vec(a_, h);
}

std::vector<double> SemanticOrder::lift(const std::vector<double>& s) const {
  check(s.size() == p(), "lift: expected length ", p(), ", got ", s.size());
  return mat_vec(adag_, s);
}

bool SemanticOrder::preceq(const std::vector<double>& h, const std::vector<double>& h_prime) const {
  check(h.size() == d() && h_prime.size() == d(), "preceq: expected vectors of length ", d(),
        ", got ", h.size(), " and ", h_prime.size());
  std::vector<double> diff(d());
  for (size_t i = 0; i < d(); ++i) diff[i] = h_prime[i] - h[i];
  const std::vector<double> sd = mat_vec(a_, diff);
  for (double x : sd)
    if (x < -kPreceqTol) return false;
  return true;
}

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

}  // namespace

SemanticOrder SemanticOrder::fit_axes(const std::vector<OrderedPair>& pairs, size_t p, size_t d) {
  check(p >= 1 && d >= 1 && p <= d, "fit_axes: need 1 <= p <= d");
  check(!pairs.empty(), "fit_axes: no pairs given");

  // Normalized difference vectors; degenerate pairs are dropped.
  std::vector<std::vector<double>> diffs;
  for (const auto& pr : pairs) {
    check(pr.weak.size() == d && pr.strong.size() == d, "fit_axes: pair dimension mismatch");
    std::vector<double> v(d);
    for (size_t i = 0; i < d; ++i) v[i] = pr.strong[i] - pr.weak[i];
    const double nv = norm(v);
    if (nv < 1e-12) continue;
    for (double& x : v) x /= nv;
    diffs.push_back(std::move(v));
  }
  check(!diffs.empty(), "fit_axes: degenerate pairs, all difference vectors are zero");

  Tensor a = Tensor::zeros({p, d});
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < p; ++k) {
    std::vector<double> axis(d, 0.0);
    for (int epoch = 0; epoch < 200; ++epoch) {
      size_t updates = 0;
      for (const auto& v : diffs) {
        if (dot(axis, v) <= 0.0) {
          for (size_t i = 0; i < d; ++i) axis[i] += v[i];
          ++updates;
        }
      }
      if (updates == 0) break;
    }
    double na = norm(axis);
    check(na > 1e-10, "fit_axes: degenerate pairs, could not fit axis ", k,
          " (differences span fewer than ", p, " directions)");
    for (double& x : axis) x /= na;

    // Re-orthogonalize against earlier rows, then renormalize.
    for (const auto& prev : rows) {
      const double c = dot(axis, prev);
      for (size_t i = 0; i < d; ++i) axis[i] -= c * prev[i];
    }
    na = norm(axis);
    check(na > 1e-10, "fit_axes: fitted axis ", k, " collapsed onto earlier rows");
    for (double& x : axis) x /= na;

    for (size_t i = 0; i < d; ++i) a.v[k * d + i] = axis[i];
    rows.push_back(axis);

    // Deflate the fitted direction out of the differences.
    for (auto& v : diffs) {
      const double c = dot(v, axis);
      for (size_t i = 0; i < d; ++i) v[i] -= c * axis[i];
    }
  }

  return from_matrix(std::move(a));
}

void SemanticOrder::save(const std::string& path) const {
  std::ofstream out(path);
  check(out.good(), "SemanticOrder::save: cannot open ", path);
  out << p() << " " << d() << "\n";
  char buf[64];
  for (size_t i = 0; i < p(); ++i) {
    for (size_t j = 0; j < d(); ++j) {
      std::snprintf(buf, sizeof buf, "%.17g", a_.v[i * d() + j]);
      out << (j ? " " : "") << buf;
    }
    out << "\n";
  }
  check(out.good(), "SemanticOrder::save: write failed for ", path);
}

SemanticOrder SemanticOrder::load(const std::string& path) {
  std::ifstream in(path);
  check(in.good(), "SemanticOrder::load: cannot open ", path);
  size_t p = 0, d = 0;
  in >> p >> d;
  check(in.good() && p >= 1 && d >= 1, "SemanticOrder::load: bad header in ", path);
  Tensor a = Tensor::zeros({p, d});
  for (size_t i = 0; i < p * d; ++i) {
    in >> a.v[i];
    check(!in.fail(), "SemanticOrder::load: expected ", p * d, " values in ", path);
  }
  return from_matrix(std::move(a));
}

Tensor random_orthonormal_rows(size_t p, size_t d, Rng& rng) {
  check(p <= d, "random_orthonormal_rows: need p <= d");
  Tensor a = Tensor::zeros({p, d});
  std::vector<std::vector<double>> rows;
  for (size_t k = 0; k < p; ++k) {
    std::vector<double> r(d);
    while (true) {
      for (double& x : r) x = rng.normal();
      for (const auto& prev : rows) {
        double c = 0.0;
        for (size_t i = 0; i < d; ++i) c += r[i] * prev[i];
        for (size_t i = 0; i < d; ++i) r[i] -= c * prev[i];
      }
      double n2 = 0.0;
      for (double x : r) n2 += x * x;
      if (n2 > 1e-12) {
        const double inv = 1.0 / std::sqrt(n2);
        for (double& x : r) x *= inv;
        break;
      }
    }
    for (size_t i = 0; i < d; ++i) a.v[k * d + i] = r[i];
    rows.push_back(r);
  }
  return a;
}

SyntheticPairs make_synthetic_ordered_pairs(size_t p, size_t d, size_t count, Rng& rng) {
  SyntheticPairs out;
  out.true_axes = random_orthonormal_rows(p, d, rng);
  out.pairs.reserve(count);
  for (size_t n = 0; n < count; ++n) {
    OrderedPair pr;
    pr.weak.resize(d);
    for (double& x : pr.weak) x = rng.normal();
    std::vector<double> c(p);
    for (double& x : c) x = rng.uniform(0.2, 1.5);
    pr.strong = pr.weak;
    for (size_t k = 0; k < p; ++k)
      for (size_t i = 0; i < d; ++i) pr.strong[i] += c[k] * out.true_axes.v[k * d + i];
    out.pairs.push_back(std::move(pr));
  }
  return out;
}

}  // namespace mono
