#include "mono/gradcheck.hpp"

#include <cmath>

namespace mono {

double rel_err(double analytic, double numeric) {
  const double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
  return std::fabs(analytic - numeric) / denom;
}

double max_rel_err(const Tensor& analytic, const Tensor& numeric) {
  check(analytic.v.size() == numeric.v.size(), "max_rel_err: size mismatch");
  double worst = 0.0;
  for (size_t i = 0; i < analytic.v.size(); ++i)
    worst = std::max(worst, rel_err(analytic.v[i], numeric.v[i]));
  return worst;
}

static double eval_value(const TapeScalarFn& f, const Tensor& x) {
  Tape tape;
  Tensor xc = x;
  xc.requires_grad = false;
  Var out = f(tape, tape.leaf(std::move(xc)));
  return tape.value(out).scalar_value();
}

FdCheck finite_diff_check(const TapeScalarFn& f, const Tensor& x, double step) {
  check(step > 0.0, "finite_diff_check: step must be positive, got ", step);

  FdCheck r;
  {
    Tape tape;
    Tensor xc = x;
    xc.requires_grad = true;
    Var xin = tape.leaf(std::move(xc));
    Var out = f(tape, xin);
    check(std::isfinite(tape.value(out).scalar_value()),
          "finite_diff_check: non-finite f(x) = ", tape.value(out).scalar_value());
    tape.backward(out);
    r.analytic = tape.grad(xin);
  }

  r.numeric = Tensor::zeros(x.shape);
  Tensor xp = x;
  for (size_t i = 0; i < x.v.size(); ++i) {
    const double orig = xp.v[i];
    xp.v[i] = orig + step;
    const double fp = eval_value(f, xp);
    xp.v[i] = orig - step;
    const double fm = eval_value(f, xp);
    xp.v[i] = orig;
    check(std::isfinite(fp) && std::isfinite(fm),
          "finite_diff_check: non-finite probe value at coordinate ", i);
    r.numeric.v[i] = (fp - fm) / (2.0 * step);
  }

  r.max_rel_err = max_rel_err(r.analytic, r.numeric);
  return r;
}

Tensor finite_diff_gradient(const std::function<double(const Tensor&)>& f, const Tensor& x,
                            double step) {
  check(step > 0.0, "finite_diff_gradient: step must be positive, got ", step);
  Tensor g = Tensor::zeros(x.shape);
  Tensor xp = x;
  for (size_t i = 0; i < x.v.size(); ++i) {
    const double orig = xp.v[i];
    xp.v[i] = orig + step;
    const double fp = f(xp);
    xp.v[i] = orig - step;
    const double fm = f(xp);
    xp.v[i] = orig;
    check(std::isfinite(fp) && std::isfinite(fm),
          "finite_diff_gradient: non-finite probe value at coordinate ", i);
    g.v[i] = (fp - fm) / (2.0 * step);
  }
  return g;
}

}  // namespace mono
