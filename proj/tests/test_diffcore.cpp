#include <doctest.h>

#include <cmath>

#include "mono/gradcheck.hpp"
#include "mono/rng.hpp"
#include "mono/tape.hpp"

using namespace mono;

namespace {

Tensor random_tensor(std::vector<size_t> shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& x : t.v) x = rng.uniform(lo, hi);
  return t;
}

// Keeps relu inputs away from the kink, where a central difference is
// meaningless.
void nudge_from_zero(Tensor& t, double margin = 0.02) {
  for (double& x : t.v)
    if (std::fabs(x) < margin) x = x < 0.0 ? -margin : margin;
}

}  // namespace

TEST_CASE("primitive forward: closed-form spot checks") {
  Tape tp;
  Var z = tp.softplus(tp.constant_scalar(0.0));
  CHECK(tp.value(z).scalar_value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

  Rng rng(7);
  Var a = tp.leaf(random_tensor({2, 3}, rng));
  Var b = tp.leaf(random_tensor({3, 4}, rng));
  Var c = tp.matmul(a, b);
  CHECK(tp.value(c).shape == std::vector<size_t>{2, 4});

  Var sm = tp.softmax_lastdim(tp.leaf(random_tensor({5, 9}, rng)));
  const Tensor& s = tp.value(sm);
  for (size_t i = 0; i < 5; ++i) {
    double row = 0.0;
    for (size_t j = 0; j < 9; ++j) row += s.at(i, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("primitive forward: shape mismatch names op and shapes") {
  Tape tp;
  Rng rng(3);
  Var a = tp.leaf(random_tensor({2, 3}, rng));
  Var b = tp.leaf(random_tensor({2, 2}, rng));
  try {
    tp.matmul(a, b);
    FAIL("matmul accepted incompatible shapes");
  } catch (const Error& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2x3]") != std::string::npos);
    CHECK(msg.find("[2x2]") != std::string::npos);
  }
  CHECK_THROWS_AS(tp.add(a, b), Error);
}

TEST_CASE("backward: scalar-only outputs, trivial derivatives") {
  Tape tp;
  Tensor x = Tensor::scalar(0.0);
  x.requires_grad = true;
  Var xv = tp.leaf(x);
  Var y = tp.softplus(xv);
  tp.backward(y);
  CHECK(tp.grad(xv).scalar_value() == doctest::Approx(0.5).epsilon(1e-12));

  Rng rng(11);
  Tape tp2;
  Var v = tp2.leaf(random_tensor({3, 4}, rng).set_requires_grad());
  Var s = tp2.sum(v);
  CHECK_THROWS_AS(tp2.backward(v), Error);  // non-scalar
  tp2.backward(s);
  Tensor g = tp2.grad(v);
  for (double gi : g.v) CHECK(gi == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("backward: fan-out accumulates, off-path leaves stay zero") {
  Tape tp;
  Tensor x = Tensor::scalar(1.5);
  x.requires_grad = true;
  Var xv = tp.leaf(x);
  Var unused = tp.leaf(Tensor::scalar(2.0).set_requires_grad());
  Var y = tp.add(xv, xv);  // dy/dx = 2
  tp.backward(tp.sum(y));
  CHECK(tp.grad(xv).scalar_value() == doctest::Approx(2.0).epsilon(1e-15));
  CHECK(tp.grad(unused).scalar_value() == 0.0);
}

TEST_CASE("backward: deterministic, bit-identical across runs") {
  Rng rng(23);
  Tensor x = random_tensor({4, 4}, rng);
  x.requires_grad = true;
  Tape tp;
  Var xv = tp.leaf(x);
  Var w = tp.leaf(random_tensor({4, 4}, rng));
  Var out = tp.sum(tp.sigmoid(tp.matmul(xv, w)));
  tp.backward(out);
  Tensor g1 = tp.grad(xv);
  tp.backward(out);
  Tensor g2 = tp.grad(xv);
  for (size_t i = 0; i < g1.v.size(); ++i) CHECK(g1.v[i] == g2.v[i]);
}

TEST_CASE("backward: random 3-layer composition matches finite differences") {
  Rng rng(42);
  const Tensor w1 = random_tensor({6, 5}, rng);
  const Tensor w2 = random_tensor({6, 6}, rng);
  const Tensor w3 = random_tensor({1, 6}, rng);
  auto f = [&](Tape& tp, Var x) {
    Var h1 = tp.tanh(tp.matmul(tp.constant(w1), x));
    Var h2 = tp.sigmoid(tp.matmul(tp.constant(w2), h1));
    return tp.sum(tp.matmul(tp.constant(w3), h2));
  };
  for (int trial = 0; trial < 5; ++trial) {
    FdCheck r = finite_diff_check(f, random_tensor({5, 1}, rng), 1e-5);
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("finite_diff_check: quadratic, constant, and failure modes") {
  auto quad = [](Tape& tp, Var x) { return tp.sum(tp.mul(x, x)); };
  Tensor x0 = Tensor::vec({1.0, 2.0});
  FdCheck r = finite_diff_check(quad, x0, 1e-5);
  CHECK(r.analytic.v[0] == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(r.analytic.v[1] == doctest::Approx(4.0).epsilon(1e-10));
  CHECK(std::fabs(r.analytic.v[0] - r.numeric.v[0]) < 1e-6);
  CHECK(std::fabs(r.analytic.v[1] - r.numeric.v[1]) < 1e-6);

  auto constant = [](Tape& tp, Var x) { return tp.scale(tp.sum(tp.sub(x, x)), 3.0); };
  FdCheck rc = finite_diff_check(constant, x0, 1e-5);
  for (double g : rc.analytic.v) CHECK(g == 0.0);
  for (double g : rc.numeric.v) CHECK(g == 0.0);

  auto blows_up = [](Tape& tp, Var x) { return tp.sum(tp.log(tp.scale(x, 0.0))); };
  CHECK_THROWS_AS(finite_diff_check(blows_up, x0, 1e-5), Error);
  CHECK_THROWS_AS(finite_diff_check(quad, x0, 0.0), Error);
}

TEST_CASE("finite_diff_check: monotone-ffn style loss at a random point") {
  // h + Adag g(A h) with softplus-realized weights and a quadratic loss on
  // top, assembled straight from primitives.
  Rng rng(2024);
  const size_t d = 6, p = 3, hidden = 8;
  const Tensor a = random_tensor({p, d}, rng, -0.5, 0.5);
  const Tensor adag_t = random_tensor({p, d}, rng, -0.5, 0.5);
  const Tensor v1 = random_tensor({hidden, p}, rng);
  const Tensor b1 = random_tensor({hidden}, rng);
  const Tensor v2 = random_tensor({p, hidden}, rng);
  const Tensor b2 = random_tensor({p}, rng);
  const Tensor target = random_tensor({1, d}, rng);

  auto loss = [&](Tape& tp, Var h) {
    Var s = tp.matmul(h, tp.transpose(tp.constant(a)));  // 1 x p
    Var w1t = tp.transpose(tp.softplus(tp.constant(v1)));
    Var z1 = tp.add(tp.matmul(s, w1t), tp.constant(b1));
    Var a1 = tp.sigmoid(z1);
    Var w2t = tp.transpose(tp.softplus(tp.constant(v2)));
    Var gs = tp.add(tp.matmul(a1, w2t), tp.constant(b2));  // 1 x p
    Var f = tp.add(h, tp.matmul(gs, tp.constant(adag_t)));
    Var err = tp.sub(f, tp.constant(target));
    return tp.mean(tp.mul(err, err));
  };
  for (int trial = 0; trial < 3; ++trial) {
    FdCheck r = finite_diff_check(loss, random_tensor({1, d}, rng), 1e-5);
    CHECK(r.max_rel_err < 1e-4);
  }
}

TEST_CASE("every primitive matches the finite-difference oracle on random inputs") {
  Rng rng(777);
  const int kTrialsPerOp = 100;

  auto check_fn = [&](const char* name, const TapeScalarFn& f, const Tensor& x) {
    FdCheck r = finite_diff_check(f, x, 1e-5);
    INFO("op: " << name << " max_rel_err: " << r.max_rel_err);
    CHECK(r.max_rel_err < 1e-4);
  };

  for (int t = 0; t < kTrialsPerOp; ++t) {
    const Tensor c = random_tensor({3, 4}, rng);

    for (const char* un : {"softplus", "sigmoid", "tanh", "exp", "softmax-lastdim",
                           "layernorm-lastdim"}) {
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.apply(un, {x}), tp.constant(c)));
      };
      check_fn(un, f, random_tensor({3, 4}, rng));
    }
    {
      Tensor x = random_tensor({3, 4}, rng);
      nudge_from_zero(x);
      auto f = [&](Tape& tp, Var xx) {
        return tp.sum(tp.mul(tp.relu(xx), tp.constant(c)));
      };
      check_fn("relu", f, x);
    }
    {
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.log(x), tp.constant(c)));
      };
      check_fn("log", f, random_tensor({3, 4}, rng, 0.1, 2.0));
    }
    for (const char* bin : {"add", "sub", "mul"}) {
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.apply(bin, {x, tp.constant(c)}), tp.constant(c)));
      };
      check_fn(bin, f, random_tensor({3, 4}, rng));
      // vector broadcast across rows, gradient w.r.t. the vector
      auto fb = [&](Tape& tp, Var x) {
        Var m = tp.constant(c);
        return tp.sum(tp.mul(tp.apply(bin, {m, x}), m));
      };
      check_fn(bin, fb, random_tensor({4}, rng));
    }
    {
      const Tensor b = random_tensor({4, 2}, rng);
      auto f = [&](Tape& tp, Var x) { return tp.sum(tp.matmul(x, tp.constant(b))); };
      check_fn("matmul", f, random_tensor({3, 4}, rng));
      const Tensor cr = random_tensor({3, 2}, rng);
      auto fr = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.matmul(tp.constant(c), x), tp.constant(cr)));
      };
      check_fn("matmul", fr, random_tensor({4, 2}, rng));
    }
    {
      auto f = [&](Tape& tp, Var x) { return tp.scale(tp.sum(x), 1.7); };
      check_fn("scale+sum", f, random_tensor({5}, rng));
      auto fm = [&](Tape& tp, Var x) { return tp.mean(tp.mul(x, tp.constant(c))); };
      check_fn("mean", fm, random_tensor({3, 4}, rng));
    }
    {
      const std::vector<size_t> ids = {2, 0, 2, 1};
      const Tensor cg = random_tensor({4, 4}, rng);
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.gather_rows(x, ids), tp.constant(cg)));
      };
      check_fn("gather-rows", f, random_tensor({3, 4}, rng));
    }
    {
      const Tensor rhs = random_tensor({3, 2}, rng);
      const Tensor cc = random_tensor({3, 6}, rng);
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.concat(x, tp.constant(rhs)), tp.constant(cc)));
      };
      check_fn("concat", f, random_tensor({3, 4}, rng));
    }
    {
      const Tensor ct = random_tensor({4, 3}, rng);
      auto f = [&](Tape& tp, Var x) {
        return tp.sum(tp.mul(tp.transpose(x), tp.constant(ct)));
      };
      check_fn("transpose", f, random_tensor({3, 4}, rng));
    }
  }
}

TEST_CASE("apply rejects unknown operation ids") {
  Tape tp;
  Var x = tp.constant(Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(tp.apply("convolve", {x}), Error);
  CHECK_THROWS_AS(tp.apply("sum", {x, x}), Error);  // arity mismatch
}

TEST_CASE("gather-rows rejects out-of-range ids") {
  Tape tp;
  Rng rng(5);
  Var m = tp.leaf(random_tensor({3, 4}, rng));
  CHECK_THROWS_AS(tp.gather_rows(m, {0, 3}), Error);
}

TEST_CASE("layernorm uses the pinned epsilon") {
  // On a constant row the variance is zero, so the output is x_c - mean
  // divided by sqrt(eps) = 0 exactly; with a known two-value row the epsilon
  // is visible in the magnitude.
  Tape tp;
  Var x = tp.leaf(Tensor::vec({1.0, -1.0}));
  const Tensor& y = tp.value(tp.layernorm_lastdim(x));
  const double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y.v[0] == doctest::Approx(expect).epsilon(1e-12));
  CHECK(y.v[1] == doctest::Approx(-expect).epsilon(1e-12));
}
