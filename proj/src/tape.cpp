#include "mono/tape.hpp"

#include <cmath>

#include "mono/scalarops.hpp"

namespace mono {

const char* op_name(Op op) {
  switch (op) {
    case Op::Leaf: return "leaf";
    case Op::Matmul: return "matmul";
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Sub: return "sub";
    case Op::Scale: return "scale";
    case Op::Softplus: return "softplus";
    case Op::Sigmoid: return "sigmoid";
    case Op::Tanh: return "tanh";
    case Op::Relu: return "relu";
    case Op::Exp: return "exp";
    case Op::Log: return "log";
    case Op::SoftmaxLastDim: return "softmax-lastdim";
    case Op::LayerNormLastDim: return "layernorm-lastdim";
    case Op::Sum: return "sum";
    case Op::Mean: return "mean";
    case Op::GatherRows: return "gather-rows";
    case Op::Concat: return "concat";
    case Op::Transpose: return "transpose";
  }
  return "?";
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{int32_t(nodes_.size() - 1)};
}

const Tape::Node& Tape::node(Var v) const {
  check(v.id >= 0 && size_t(v.id) < nodes_.size(), "tape: invalid node id ", v.id);
  return nodes_[size_t(v.id)];
}

const Tensor& Tape::value(Var v) const { return node(v).t; }

Var Tape::leaf(Tensor t) {
  Node n;
  n.op = Op::Leaf;
  n.needs_grad = t.requires_grad;
  n.t = std::move(t);
  return push(std::move(n));
}

Var Tape::constant(Tensor t) {
  t.requires_grad = false;
  return leaf(std::move(t));
}

Var Tape::constant_scalar(double x) { return constant(Tensor::scalar(x)); }

// Rows-by-rows view: rank 0 -> 1x1, rank 1 -> 1xN, rank 2 -> RxC.
static void as_rows(const Tensor& t, size_t& r, size_t& c) {
  if (t.ndim() == 2) {
    r = t.shape[0];
    c = t.shape[1];
  } else if (t.ndim() == 1) {
    r = 1;
    c = t.shape[0];
  } else {
    r = 1;
    c = 1;
  }
}

Var Tape::binary_elementwise(Op op, Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  const bool rowvec = a.ndim() == 2 && b.ndim() == 1 && b.shape[0] == a.shape[1];
  check(same_shape(a, b) || rowvec, op_name(op), ": shape mismatch: ", a.shape_str(), " vs ",
        b.shape_str());

  Node n;
  n.op = op;
  n.a = av.id;
  n.b = bv.id;
  n.needs_grad = needs(av) || needs(bv);
  n.t = Tensor::zeros(a.shape);
  const size_t cols = rowvec ? a.shape[1] : 0;
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double x = a.v[i];
    const double y = rowvec ? b.v[i % cols] : b.v[i];
    switch (op) {
      case Op::Add: n.t.v[i] = x + y; break;
      case Op::Sub: n.t.v[i] = x - y; break;
      case Op::Mul: n.t.v[i] = x * y; break;
      default: fail("binary_elementwise: bad op");
    }
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) { return binary_elementwise(Op::Add, a, b); }
Var Tape::sub(Var a, Var b) { return binary_elementwise(Op::Sub, a, b); }
Var Tape::mul(Var a, Var b) { return binary_elementwise(Op::Mul, a, b); }

Var Tape::matmul(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  check(a.ndim() == 2 && b.ndim() == 2 && a.shape[1] == b.shape[0],
        "matmul: incompatible shapes: ", a.shape_str(), " vs ", b.shape_str());
  const size_t m = a.shape[0], k = a.shape[1], p = b.shape[1];

  Node n;
  n.op = Op::Matmul;
  n.a = av.id;
  n.b = bv.id;
  n.needs_grad = needs(av) || needs(bv);
  n.t = Tensor::zeros({m, p});
  for (size_t i = 0; i < m; ++i)
    for (size_t l = 0; l < k; ++l) {
      const double x = a.v[i * k + l];
      if (x == 0.0) continue;
      const double* brow = &b.v[l * p];
      double* out = &n.t.v[i * p];
      for (size_t j = 0; j < p; ++j) out[j] += x * brow[j];
    }
  return push(std::move(n));
}

Var Tape::scale(Var av, double alpha) {
  const Tensor& a = value(av);
  Node n;
  n.op = Op::Scale;
  n.a = av.id;
  n.alpha = alpha;
  n.needs_grad = needs(av);
  n.t = Tensor::zeros(a.shape);
  for (size_t i = 0; i < a.v.size(); ++i) n.t.v[i] = alpha * a.v[i];
  return push(std::move(n));
}

Var Tape::unary(Op op, Var av) {
  const Tensor& a = value(av);
  Node n;
  n.op = op;
  n.a = av.id;
  n.needs_grad = needs(av);
  n.t = Tensor::zeros(a.shape);
  for (size_t i = 0; i < a.v.size(); ++i) {
    const double x = a.v[i];
    switch (op) {
      case Op::Softplus: n.t.v[i] = mono::softplus(x); break;
      case Op::Sigmoid: n.t.v[i] = mono::sigmoid(x); break;
      case Op::Tanh: n.t.v[i] = std::tanh(x); break;
      case Op::Relu: n.t.v[i] = x > 0.0 ? x : 0.0; break;
      case Op::Exp: n.t.v[i] = std::exp(x); break;
      case Op::Log: n.t.v[i] = std::log(x); break;
      default: fail("unary: bad op");
    }
  }
  return push(std::move(n));
}

Var Tape::softplus(Var a) { return unary(Op::Softplus, a); }
Var Tape::sigmoid(Var a) { return unary(Op::Sigmoid, a); }
Var Tape::tanh(Var a) { return unary(Op::Tanh, a); }
Var Tape::relu(Var a) { return unary(Op::Relu, a); }
Var Tape::exp(Var a) { return unary(Op::Exp, a); }
Var Tape::log(Var a) { return unary(Op::Log, a); }

Var Tape::softmax_lastdim(Var av) {
  const Tensor& a = value(av);
  check(a.ndim() >= 1, "softmax-lastdim: scalar input ", a.shape_str());
  size_t r, c;
  as_rows(a, r, c);
  check(c >= 1, "softmax-lastdim: empty rows");

  Node n;
  n.op = Op::SoftmaxLastDim;
  n.a = av.id;
  n.needs_grad = needs(av);
  n.t = Tensor::zeros(a.shape);
  for (size_t i = 0; i < r; ++i) {
    const double* x = &a.v[i * c];
    double* y = &n.t.v[i * c];
    double mx = x[0];
    for (size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
    double z = 0.0;
    for (size_t j = 0; j < c; ++j) {
      y[j] = std::exp(x[j] - mx);
      z += y[j];
    }
    for (size_t j = 0; j < c; ++j) y[j] /= z;
  }
  return push(std::move(n));
}

Var Tape::layernorm_lastdim(Var av) {
  const Tensor& a = value(av);
  check(a.ndim() >= 1, "layernorm-lastdim: scalar input ", a.shape_str());
  size_t r, c;
  as_rows(a, r, c);
  check(c >= 1, "layernorm-lastdim: empty rows");

  Node n;
  n.op = Op::LayerNormLastDim;
  n.a = av.id;
  n.needs_grad = needs(av);
  n.t = Tensor::zeros(a.shape);
  for (size_t i = 0; i < r; ++i) {
    const double* x = &a.v[i * c];
    double* y = &n.t.v[i * c];
    double mu = 0.0;
    for (size_t j = 0; j < c; ++j) mu += x[j];
    mu /= double(c);
    double var = 0.0;
    for (size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= double(c);
    const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
    for (size_t j = 0; j < c; ++j) y[j] = (x[j] - mu) * inv;
  }
  return push(std::move(n));
}

Var Tape::sum(Var av) {
  const Tensor& a = value(av);
  Node n;
  n.op = Op::Sum;
  n.a = av.id;
  n.needs_grad = needs(av);
  double s = 0.0;
  for (double x : a.v) s += x;
  n.t = Tensor::scalar(s);
  return push(std::move(n));
}

Var Tape::mean(Var av) {
  const Tensor& a = value(av);
  check(a.numel() >= 1, "mean: empty tensor");
  Node n;
  n.op = Op::Mean;
  n.a = av.id;
  n.needs_grad = needs(av);
  double s = 0.0;
  for (double x : a.v) s += x;
  n.t = Tensor::scalar(s / double(a.numel()));
  return push(std::move(n));
}

Var Tape::gather_rows(Var mv, const std::vector<size_t>& row_ids) {
  const Tensor& m = value(mv);
  check(m.ndim() == 2, "gather-rows: input must be 2-d, got ", m.shape_str());
  const size_t r = m.shape[0], c = m.shape[1];
  for (size_t id : row_ids)
    check(id < r, "gather-rows: row id ", id, " out of range for ", m.shape_str());

  Node n;
  n.op = Op::GatherRows;
  n.a = mv.id;
  n.row_ids = row_ids;
  n.needs_grad = needs(mv);
  n.t = Tensor::zeros({row_ids.size(), c});
  for (size_t i = 0; i < row_ids.size(); ++i)
    for (size_t j = 0; j < c; ++j) n.t.v[i * c + j] = m.v[row_ids[i] * c + j];
  return push(std::move(n));
}

Var Tape::concat(Var av, Var bv) {
  const Tensor& a = value(av);
  const Tensor& b = value(bv);
  Node n;
  n.op = Op::Concat;
  n.a = av.id;
  n.b = bv.id;
  n.needs_grad = needs(av) || needs(bv);
  if (a.ndim() == 1 && b.ndim() == 1) {
    n.t = Tensor::zeros({a.shape[0] + b.shape[0]});
    std::copy(a.v.begin(), a.v.end(), n.t.v.begin());
    std::copy(b.v.begin(), b.v.end(), n.t.v.begin() + a.v.size());
  } else if (a.ndim() == 2 && b.ndim() == 2 && a.shape[0] == b.shape[0]) {
    const size_t r = a.shape[0], ca = a.shape[1], cb = b.shape[1];
    n.t = Tensor::zeros({r, ca + cb});
    for (size_t i = 0; i < r; ++i) {
      std::copy(&a.v[i * ca], &a.v[i * ca] + ca, &n.t.v[i * (ca + cb)]);
      std::copy(&b.v[i * cb], &b.v[i * cb] + cb, &n.t.v[i * (ca + cb) + ca]);
    }
  } else {
    fail("concat: shape mismatch: ", a.shape_str(), " vs ", b.shape_str());
  }
  return push(std::move(n));
}

Var Tape::transpose(Var av) {
  const Tensor& a = value(av);
  check(a.ndim() == 2, "transpose: input must be 2-d, got ", a.shape_str());
  const size_t r = a.shape[0], c = a.shape[1];
  Node n;
  n.op = Op::Transpose;
  n.a = av.id;
  n.needs_grad = needs(av);
  n.t = Tensor::zeros({c, r});
  for (size_t i = 0; i < r; ++i)
    for (size_t j = 0; j < c; ++j) n.t.v[j * r + i] = a.v[i * c + j];
  return push(std::move(n));
}

Var Tape::apply(const std::string& op_id, const std::vector<Var>& in) {
  auto want = [&](size_t k) {
    check(in.size() == k, op_id, ": expected ", k, " inputs, got ", in.size());
  };
  if (op_id == "matmul") { want(2); return matmul(in[0], in[1]); }
  if (op_id == "add") { want(2); return add(in[0], in[1]); }
  if (op_id == "mul") { want(2); return mul(in[0], in[1]); }
  if (op_id == "sub") { want(2); return sub(in[0], in[1]); }
  if (op_id == "softplus") { want(1); return softplus(in[0]); }
  if (op_id == "sigmoid") { want(1); return sigmoid(in[0]); }
  if (op_id == "tanh") { want(1); return tanh(in[0]); }
  if (op_id == "relu") { want(1); return relu(in[0]); }
  if (op_id == "exp") { want(1); return exp(in[0]); }
  if (op_id == "log") { want(1); return log(in[0]); }
  if (op_id == "softmax-lastdim") { want(1); return softmax_lastdim(in[0]); }
  if (op_id == "layernorm-lastdim") { want(1); return layernorm_lastdim(in[0]); }
  if (op_id == "sum") { want(1); return sum(in[0]); }
  if (op_id == "mean") { want(1); return mean(in[0]); }
  if (op_id == "concat") { want(2); return concat(in[0], in[1]); }
  if (op_id == "transpose") { want(1); return transpose(in[0]); }
  fail("apply: unknown op id '", op_id, "'");
}

void Tape::backward(Var out) {
  const Node& on = node(out);
  check(on.t.is_scalar(), "backward: output must be a scalar, got ", on.t.shape_str());

  for (auto& n : nodes_) n.bar.assign(n.t.v.size(), 0.0);
  backward_done_ = true;
  nodes_[size_t(out.id)].bar[0] = 1.0;

  for (int32_t i = out.id; i >= 0; --i) {
    Node& n = nodes_[size_t(i)];
    if (!n.needs_grad) continue;
    bool any = false;
    for (double g : n.bar)
      if (g != 0.0) { any = true; break; }
    if (!any) continue;

    Node* na = n.a >= 0 ? &nodes_[size_t(n.a)] : nullptr;
    Node* nb = n.b >= 0 ? &nodes_[size_t(n.b)] : nullptr;
    const bool ga = na && na->needs_grad;
    const bool gb = nb && nb->needs_grad;

    switch (n.op) {
      case Op::Leaf:
        break;
      case Op::Add:
      case Op::Sub: {
        const double sb = n.op == Op::Sub ? -1.0 : 1.0;
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k) na->bar[k] += n.bar[k];
        if (gb) {
          if (nb->t.v.size() == n.bar.size()) {
            for (size_t k = 0; k < n.bar.size(); ++k) nb->bar[k] += sb * n.bar[k];
          } else {  // row-broadcast vector
            const size_t c = nb->t.v.size();
            for (size_t k = 0; k < n.bar.size(); ++k) nb->bar[k % c] += sb * n.bar[k];
          }
        }
        break;
      }
      case Op::Mul: {
        const bool rowvec = nb->t.v.size() != n.bar.size();
        const size_t c = nb->t.v.size();
        for (size_t k = 0; k < n.bar.size(); ++k) {
          const double y = rowvec ? nb->t.v[k % c] : nb->t.v[k];
          if (ga) na->bar[k] += n.bar[k] * y;
          if (gb) {
            const double x = na->t.v[k];
            if (rowvec)
              nb->bar[k % c] += n.bar[k] * x;
            else
              nb->bar[k] += n.bar[k] * x;
          }
        }
        break;
      }
      case Op::Matmul: {
        const size_t m = na->t.shape[0], kk = na->t.shape[1], p = nb->t.shape[1];
        if (ga)  // dA = dC * B^T
          for (size_t i2 = 0; i2 < m; ++i2)
            for (size_t l = 0; l < kk; ++l) {
              double acc = 0.0;
              for (size_t j = 0; j < p; ++j) acc += n.bar[i2 * p + j] * nb->t.v[l * p + j];
              na->bar[i2 * kk + l] += acc;
            }
        if (gb)  // dB = A^T * dC
          for (size_t l = 0; l < kk; ++l)
            for (size_t i2 = 0; i2 < m; ++i2) {
              const double x = na->t.v[i2 * kk + l];
              if (x == 0.0) continue;
              for (size_t j = 0; j < p; ++j) nb->bar[l * p + j] += x * n.bar[i2 * p + j];
            }
        break;
      }
      case Op::Scale:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k) na->bar[k] += n.alpha * n.bar[k];
        break;
      case Op::Softplus:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k)
            na->bar[k] += n.bar[k] * mono::sigmoid(na->t.v[k]);
        break;
      case Op::Sigmoid:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k)
            na->bar[k] += n.bar[k] * sigmoid_grad_from_value(n.t.v[k]);
        break;
      case Op::Tanh:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k)
            na->bar[k] += n.bar[k] * tanh_grad_from_value(n.t.v[k]);
        break;
      case Op::Relu:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k)
            na->bar[k] += na->t.v[k] > 0.0 ? n.bar[k] : 0.0;
        break;
      case Op::Exp:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k) na->bar[k] += n.bar[k] * n.t.v[k];
        break;
      case Op::Log:
        if (ga)
          for (size_t k = 0; k < n.bar.size(); ++k) na->bar[k] += n.bar[k] / na->t.v[k];
        break;
      case Op::SoftmaxLastDim: {
        if (!ga) break;
        size_t r, c;
        as_rows(n.t, r, c);
        for (size_t i2 = 0; i2 < r; ++i2) {
          const double* y = &n.t.v[i2 * c];
          const double* dy = &n.bar[i2 * c];
          double dot = 0.0;
          for (size_t j = 0; j < c; ++j) dot += dy[j] * y[j];
          for (size_t j = 0; j < c; ++j) na->bar[i2 * c + j] += y[j] * (dy[j] - dot);
        }
        break;
      }
      case Op::LayerNormLastDim: {
        if (!ga) break;
        size_t r, c;
        as_rows(n.t, r, c);
        for (size_t i2 = 0; i2 < r; ++i2) {
          const double* x = &na->t.v[i2 * c];
          const double* y = &n.t.v[i2 * c];
          const double* dy = &n.bar[i2 * c];
          double mu = 0.0;
          for (size_t j = 0; j < c; ++j) mu += x[j];
          mu /= double(c);
          double var = 0.0;
          for (size_t j = 0; j < c; ++j) var += (x[j] - mu) * (x[j] - mu);
          var /= double(c);
          const double inv = 1.0 / std::sqrt(var + kLayerNormEps);
          double mdy = 0.0, mdyy = 0.0;
          for (size_t j = 0; j < c; ++j) {
            mdy += dy[j];
            mdyy += dy[j] * y[j];
          }
          mdy /= double(c);
          mdyy /= double(c);
          for (size_t j = 0; j < c; ++j)
            na->bar[i2 * c + j] += inv * (dy[j] - mdy - y[j] * mdyy);
        }
        break;
      }
      case Op::Sum:
        if (ga)
          for (size_t k = 0; k < na->bar.size(); ++k) na->bar[k] += n.bar[0];
        break;
      case Op::Mean:
        if (ga) {
          const double g = n.bar[0] / double(na->t.numel());
          for (size_t k = 0; k < na->bar.size(); ++k) na->bar[k] += g;
        }
        break;
      case Op::GatherRows: {
        if (!ga) break;
        const size_t c = na->t.shape[1];
        for (size_t i2 = 0; i2 < n.row_ids.size(); ++i2)
          for (size_t j = 0; j < c; ++j)
            na->bar[n.row_ids[i2] * c + j] += n.bar[i2 * c + j];
        break;
      }
      case Op::Concat: {
        if (n.t.ndim() == 1) {
          const size_t la = na->t.v.size();
          if (ga)
            for (size_t k = 0; k < la; ++k) na->bar[k] += n.bar[k];
          if (gb)
            for (size_t k = 0; k < nb->t.v.size(); ++k) nb->bar[k] += n.bar[la + k];
        } else {
          const size_t r = n.t.shape[0], ca = na->t.shape[1], cb = nb->t.shape[1];
          for (size_t i2 = 0; i2 < r; ++i2) {
            if (ga)
              for (size_t j = 0; j < ca; ++j)
                na->bar[i2 * ca + j] += n.bar[i2 * (ca + cb) + j];
            if (gb)
              for (size_t j = 0; j < cb; ++j)
                nb->bar[i2 * cb + j] += n.bar[i2 * (ca + cb) + ca + j];
          }
        }
        break;
      }
      case Op::Transpose: {
        if (!ga) break;
        const size_t r = n.t.shape[0], c = n.t.shape[1];  // output is r x c
        for (size_t i2 = 0; i2 < r; ++i2)
          for (size_t j = 0; j < c; ++j) na->bar[j * r + i2] += n.bar[i2 * c + j];
        break;
      }
    }
  }

  for (auto& n : nodes_)
    if (n.op == Op::Leaf && n.t.requires_grad) {
      n.t.grad = n.bar;
    }
}

Tensor Tape::grad(Var v) const {
  check(backward_done_, "grad: backward() has not run on this tape");
  const Node& n = node(v);
  Tensor g = Tensor::zeros(n.t.shape);
  if (!n.bar.empty()) g.v = n.bar;
  return g;
}

}  // namespace mono
