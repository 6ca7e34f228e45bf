#include "canids/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "canids/error.hpp"
#include "canids/kernels.hpp"

namespace canids::ad {
namespace {

void require(bool ok, const char* op, const Matrix& a, const Matrix& b) {
  if (!ok) {
    throw ShapeError(std::string(op) + ": " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) + " vs " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
}

}  // namespace

Var Tape::leaf(Matrix value, bool requires_grad) {
  Node n;
  n.op = Op::leaf;
  n.requires_grad = requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Var Tape::push(Op op, std::size_t a, std::size_t b, Matrix value) {
  Node n;
  n.op = op;
  n.a = a;
  n.b = b;
  n.requires_grad = nodes_[a].requires_grad || nodes_[b].requires_grad;
  n.value = std::move(value);
  nodes_.push_back(std::move(n));
  return {nodes_.size() - 1};
}

Matrix Tape::grad(Var v) const {
  const auto& n = nodes_[v.id];
  return n.grad.size() == 0 ? Matrix::zeros_like(n.value) : n.grad;
}

Matrix& Tape::grad_ref(std::size_t id) {
  auto& n = nodes_[id];
  if (n.grad.size() == 0 && n.value.size() != 0) n.grad = Matrix::zeros_like(n.value);
  return n.grad;
}

Var Tape::matmul(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  require(av.cols() == bv.rows(), "matmul", av, bv);
  return push(Op::matmul, a.id, b.id, canids::matmul(av, bv));
}

Var Tape::matmul_nt(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  require(av.cols() == bv.cols(), "matmul_nt", av, bv);
  return push(Op::matmul_nt, a.id, b.id, canids::matmul_nt(av, bv));
}

Var Tape::add(Var a, Var b) {
  const auto& av = value(a);
  const auto& bv = value(b);
  require(av.same_shape(bv), "add", av, bv);
  Matrix out = av;
  kernels::axpy(1.0, bv.values(), out.values());
  return push(Op::add, a.id, b.id, std::move(out));
}

Var Tape::add_row(Var a, Var row) {
  const auto& av = value(a);
  const auto& rv = value(row);
  require(rv.rows() == 1 && rv.cols() == av.cols(), "add_row", av, rv);
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r) kernels::axpy(1.0, rv.values(), out.row(r));
  return push(Op::add_row, a.id, row.id, std::move(out));
}

Var Tape::relu(Var a) {
  Matrix out = value(a);
  for (auto& x : out.values()) x = x > 0.0 ? x : 0.0;
  return push(Op::relu, a.id, a.id, std::move(out));
}

Var Tape::leaky_relu(Var a, double slope) {
  Matrix out = value(a);
  for (auto& x : out.values()) x = x > 0.0 ? x : slope * x;
  auto v = push(Op::leaky_relu, a.id, a.id, std::move(out));
  nodes_[v.id].scalar = slope;
  return v;
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a);
  for (auto& x : out.values()) x *= s;
  auto v = push(Op::scale, a.id, a.id, std::move(out));
  nodes_[v.id].scalar = s;
  return v;
}

Var Tape::outer_sum(Var p, Var q) {
  const auto& pv = value(p);
  const auto& qv = value(q);
  require(pv.cols() == 1 && qv.cols() == 1, "outer_sum", pv, qv);
  Matrix out(pv.rows(), qv.rows());
  for (std::size_t i = 0; i < pv.rows(); ++i) {
    for (std::size_t j = 0; j < qv.rows(); ++j) out(i, j) = pv(i, 0) + qv(j, 0);
  }
  return push(Op::outer_sum, p.id, q.id, std::move(out));
}

Var Tape::masked_softmax_rows(Var a, std::vector<std::uint8_t> mask) {
  const auto& av = value(a);
  if (!mask.empty() && mask.size() != av.size()) throw ShapeError("softmax mask size mismatch");
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < av.cols(); ++c) {
      if (mask.empty() || mask[r * av.cols() + c]) mx = std::max(mx, av(r, c));
    }
    if (!std::isfinite(mx)) continue;  // fully masked row stays zero
    double sum = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) {
      if (mask.empty() || mask[r * av.cols() + c]) {
        out(r, c) = std::exp(av(r, c) - mx);
        sum += out(r, c);
      }
    }
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= sum;
  }
  auto v = push(Op::softmax, a.id, a.id, std::move(out));
  nodes_[v.id].aux = std::move(mask);
  return v;
}

Var Tape::weighted_cross_entropy(Var scores, std::span<const std::uint8_t> labels, std::array<double, 2> class_weights,
                                 double scale) {
  const auto& s = value(scores);
  if (s.cols() != 2 || s.rows() != labels.size()) throw ShapeError("cross entropy expects N x 2 scores and N labels");
  double total = 0.0;
  for (std::size_t i = 0; i < s.rows(); ++i) {
    const std::size_t y = labels[i] ? 1 : 0;
    const double mx = std::max(s(i, 0), s(i, 1));
    const double lse = mx + std::log(std::exp(s(i, 0) - mx) + std::exp(s(i, 1) - mx));
    total += class_weights[y] * (lse - s(i, y));
  }
  Matrix out(1, 1, scale * total);
  auto v = push(Op::cross_entropy, scores.id, scores.id, std::move(out));
  auto& n = nodes_[v.id];
  n.aux.assign(labels.begin(), labels.end());
  n.weights = class_weights;
  n.scalar = scale;
  return v;
}

void Tape::backward(Var out) {
  if (value(out).rows() != 1 || value(out).cols() != 1) throw ShapeError("backward needs a scalar output");
  for (auto& n : nodes_) n.grad = Matrix();
  grad_ref(out.id).fill(1.0);
  for (std::size_t i = out.id + 1; i-- > 0;) {
    const auto& n = nodes_[i];
    if (n.op == Op::leaf || !n.requires_grad || n.grad.size() == 0) continue;
    propagate(i);
  }
}

void Tape::propagate(std::size_t id) {
  // Node references stay valid: the node vector does not grow during backward.
  const Node& n = nodes_[id];
  const Matrix& g = n.grad;
  const bool need_a = nodes_[n.a].requires_grad;
  const bool need_b = nodes_[n.b].requires_grad;

  switch (n.op) {
    case Op::leaf:
      break;
    case Op::matmul: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (need_a) kernels::gemm_nt(g.data(), b.data(), grad_ref(n.a).data(), g.rows(), g.cols(), b.rows(), true);
      if (need_b) kernels::gemm_tn(a.data(), g.data(), grad_ref(n.b).data(), a.rows(), a.cols(), g.cols());
      break;
    }
    case Op::matmul_nt: {
      const Matrix& a = nodes_[n.a].value;
      const Matrix& b = nodes_[n.b].value;
      if (need_a) kernels::gemm(g.data(), b.data(), grad_ref(n.a).data(), g.rows(), g.cols(), b.cols(), true);
      if (need_b) kernels::gemm_tn(g.data(), a.data(), grad_ref(n.b).data(), g.rows(), g.cols(), a.cols());
      break;
    }
    case Op::add:
      if (need_a) kernels::axpy(1.0, g.values(), grad_ref(n.a).values());
      if (need_b) kernels::axpy(1.0, g.values(), grad_ref(n.b).values());
      break;
    case Op::add_row:
      if (need_a) kernels::axpy(1.0, g.values(), grad_ref(n.a).values());
      if (need_b) {
        auto& gb = grad_ref(n.b);
        for (std::size_t r = 0; r < g.rows(); ++r) kernels::axpy(1.0, g.row(r), gb.values());
      }
      break;
    case Op::relu:
      if (need_a) {
        auto& ga = grad_ref(n.a);
        const auto y = n.value.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += y[i] > 0.0 ? g.values()[i] : 0.0;
      }
      break;
    case Op::leaky_relu:
      if (need_a) {
        auto& ga = grad_ref(n.a);
        const auto x = nodes_[n.a].value.values();
        for (std::size_t i = 0; i < g.size(); ++i) ga.values()[i] += g.values()[i] * (x[i] > 0.0 ? 1.0 : n.scalar);
      }
      break;
    case Op::scale:
      if (need_a) kernels::axpy(n.scalar, g.values(), grad_ref(n.a).values());
      break;
    case Op::outer_sum:
      if (need_a) {
        auto& gp = grad_ref(n.a);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) gp(i, 0) += g(i, j);
        }
      }
      if (need_b) {
        auto& gq = grad_ref(n.b);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < g.cols(); ++j) gq(j, 0) += g(i, j);
        }
      }
      break;
    case Op::softmax:
      if (need_a) {
        auto& ga = grad_ref(n.a);
        const Matrix& y = n.value;
        for (std::size_t r = 0; r < y.rows(); ++r) {
          double inner = 0.0;
          for (std::size_t c = 0; c < y.cols(); ++c) inner += y(r, c) * g(r, c);
          for (std::size_t c = 0; c < y.cols(); ++c) ga(r, c) += y(r, c) * (g(r, c) - inner);
        }
      }
      break;
    case Op::cross_entropy:
      if (need_a) {
        auto& ga = grad_ref(n.a);
        const Matrix& s = nodes_[n.a].value;
        const double upstream = g(0, 0) * n.scalar;
        for (std::size_t i = 0; i < s.rows(); ++i) {
          const std::size_t y = n.aux[i] ? 1 : 0;
          const double mx = std::max(s(i, 0), s(i, 1));
          const double e0 = std::exp(s(i, 0) - mx);
          const double e1 = std::exp(s(i, 1) - mx);
          const double p[2] = {e0 / (e0 + e1), e1 / (e0 + e1)};
          const double w = upstream * n.weights[y];
          ga(i, 0) += w * (p[0] - (y == 0 ? 1.0 : 0.0));
          ga(i, 1) += w * (p[1] - (y == 1 ? 1.0 : 0.0));
        }
      }
      break;
  }
}

}  // namespace canids::ad
