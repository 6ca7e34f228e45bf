#pragma once
// Minimal reverse-mode differentiation over dense matrices. A Tape records
// operations in evaluation order; backward() walks it in reverse.

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "canids/matrix.hpp"

namespace canids::ad {

struct Var {
  std::size_t id = 0;
};

class Tape {
 public:
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var parameter(Matrix value) { return leaf(std::move(value), true); }

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  /// Gradient accumulated by backward(); zeros when the node received none.
  Matrix grad(Var v) const;

  Var matmul(Var a, Var b);
  Var matmul_nt(Var a, Var b);  // a * b^T
  Var add(Var a, Var b);
  Var add_row(Var a, Var row);  // adds a 1 x n row to every row of a
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var scale(Var a, double s);
  /// out(i, j) = p(i) + q(j) for column vectors p, q.
  Var outer_sum(Var p, Var q);
  /// Row-wise softmax restricted to entries where mask is non-zero (row-major,
  /// rows*cols bytes); masked entries are exactly 0. Empty mask means dense.
  Var masked_softmax_rows(Var a, std::vector<std::uint8_t> mask = {});
  /// scale * sum_i w[y_i] * -log softmax(scores_i)[y_i], as a 1 x 1 value.
  Var weighted_cross_entropy(Var scores, std::span<const std::uint8_t> labels, std::array<double, 2> class_weights,
                             double scale);

  /// Seeds d(out)/d(out) = 1 for a 1 x 1 output and propagates to every node.
  void backward(Var out);

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

 private:
  enum class Op : std::uint8_t {
    leaf, matmul, matmul_nt, add, add_row, relu, leaky_relu, scale, outer_sum, softmax, cross_entropy
  };

  struct Node {
    Op op = Op::leaf;
    std::size_t a = 0;
    std::size_t b = 0;
    bool requires_grad = false;
    double scalar = 0.0;
    Matrix value;
    Matrix grad;
    std::vector<std::uint8_t> aux;  // softmax mask or class labels
    std::array<double, 2> weights{};
  };

  Var leaf(Matrix value, bool requires_grad);
  Var push(Op op, std::size_t a, std::size_t b, Matrix value);
  Matrix& grad_ref(std::size_t id);
  void propagate(std::size_t id);

  std::vector<Node> nodes_;
};

}  // namespace canids::ad
