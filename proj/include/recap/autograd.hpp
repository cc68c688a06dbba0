// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

namespace recap::ag {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Index = Eigen::Index;

/// One value on the tape. Leaves with requires_grad are parameters.
struct Node {
  Matrix value;
  Matrix grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  void accumulate(const Matrix& g);
};

/// Handle to a tape node. Copies share the node.
class Var {
 public:
  Var() = default;
  explicit Var(Matrix value, bool requires_grad = false);

  bool defined() const { return static_cast<bool>(node_); }
  const Matrix& value() const { return node_->value; }
  Matrix& mutable_value() { return node_->value; }
  const Matrix& grad() const { return node_->grad; }
  bool has_grad() const { return node_->grad.size() != 0; }
  bool requires_grad() const { return node_->requires_grad; }
  void zero_grad() { node_->grad.resize(0, 0); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double scalar() const { return node_->value(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

Var parameter(Matrix value);
Var constant(Matrix value);

/// Gradient recording is disabled while a guard is alive (per thread).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};
bool grad_enabled();

/// Reverse pass from a 1x1 root. Gradients accumulate into every reachable
/// node that requires grad.
void backward(const Var& root);

// Linear algebra
Var matmul(const Var& a, const Var& b);
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var sparse_left_multiply(std::shared_ptr<const SparseMatrix> lhs, const Var& x);

// Elementwise and broadcasting
Var add(const Var& a, const Var& b);
Var add_row(const Var& a, const Var& row);        // row: 1 x cols
Var add_tiled(const Var& a, const Var& block);    // a row i gets block row i % block.rows()
Var hadamard(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var scale_by(const Var& a, const Var& factor);    // factor: 1 x 1
Var gelu(const Var& a);
Var tanh(const Var& a);
Var clip(const Var& a, double lo, double hi);
/// exp(-r / exp(log_tau)) elementwise for a constant column r.
Var recency_decay(const Eigen::VectorXd& recency, const Var& log_tau);
Var sum(const Var& a);
Var detach(const Var& a);
Var dropout(const Var& a, double p, bool training, std::mt19937_64& rng);

// Layout
Var gather_rows(const Var& a, std::span<const Index> rows);
Var concat_rows(const std::vector<Var>& parts);
Var concat_cols(const std::vector<Var>& parts);
/// out = base, then out(row[i], col[i]) += values(i, 0).
Var scatter_add(const Var& base, const Var& values, std::span<const Index> rows,
                std::span<const Index> cols);

// Normalization / attention / losses
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
/// Multi-head scaled dot-product attention over `batch` sequences of
/// `seq_len` rows each. Keys with key_mask == 0 receive exactly zero weight.
Var masked_attention(const Var& q, const Var& k, const Var& v, Index seq_len, int heads,
                     std::span<const std::uint8_t> key_mask);
/// Mean over rows of -log softmax(logits)[row, target].
Var cross_entropy(const Var& logits, std::span<const Index> targets);

}  // namespace recap::ag
