// SPDX-License-Identifier: Apache-2.0
#include "recap/autograd.hpp"

#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace recap::ag {

namespace {

thread_local bool g_grad_enabled = true;

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

Var make_result(Matrix value, std::vector<Var> inputs, std::function<void(Node&)> fn) {
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool needs = false;
  for (const auto& in : inputs) needs = needs || in.requires_grad();
  if (!needs) return out;
  auto& node = *out.node();
  node.requires_grad = true;
  node.parents.reserve(inputs.size());
  for (const auto& in : inputs) node.parents.push_back(in.node());
  node.backward_fn = std::move(fn);
  return out;
}

inline Node& parent(Node& n, std::size_t i) { return *n.parents[i]; }

}  // namespace

void Node::accumulate(const Matrix& g) {
  if (grad.size() == 0) {
    grad = g;
  } else {
    grad += g;
  }
}

Var::Var(Matrix value, bool requires_grad) : node_(std::make_shared<Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
}

Var parameter(Matrix value) { return Var(std::move(value), true); }
Var constant(Matrix value) { return Var(std::move(value), false); }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }
bool grad_enabled() { return g_grad_enabled; }

void backward(const Var& root) {
  require(root.rows() == 1 && root.cols() == 1, "backward: root must be 1x1");
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack;
  stack.emplace_back(root.node().get(), 0);
  visited.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->accumulate(Matrix::Ones(1, 1));
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backward_fn && n->grad.size() != 0) n->backward_fn(*n);
  }
}

// ---------------------------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  require(a.cols() == b.rows(), "matmul: inner dimension mismatch");
  Matrix out = a.value() * b.value();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value.transpose());
    if (pb.requires_grad) pb.accumulate(pa.value.transpose() * n.grad);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  require(a.cols() == b.cols(), "matmul_nt: inner dimension mismatch");
  Matrix out = a.value() * b.value().transpose();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pb.value);
    if (pb.requires_grad) pb.accumulate(n.grad.transpose() * pa.value);
  });
}

Var sparse_left_multiply(std::shared_ptr<const SparseMatrix> lhs, const Var& x) {
  require(lhs->cols() == x.rows(), "sparse_left_multiply: dimension mismatch");
  Matrix out = (*lhs) * x.value();
  return make_result(std::move(out), {x}, [lhs](Node& n) {
    Node& px = parent(n, 0);
    if (px.requires_grad) px.accumulate(Matrix(lhs->transpose() * n.grad));
  });
}

Var add(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  Matrix out = a.value() + b.value();
  return make_result(std::move(out), {a, b}, [](Node& n) {
    for (std::size_t i = 0; i < 2; ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) p.accumulate(n.grad);
    }
  });
}

Var add_row(const Var& a, const Var& row) {
  require(row.rows() == 1 && row.cols() == a.cols(), "add_row: shape mismatch");
  Matrix out = a.value().rowwise() + row.value().row(0);
  return make_result(std::move(out), {a, row}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pr = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad);
    if (pr.requires_grad) pr.accumulate(Matrix(n.grad.colwise().sum()));
  });
}

Var add_tiled(const Var& a, const Var& block) {
  const Index period = block.rows();
  require(block.cols() == a.cols() && period > 0 && a.rows() % period == 0,
          "add_tiled: shape mismatch");
  Matrix out = a.value();
  for (Index i = 0; i < out.rows(); ++i) out.row(i) += block.value().row(i % period);
  return make_result(std::move(out), {a, block}, [period](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad);
    if (pb.requires_grad) {
      Matrix g = Matrix::Zero(period, n.grad.cols());
      for (Index i = 0; i < n.grad.rows(); ++i) g.row(i % period) += n.grad.row(i);
      pb.accumulate(g);
    }
  });
}

Var hadamard(const Var& a, const Var& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "hadamard: shape mismatch");
  Matrix out = a.value().cwiseProduct(b.value());
  return make_result(std::move(out), {a, b}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pb = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(pb.value));
    if (pb.requires_grad) pb.accumulate(n.grad.cwiseProduct(pa.value));
  });
}

Var scale(const Var& a, double factor) {
  Matrix out = a.value() * factor;
  return make_result(std::move(out), {a}, [factor](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.requires_grad) pa.accumulate(n.grad * factor);
  });
}

Var scale_by(const Var& a, const Var& factor) {
  require(factor.rows() == 1 && factor.cols() == 1, "scale_by: factor must be 1x1");
  Matrix out = a.value() * factor.scalar();
  return make_result(std::move(out), {a, factor}, [](Node& n) {
    Node& pa = parent(n, 0);
    Node& pf = parent(n, 1);
    if (pa.requires_grad) pa.accumulate(n.grad * pf.value(0, 0));
    if (pf.requires_grad) {
      Matrix g(1, 1);
      g(0, 0) = n.grad.cwiseProduct(pa.value).sum();
      pf.accumulate(g);
    }
  });
}

Var gelu(const Var& a) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  constexpr double kInvSqrt2Pi = 0.39894228040143267794;
  const Matrix& x = a.value();
  Matrix out(x.rows(), x.cols());
  Matrix d(x.rows(), x.cols());
  for (Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
    out.data()[i] = v * cdf;
    d.data()[i] = cdf + v * kInvSqrt2Pi * std::exp(-0.5 * v * v);
  }
  return make_result(std::move(out), {a}, [d = std::move(d)](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(d));
  });
}

Var tanh(const Var& a) {
  Matrix out = a.value().array().tanh().matrix();
  return make_result(out, {a}, [out](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.requires_grad)
      pa.accumulate(n.grad.cwiseProduct((1.0 - out.array().square()).matrix()));
  });
}

Var clip(const Var& a, double lo, double hi) {
  Matrix out = a.value().cwiseMax(lo).cwiseMin(hi);
  return make_result(std::move(out), {a}, [lo, hi](Node& n) {
    Node& pa = parent(n, 0);
    if (!pa.requires_grad) return;
    Matrix g = n.grad;
    for (Index i = 0; i < g.size(); ++i) {
      const double x = pa.value.data()[i];
      if (x <= lo || x >= hi) g.data()[i] = 0.0;
    }
    pa.accumulate(g);
  });
}

Var recency_decay(const Eigen::VectorXd& recency, const Var& log_tau) {
  require(log_tau.rows() == 1 && log_tau.cols() == 1, "recency_decay: log_tau must be 1x1");
  const double tau = std::exp(log_tau.scalar());
  Matrix out(recency.size(), 1);
  for (Index i = 0; i < recency.size(); ++i) out(i, 0) = std::exp(-recency[i] / tau);
  return make_result(out, {log_tau}, [recency, out, tau](Node& n) {
    Node& pt = parent(n, 0);
    if (!pt.requires_grad) return;
    // d/dθ exp(-r e^{-θ}) = exp(-r/τ) * r/τ
    double acc = 0.0;
    for (Index i = 0; i < recency.size(); ++i) acc += n.grad(i, 0) * out(i, 0) * recency[i] / tau;
    Matrix g(1, 1);
    g(0, 0) = acc;
    pt.accumulate(g);
  });
}

Var sum(const Var& a) {
  Matrix out(1, 1);
  out(0, 0) = a.value().sum();
  const Index r = a.rows(), c = a.cols();
  return make_result(std::move(out), {a}, [r, c](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.requires_grad) pa.accumulate(Matrix::Constant(r, c, n.grad(0, 0)));
  });
}

Var detach(const Var& a) { return constant(a.value()); }

Var dropout(const Var& a, double p, bool training, std::mt19937_64& rng) {
  if (!training || p <= 0.0) return a;
  require(p < 1.0, "dropout: p must be < 1");
  std::bernoulli_distribution keep(1.0 - p);
  const double inv = 1.0 / (1.0 - p);
  Matrix mask(a.rows(), a.cols());
  for (Index i = 0; i < mask.size(); ++i) mask.data()[i] = keep(rng) ? inv : 0.0;
  Matrix out = a.value().cwiseProduct(mask);
  return make_result(std::move(out), {a}, [mask = std::move(mask)](Node& n) {
    Node& pa = parent(n, 0);
    if (pa.requires_grad) pa.accumulate(n.grad.cwiseProduct(mask));
  });
}

Var gather_rows(const Var& a, std::span<const Index> rows) {
  std::vector<Index> idx(rows.begin(), rows.end());
  Matrix out(static_cast<Index>(idx.size()), a.cols());
  for (std::size_t i = 0; i < idx.size(); ++i) {
    require(idx[i] >= 0 && idx[i] < a.rows(), "gather_rows: index out of range");
    out.row(static_cast<Index>(i)) = a.value().row(idx[i]);
  }
  return make_result(std::move(out), {a}, [idx = std::move(idx)](Node& n) {
    Node& pa = parent(n, 0);
    if (!pa.requires_grad) return;
    if (pa.grad.size() == 0) pa.grad = Matrix::Zero(pa.value.rows(), pa.value.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) pa.grad.row(idx[i]) += n.grad.row(static_cast<Index>(i));
  });
}

Var concat_rows(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_rows: no parts");
  Index total = 0;
  for (const auto& p : parts) {
    require(p.cols() == parts[0].cols(), "concat_rows: column mismatch");
    total += p.rows();
  }
  Matrix out(total, parts[0].cols());
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleRows(at, p.rows()) = p.value();
    at += p.rows();
  }
  return make_result(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) p.accumulate(Matrix(n.grad.middleRows(offsets[i], p.value.rows())));
    }
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  require(!parts.empty(), "concat_cols: no parts");
  Index total = 0;
  for (const auto& p : parts) {
    require(p.rows() == parts[0].rows(), "concat_cols: row mismatch");
    total += p.cols();
  }
  Matrix out(parts[0].rows(), total);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    out.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return make_result(std::move(out), parts, [offsets](Node& n) {
    for (std::size_t i = 0; i < n.parents.size(); ++i) {
      Node& p = parent(n, i);
      if (p.requires_grad) p.accumulate(Matrix(n.grad.middleCols(offsets[i], p.value.cols())));
    }
  });
}

Var scatter_add(const Var& base, const Var& values, std::span<const Index> rows,
                std::span<const Index> cols) {
  require(values.cols() == 1 && static_cast<std::size_t>(values.rows()) == rows.size() &&
              rows.size() == cols.size(),
          "scatter_add: shape mismatch");
  std::vector<Index> r(rows.begin(), rows.end());
  std::vector<Index> c(cols.begin(), cols.end());
  Matrix out = base.value();
  for (std::size_t i = 0; i < r.size(); ++i) out(r[i], c[i]) += values.value()(static_cast<Index>(i), 0);
  return make_result(std::move(out), {base, values}, [r = std::move(r), c = std::move(c)](Node& n) {
    Node& pb = parent(n, 0);
    Node& pv = parent(n, 1);
    if (pb.requires_grad) pb.accumulate(n.grad);
    if (pv.requires_grad) {
      Matrix g(static_cast<Index>(r.size()), 1);
      for (std::size_t i = 0; i < r.size(); ++i) g(static_cast<Index>(i), 0) = n.grad(r[i], c[i]);
      pv.accumulate(g);
    }
  });
}

Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps) {
  const Index rows = x.rows(), cols = x.cols();
  require(gamma.cols() == cols && beta.cols() == cols && gamma.rows() == 1 && beta.rows() == 1,
          "layer_norm: shape mismatch");
  Matrix xhat(rows, cols);
  Eigen::VectorXd inv_std(rows);
  for (Index i = 0; i < rows; ++i) {
    const double mean = x.value().row(i).mean();
    const double var = (x.value().row(i).array() - mean).square().mean();
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    xhat.row(i) = (x.value().row(i).array() - mean) * inv_std[i];
  }
  Matrix out = xhat;
  for (Index i = 0; i < rows; ++i)
    out.row(i) = xhat.row(i).cwiseProduct(gamma.value().row(0)) + beta.value().row(0);
  return make_result(std::move(out), {x, gamma, beta},
                     [xhat = std::move(xhat), inv_std = std::move(inv_std)](Node& n) {
    Node& px = parent(n, 0);
    Node& pg = parent(n, 1);
    Node& pb = parent(n, 2);
    const Index cols = xhat.cols();
    if (pg.requires_grad) pg.accumulate(Matrix(n.grad.cwiseProduct(xhat).colwise().sum()));
    if (pb.requires_grad) pb.accumulate(Matrix(n.grad.colwise().sum()));
    if (px.requires_grad) {
      Matrix gx(xhat.rows(), cols);
      for (Index i = 0; i < xhat.rows(); ++i) {
        Eigen::RowVectorXd dxhat = n.grad.row(i).cwiseProduct(pg.value.row(0));
        const double m1 = dxhat.mean();
        const double m2 = dxhat.cwiseProduct(xhat.row(i)).mean();
        gx.row(i) = (dxhat.array() - m1 - xhat.row(i).array() * m2) * inv_std[i];
      }
      px.accumulate(gx);
    }
  });
}

Var masked_attention(const Var& q, const Var& k, const Var& v, Index seq_len, int heads,
                     std::span<const std::uint8_t> key_mask) {
  const Index total = q.rows(), width = q.cols();
  require(k.rows() == total && v.rows() == total && k.cols() == width && v.cols() == width,
          "masked_attention: shape mismatch");
  require(seq_len > 0 && total % seq_len == 0, "masked_attention: rows not a multiple of seq_len");
  require(heads > 0 && width % heads == 0, "masked_attention: width not divisible by heads");
  require(static_cast<Index>(key_mask.size()) == total, "masked_attention: mask size mismatch");
  const Index batch = total / seq_len;
  const Index dh = width / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  std::vector<std::uint8_t> mask(key_mask.begin(), key_mask.end());

  // probs laid out [batch][head] blocks of seq_len x seq_len
  auto probs = std::make_shared<std::vector<Matrix>>(batch * heads);
  Matrix out = Matrix::Zero(total, width);
  for (Index b = 0; b < batch; ++b) {
    const Index base = b * seq_len;
    for (int h = 0; h < heads; ++h) {
      const auto qb = q.value().block(base, h * dh, seq_len, dh);
      const auto kb = k.value().block(base, h * dh, seq_len, dh);
      const auto vb = v.value().block(base, h * dh, seq_len, dh);
      Matrix s = (qb * kb.transpose()) * inv_sqrt;
      Matrix p = Matrix::Zero(seq_len, seq_len);
      for (Index i = 0; i < seq_len; ++i) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Index j = 0; j < seq_len; ++j)
          if (mask[base + j]) mx = std::max(mx, s(i, j));
        if (!std::isfinite(mx)) continue;
        double z = 0.0;
        for (Index j = 0; j < seq_len; ++j) {
          if (!mask[base + j]) continue;
          p(i, j) = std::exp(s(i, j) - mx);
          z += p(i, j);
        }
        p.row(i) /= z;
      }
      out.block(base, h * dh, seq_len, dh) = p * vb;
      (*probs)[b * heads + h] = std::move(p);
    }
  }
  return make_result(std::move(out), {q, k, v},
                     [probs, seq_len, heads, dh, inv_sqrt, batch](Node& n) {
    Node& pq = parent(n, 0);
    Node& pk = parent(n, 1);
    Node& pv = parent(n, 2);
    Matrix gq = Matrix::Zero(pq.value.rows(), pq.value.cols());
    Matrix gk = Matrix::Zero(gq.rows(), gq.cols());
    Matrix gv = Matrix::Zero(gq.rows(), gq.cols());
    for (Index b = 0; b < batch; ++b) {
      const Index base = b * seq_len;
      for (int h = 0; h < heads; ++h) {
        const Matrix& p = (*probs)[b * heads + h];
        const auto go = n.grad.block(base, h * dh, seq_len, dh);
        const auto qb = pq.value.block(base, h * dh, seq_len, dh);
        const auto kb = pk.value.block(base, h * dh, seq_len, dh);
        const auto vb = pv.value.block(base, h * dh, seq_len, dh);
        gv.block(base, h * dh, seq_len, dh) += p.transpose() * go;
        Matrix dp = go * vb.transpose();
        Matrix ds(seq_len, seq_len);
        for (Index i = 0; i < seq_len; ++i) {
          const double dot = p.row(i).dot(dp.row(i));
          ds.row(i) = p.row(i).cwiseProduct((dp.row(i).array() - dot).matrix());
        }
        ds *= inv_sqrt;
        gq.block(base, h * dh, seq_len, dh) += ds * kb;
        gk.block(base, h * dh, seq_len, dh) += ds.transpose() * qb;
      }
    }
    if (pq.requires_grad) pq.accumulate(gq);
    if (pk.requires_grad) pk.accumulate(gk);
    if (pv.requires_grad) pv.accumulate(gv);
  });
}

Var cross_entropy(const Var& logits, std::span<const Index> targets) {
  const Index rows = logits.rows();
  require(static_cast<Index>(targets.size()) == rows && rows > 0, "cross_entropy: target count");
  std::vector<Index> tgt(targets.begin(), targets.end());
  Matrix probs(rows, logits.cols());
  double loss = 0.0;
  for (Index i = 0; i < rows; ++i) {
    require(tgt[i] >= 0 && tgt[i] < logits.cols(), "cross_entropy: target out of range");
    const double mx = logits.value().row(i).maxCoeff();
    probs.row(i) = (logits.value().row(i).array() - mx).exp().matrix();
    const double z = probs.row(i).sum();
    probs.row(i) /= z;
    loss += (mx + std::log(z)) - logits.value()(i, tgt[i]);
  }
  Matrix out(1, 1);
  out(0, 0) = loss / static_cast<double>(rows);
  return make_result(std::move(out), {logits},
                     [probs = std::move(probs), tgt = std::move(tgt)](Node& n) {
    Node& pl = parent(n, 0);
    if (!pl.requires_grad) return;
    Matrix g = probs;
    for (std::size_t i = 0; i < tgt.size(); ++i) g(static_cast<Index>(i), tgt[i]) -= 1.0;
    g *= n.grad(0, 0) / static_cast<double>(tgt.size());
    pl.accumulate(g);
  });
}

}  // namespace recap::ag
