// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <functional>
#include <random>

#include "recap/autograd.hpp"

namespace recap::ag {
namespace {

using Fn = std::function<Var(const std::vector<Var>&)>;

// Central differences on every entry of every input.
void expect_gradients(const Fn& f, std::vector<Matrix> inputs, double tol = 1e-6) {
  std::vector<Var> vars;
  for (const auto& m : inputs) vars.push_back(parameter(m));
  backward(f(vars));
  const double h = 1e-6;
  for (std::size_t i = 0; i < inputs.size(); ++i) {
    ASSERT_TRUE(vars[i].has_grad()) << "input " << i;
    for (Index r = 0; r < inputs[i].rows(); ++r)
      for (Index c = 0; c < inputs[i].cols(); ++c) {
        auto eval = [&](double delta) {
          std::vector<Var> v;
          for (std::size_t j = 0; j < inputs.size(); ++j) {
            Matrix m = inputs[j];
            if (j == i) m(r, c) += delta;
            v.push_back(constant(m));
          }
          return f(v).scalar();
        };
        const double numeric = (eval(h) - eval(-h)) / (2 * h);
        EXPECT_NEAR(vars[i].grad()(r, c), numeric, tol * std::max(1.0, std::abs(numeric)))
            << "input " << i << " at (" << r << "," << c << ")";
      }
  }
}

Matrix rnd(Index r, Index c, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  Matrix m(r, c);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = n(rng);
  return m;
}

// Weighted sum so every output entry gets a distinct upstream gradient.
Var weighted(const Var& x, unsigned seed = 99) { return sum(hadamard(x, constant(rnd(x.rows(), x.cols(), seed)))); }

TEST(Autograd, Matmul) {
  expect_gradients([](auto& v) { return weighted(matmul(v[0], v[1])); }, {rnd(3, 4, 1), rnd(4, 2, 2)});
  expect_gradients([](auto& v) { return weighted(matmul_nt(v[0], v[1])); }, {rnd(3, 4, 3), rnd(5, 4, 4)});
}

TEST(Autograd, Broadcasts) {
  expect_gradients([](auto& v) { return weighted(add_row(v[0], v[1])); }, {rnd(3, 4, 5), rnd(1, 4, 6)});
  expect_gradients([](auto& v) { return weighted(add_tiled(v[0], v[1])); }, {rnd(6, 3, 7), rnd(2, 3, 8)});
  expect_gradients([](auto& v) { return weighted(scale_by(v[0], v[1])); }, {rnd(3, 2, 9), rnd(1, 1, 10)});
  expect_gradients([](auto& v) { return weighted(add(v[0], hadamard(v[0], v[1]))); }, {rnd(3, 2, 11), rnd(3, 2, 12)});
}

TEST(Autograd, Nonlinearities) {
  expect_gradients([](auto& v) { return weighted(gelu(v[0])); }, {rnd(4, 5, 13)});
  expect_gradients([](auto& v) { return weighted(tanh(v[0])); }, {rnd(4, 5, 14)});
  expect_gradients([](auto& v) { return weighted(clip(v[0], -0.5, 0.5)); }, {rnd(4, 5, 15)});
}

TEST(Autograd, RecencyDecay) {
  Eigen::VectorXd r(4);
  r << 1, 2, 5, 10;
  expect_gradients([&](auto& v) { return weighted(recency_decay(r, v[0])); }, {rnd(1, 1, 16)});
}

TEST(Autograd, Layout) {
  std::vector<Index> rows = {2, 0, 2, 1};
  expect_gradients([&](auto& v) { return weighted(gather_rows(v[0], rows)); }, {rnd(3, 2, 17)});
  expect_gradients([](auto& v) { return weighted(concat_rows({v[0], v[1]})); }, {rnd(2, 3, 18), rnd(1, 3, 19)});
  expect_gradients([](auto& v) { return weighted(concat_cols({v[0], v[1]})); }, {rnd(2, 3, 20), rnd(2, 1, 21)});
  std::vector<Index> sr = {0, 1, 0}, sc = {2, 0, 2};
  expect_gradients([&](auto& v) { return weighted(scatter_add(v[0], v[1], sr, sc)); }, {rnd(2, 3, 22), rnd(3, 1, 23)});
}

TEST(Autograd, LayerNorm) {
  expect_gradients([](auto& v) { return weighted(layer_norm(v[0], v[1], v[2])); },
                   {rnd(3, 6, 24), rnd(1, 6, 25), rnd(1, 6, 26)}, 1e-5);
}

TEST(Autograd, LayerNormStatistics) {
  Var y = layer_norm(constant(rnd(5, 8, 27)), constant(Matrix::Ones(1, 8)), constant(Matrix::Zero(1, 8)));
  for (Index r = 0; r < 5; ++r) {
    EXPECT_NEAR(y.value().row(r).mean(), 0.0, 1e-12);
    EXPECT_NEAR(y.value().row(r).squaredNorm() / 8, 1.0, 1e-4);
  }
}

TEST(Autograd, MaskedAttention) {
  std::vector<std::uint8_t> mask = {1, 0, 1, 1, 1, 1, 0, 1};
  expect_gradients([&](auto& v) { return weighted(masked_attention(v[0], v[1], v[2], 4, 2, mask)); },
                   {rnd(8, 4, 28), rnd(8, 4, 29), rnd(8, 4, 30)}, 1e-5);
}

TEST(Autograd, MaskedKeysAreIgnoredExactly) {
  std::vector<std::uint8_t> mask = {1, 0, 1};
  Matrix q = rnd(3, 4, 31), k = rnd(3, 4, 32), v = rnd(3, 4, 33);
  Matrix out1 = masked_attention(constant(q), constant(k), constant(v), 3, 2, mask).value();
  k.row(1).setConstant(1e3);
  v.row(1).setConstant(-7.0);
  Matrix out2 = masked_attention(constant(q), constant(k), constant(v), 3, 2, mask).value();
  EXPECT_EQ(out1, out2);
}

TEST(Autograd, CrossEntropy) {
  std::vector<Index> t = {1, 0, 4};
  expect_gradients([&](auto& v) { return cross_entropy(v[0], t); }, {rnd(3, 5, 34)});
}

TEST(Autograd, CrossEntropyMatchesLogSumExp) {
  Matrix logits = rnd(6, 9, 35) * 3.0;
  std::vector<Index> t = {0, 8, 3, 3, 5, 1};
  double expect = 0;
  for (Index r = 0; r < 6; ++r) {
    double lse = 0;
    for (Index c = 0; c < 9; ++c) lse += std::exp(logits(r, c));
    expect += std::log(lse) - logits(r, t[static_cast<std::size_t>(r)]);
  }
  EXPECT_NEAR(cross_entropy(constant(logits), t).scalar(), expect / 6, 1e-12);
}

TEST(Autograd, SparseLeftMultiply) {
  auto a = std::make_shared<SparseMatrix>(3, 3);
  a->insert(0, 1) = 0.5;
  a->insert(0, 2) = 0.5;
  a->insert(2, 0) = 1.0;
  a->makeCompressed();
  expect_gradients([&](auto& v) { return weighted(sparse_left_multiply(a, v[0])); }, {rnd(3, 2, 36)});
}

TEST(Autograd, DetachAndNoGrad) {
  Var p = parameter(rnd(2, 2, 37));
  backward(sum(add(detach(p), constant(Matrix::Ones(2, 2)))));
  EXPECT_FALSE(p.has_grad());
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    Var y = matmul(p, p);
    EXPECT_TRUE(y.node()->parents.empty());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Autograd, DropoutIsIdentityAtInference) {
  std::mt19937_64 rng(1);
  Matrix x = rnd(4, 4, 38);
  EXPECT_EQ(dropout(constant(x), 0.5, false, rng).value(), x);
  Matrix y = dropout(constant(x), 0.5, true, rng).value();
  for (Index i = 0; i < x.size(); ++i)
    EXPECT_TRUE(y.data()[i] == 0.0 || std::abs(y.data()[i] - 2 * x.data()[i]) < 1e-12);
}

}  // namespace
}  // namespace recap::ag
