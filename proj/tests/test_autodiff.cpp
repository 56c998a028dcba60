// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>

#include "op_gradchecks.hpp"
#include "test_util.hpp"
#include "tagan/autodiff.hpp"

using namespace tagan;
using test::close;

namespace {

template <typename S>
ad::Tensor<S> make_leaf(ad::Graph<S>& g, Shape shape, std::vector<S> data,
                        bool needs_grad = false) {
  return g.leaf(TensorData<S>(std::move(shape), std::move(data)), needs_grad);
}

}  // namespace

TEST_CASE("matmul identity and projector") {
  ad::Graph<double> g;
  auto eye = make_leaf<double>(g, {2, 2}, {1, 0, 0, 1});
  auto a = make_leaf<double>(g, {2, 2}, {1, 2, 3, 4});
  auto c = ad::matmul(eye, a);
  CHECK(c.value() == std::vector<double>{1, 2, 3, 4});

  auto proj = make_leaf<double>(g, {2, 2}, {1, 0, 0, 0});
  auto b = make_leaf<double>(g, {2, 2}, {5, 6, 7, 8});
  CHECK(ad::matmul(proj, b).value() == std::vector<double>{5, 6, 0, 0});
}

TEST_CASE("matmul rejects mismatched inner dimensions") {
  ad::Graph<double> g;
  auto a = make_leaf<double>(g, {2, 3}, {1, 2, 3, 4, 5, 6});
  auto b = make_leaf<double>(g, {2, 2}, {1, 2, 3, 4});
  CHECK_THROWS_AS(ad::matmul(a, b), DimensionError);
}

TEST_CASE("conv2d scalar scaling") {
  ad::Graph<double> g;
  auto x = make_leaf<double>(g, {1, 3, 3}, std::vector<double>(9, 1.0));
  auto k = make_leaf<double>(g, {1, 1, 1, 1}, {2.0});
  auto y = ad::conv2d(x, k, 1, 0);
  CHECK(y.shape() == Shape{1, 3, 3});
  for (double v : y.value()) CHECK(v == doctest::Approx(2.0));
}

TEST_CASE("conv2d impulse response reproduces the kernel") {
  // Cross-correlation convention: the response to a centered delta is the
  // kernel rotated 180 degrees; with a symmetric kernel it is the kernel
  // itself.
  ad::Graph<double> g;
  std::vector<double> delta(25, 0.0);
  delta[12] = 1.0;  // center of 5x5
  auto x = make_leaf<double>(g, {1, 5, 5}, std::move(delta));

  std::vector<double> kvals = {1, 2, 3, 4, 5, 6, 7, 8, 9};
  auto k = make_leaf<double>(g, {1, 1, 3, 3}, std::vector<double>(kvals));
  auto y = ad::conv2d(x, k, 1, 2);  // pad = k-1
  CHECK(y.shape() == Shape{1, 7, 7});
  // The 180-degree rotated stamp sits centered in the output.
  for (int u = 0; u < 3; ++u) {
    for (int v = 0; v < 3; ++v) {
      const double got = y.value()[static_cast<std::size_t>(u + 2) * 7 + (v + 2)];
      CHECK(got == doctest::Approx(kvals[static_cast<std::size_t>(2 - u) * 3 + (2 - v)]));
    }
  }

  // Symmetric kernel: the stamp equals the kernel exactly.
  auto ks = make_leaf<double>(g, {1, 1, 3, 3}, {0, 1, 0, 1, 5, 1, 0, 1, 0});
  std::vector<double> delta2(25, 0.0);
  delta2[12] = 1.0;
  auto x2 = make_leaf<double>(g, {1, 5, 5}, std::move(delta2));
  auto y2 = ad::conv2d(x2, ks, 1, 2);
  CHECK(y2.value()[static_cast<std::size_t>(3) * 7 + 3] == doctest::Approx(5.0));
  CHECK(y2.value()[static_cast<std::size_t>(2) * 7 + 3] == doctest::Approx(1.0));
}

TEST_CASE("conv2d rejects kernels larger than the padded input") {
  ad::Graph<double> g;
  auto x = make_leaf<double>(g, {1, 3, 3}, std::vector<double>(9, 1.0));
  auto k = make_leaf<double>(g, {1, 1, 5, 5}, std::vector<double>(25, 1.0));
  CHECK_THROWS_AS(ad::conv2d(x, k, 1, 0), DimensionError);
}

TEST_CASE("global_avg_pool examples") {
  ad::Graph<double> g;
  auto cst = make_leaf<double>(g, {2, 3, 3}, std::vector<double>(18, 0.7));
  for (double v : ad::global_avg_pool(cst).value()) {
    CHECK(v == doctest::Approx(0.7));
  }

  auto x = make_leaf<double>(g, {1, 2, 2}, {1, 2, 3, 4}, true);
  auto pooled = ad::global_avg_pool(x);
  CHECK(pooled.value()[0] == doctest::Approx(2.5));

  g.backward(ad::sum(pooled));
  for (double v : x.grad()) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("sigmoid examples") {
  ad::Graph<double> g;
  auto x = make_leaf<double>(g, {3}, {0.0, 2.0, -40.0});
  auto y = ad::sigmoid(x);
  CHECK(y.value()[0] == doctest::Approx(0.5));
  CHECK(y.value()[1] == doctest::Approx(0.8807970779778823).epsilon(1e-12));
  CHECK(y.value()[2] > 0.0);
  CHECK(y.value()[2] <= 1e-15);
  CHECK(std::isfinite(y.value()[2]));
}

TEST_CASE("softmax examples and simplex property") {
  ad::Graph<double> g;
  auto single = ad::softmax(make_leaf<double>(g, {1}, {123.0}));
  CHECK(single.value()[0] == doctest::Approx(1.0));

  auto equal = ad::softmax(make_leaf<double>(g, {4}, {3.3, 3.3, 3.3, 3.3}));
  for (double v : equal.value()) CHECK(v == doctest::Approx(0.25));

  auto pair = ad::softmax(make_leaf<double>(g, {2}, {1.0, 0.0}));
  CHECK(pair.value()[0] == doctest::Approx(0.7310585786300049).epsilon(1e-10));
  CHECK(pair.value()[1] == doctest::Approx(0.2689414213699951).epsilon(1e-10));

  Rng rng(99);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 1 + static_cast<int>(rng.uniform_index(9));
    std::vector<double> vals(static_cast<std::size_t>(n));
    for (auto& v : vals) v = rng.uniform(-1e3, 1e3);
    auto sm = ad::softmax(make_leaf<double>(g, {n}, std::move(vals)));
    double total = 0;
    for (double v : sm.value()) {
      CHECK(v >= 0.0);
      total += v;
    }
    CHECK(std::abs(total - 1.0) <= 1e-9);
  }
}

TEST_CASE("backward basics: identity, hand gradient, fan-out") {
  ad::Graph<double> g;
  auto leaf = make_leaf<double>(g, {1}, {3.0}, true);
  g.backward(leaf);
  CHECK(leaf.grad()[0] == doctest::Approx(1.0));

  ad::Graph<double> g2;
  auto x = make_leaf<double>(g2, {3}, {1, 2, 3}, true);
  g2.backward(ad::sum(ad::mul(x, x)));
  CHECK(x.grad() == std::vector<double>{2, 4, 6});

  ad::Graph<double> g3;
  auto z = make_leaf<double>(g3, {1}, {5.0}, true);
  g3.backward(ad::add(z, z));
  CHECK(z.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("backward accumulates until grads are zeroed") {
  ad::Graph<double> g;
  auto x = make_leaf<double>(g, {2}, {1.0, 2.0}, true);
  auto loss = ad::sum(ad::mul(x, x));
  g.backward(loss);
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(4.0));  // 2x accumulated twice
  g.zero_grad();
  g.backward(loss);
  CHECK(x.grad()[0] == doctest::Approx(2.0));
}

TEST_CASE("backward requires a scalar loss") {
  ad::Graph<double> g;
  auto x = make_leaf<double>(g, {2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(g.backward(ad::mul(x, x)), ContractError);
}

TEST_CASE("shared subexpression DAG matches duplicated tree") {
  // y = f(x) used twice vs. computed twice: gradients must agree exactly.
  auto run = [](bool share) {
    ad::Graph<double> g;
    auto x = g.leaf(TensorData<double>({3}, {0.3, -0.7, 1.2}), true);
    auto f1 = ad::tanh(ad::mul_scalar(x, 1.7));
    auto f2 = share ? f1 : ad::tanh(ad::mul_scalar(x, 1.7));
    auto loss = ad::sum(ad::mul(f1, f2));
    g.backward(loss);
    return x.grad();
  };
  const auto dag = run(true);
  const auto tree = run(false);
  for (std::size_t i = 0; i < dag.size(); ++i) {
    CHECK(dag[i] == doctest::Approx(tree[i]).epsilon(1e-14));
  }
}

TEST_CASE("ops are deterministic") {
  auto run = [] {
    ad::Graph<float> g;
    Rng rng(1234);
    TensorData<float> x({3, 8, 8});
    for (auto& v : x.data) v = static_cast<float>(rng.normal());
    TensorData<float> k({4, 3, 3, 3});
    for (auto& v : k.data) v = static_cast<float>(rng.normal(0, 0.1));
    auto y = ad::conv2d(g.constant(x), g.constant(k), 2, 1);
    return y.value();
  };
  CHECK(run() == run());
}

TEST_CASE("debug mode trips on non-finite values") {
  ad::Graph<double> g;
  g.debug_checks = true;
  auto x = make_leaf<double>(g, {1}, {-1.0});
  CHECK_THROWS_AS(ad::log(x), NumericError);
}

TEST_CASE("finite differences pass for every differentiable op") {
  for (const auto& check : test::run_all_op_gradchecks()) {
    INFO(check.name, ": ", check.result.describe());
    CHECK(check.result.ok);
    CHECK(check.result.checked > 0);
  }
}

TEST_CASE("matmul gradient matches finite differences at random 3x3") {
  auto named = test::check_op(
      "matmul_sum", {{3, 3}, {3, 3}},
      [](std::vector<ad::Tensor<double>>& x) {
        return ad::sum(ad::matmul(x[0], x[1]));
      },
      /*seed=*/5, /*h=*/1e-5, /*rtol=*/1e-4, /*atol=*/1e-9);
  INFO(named.result.describe());
  CHECK(named.result.ok);
}
