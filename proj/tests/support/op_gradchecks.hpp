// SPDX-License-Identifier: Apache-2.0
//
// Finite-difference coverage for every differentiable operation. Shared by
// the unit suite and the acceptance gradient criterion.
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "gradcheck.hpp"
#include "tagan/autodiff.hpp"
#include "tagan/nn.hpp"

namespace tagan::test {

struct NamedCheck {
  std::string name;
  GradCheckResult result;
};

/// Build-and-check one op: `body` maps bound leaf tensors to a scalar loss.
inline NamedCheck check_op(
    const std::string& name, const std::vector<Shape>& shapes,
    const std::function<ad::Tensor<double>(std::vector<ad::Tensor<double>>&)>& body,
    std::uint64_t seed = 42, double h = 1e-5, double rtol = 1e-3,
    double atol = 1e-6) {
  ParamStore<double> store;
  Rng rng(seed);
  std::vector<Parameter<double>*> params;
  for (std::size_t i = 0; i < shapes.size(); ++i) {
    auto& p = store.create(name + "/x" + std::to_string(i), shapes[i]);
    init_normal(p, rng, 0.7);
    params.push_back(&p);
  }
  auto make_loss = [&](bool collect) {
    ad::Graph<double> graph;
    std::vector<ad::Tensor<double>> bound;
    bound.reserve(params.size());
    for (auto* p : params) bound.push_back(graph.param(*p));
    ad::Tensor<double> loss = body(bound);
    if (collect) {
      graph.backward(loss);
      graph.harvest();
    }
    return static_cast<double>(loss.item());
  };
  return {name, check_gradients(store, params, make_loss, h, rtol, atol)};
}

/// The full per-op sweep. Losses fold outputs through a mild nonlinearity
/// so gradients are informative at every element.
inline std::vector<NamedCheck> run_all_op_gradchecks() {
  using ad::Tensor;
  using Ts = std::vector<Tensor<double>>;
  std::vector<NamedCheck> checks;
  auto fold = [](Tensor<double> t) {
    return ad::sum(ad::mul(t, ad::tanh(ad::mul_scalar(t, 0.7))));
  };

  checks.push_back(check_op("add", {{2, 3}, {2, 3}},
                            [&](Ts& x) { return fold(ad::add(x[0], x[1])); }));
  checks.push_back(check_op("sub", {{2, 3}, {2, 3}},
                            [&](Ts& x) { return fold(ad::sub(x[0], x[1])); }));
  checks.push_back(check_op("mul", {{2, 3}, {2, 3}},
                            [&](Ts& x) { return fold(ad::mul(x[0], x[1])); }));
  checks.push_back(check_op("add_scalar", {{4}}, [&](Ts& x) {
    return fold(ad::add_scalar(x[0], 0.37));
  }));
  checks.push_back(check_op("mul_scalar", {{4}}, [&](Ts& x) {
    return fold(ad::mul_scalar(x[0], -1.3));
  }));
  checks.push_back(
      check_op("neg", {{4}}, [&](Ts& x) { return fold(ad::neg(x[0])); }));
  checks.push_back(
      check_op("abs", {{6}}, [&](Ts& x) { return fold(ad::abs(x[0])); }));
  checks.push_back(
      check_op("exp", {{5}}, [&](Ts& x) { return fold(ad::exp(x[0])); }));
  checks.push_back(check_op("log", {{5}}, [&](Ts& x) {
    return fold(ad::log(ad::add_scalar(ad::mul(x[0], x[0]), 0.5)));
  }));
  checks.push_back(
      check_op("tanh", {{5}}, [&](Ts& x) { return fold(ad::tanh(x[0])); }));
  checks.push_back(check_op("sigmoid", {{5}},
                            [&](Ts& x) { return fold(ad::sigmoid(x[0])); }));
  checks.push_back(check_op("leaky_relu", {{6}}, [&](Ts& x) {
    return fold(ad::leaky_relu(x[0], 0.2));
  }));
  checks.push_back(check_op("clamp", {{6}}, [&](Ts& x) {
    return fold(ad::clamp(x[0], -0.9, 0.9));
  }));
  checks.push_back(
      check_op("sum", {{7}}, [&](Ts& x) { return ad::sum(ad::mul(x[0], x[0])); }));
  checks.push_back(check_op("mean", {{3, 4}}, [&](Ts& x) {
    return ad::mean(ad::mul(x[0], x[0]));
  }));
  checks.push_back(check_op("dot", {{5}, {5}},
                            [&](Ts& x) { return ad::dot(x[0], x[1]); }));
  checks.push_back(check_op("matmul", {{3, 3}, {3, 3}}, [&](Ts& x) {
    return fold(ad::matmul(x[0], x[1]));
  }));
  checks.push_back(check_op("matvec", {{4, 3}, {3}}, [&](Ts& x) {
    return fold(ad::matvec(x[0], x[1]));
  }));
  checks.push_back(check_op("row", {{4, 3}}, [&](Ts& x) {
    return fold(ad::add(ad::row(x[0], 1), ad::row(x[0], 3)));
  }));
  checks.push_back(check_op("slice", {{7}}, [&](Ts& x) {
    return fold(ad::slice(x[0], 2, 4));
  }));
  checks.push_back(check_op("stack_rows", {{3}, {3}}, [&](Ts& x) {
    std::vector<Tensor<double>> rows = {x[0], x[1], x[0]};
    return fold(ad::stack_rows(std::span<const Tensor<double>>(rows)));
  }));
  checks.push_back(check_op("stack_scalars", {{1}, {1}}, [&](Ts& x) {
    std::vector<Tensor<double>> vals = {x[0], x[1], x[0]};
    return fold(ad::stack_scalars(std::span<const Tensor<double>>(vals)));
  }));
  checks.push_back(check_op("mean_rows", {{4, 3}}, [&](Ts& x) {
    return fold(ad::mean_rows(x[0]));
  }));
  checks.push_back(check_op("softmax", {{6}},
                            [&](Ts& x) { return fold(ad::softmax(x[0])); }));
  checks.push_back(check_op("softmax_rows", {{3, 4}}, [&](Ts& x) {
    return fold(ad::softmax_rows(x[0]));
  }));
  checks.push_back(check_op("conv2d", {{2, 5, 5}, {3, 2, 3, 3}}, [&](Ts& x) {
    return fold(ad::conv2d(x[0], x[1], 1, 1));
  }));
  checks.push_back(check_op("conv2d_strided", {{2, 6, 6}, {3, 2, 4, 4}},
                            [&](Ts& x) {
                              return fold(ad::conv2d(x[0], x[1], 2, 1));
                            }));
  checks.push_back(check_op("add_channel_bias", {{3, 4, 4}, {3}}, [&](Ts& x) {
    return fold(ad::add_channel_bias(x[0], x[1]));
  }));
  checks.push_back(check_op("global_avg_pool", {{3, 4, 4}}, [&](Ts& x) {
    return fold(ad::global_avg_pool(x[0]));
  }));
  checks.push_back(check_op("upsample_nearest2x", {{2, 3, 3}}, [&](Ts& x) {
    return fold(ad::upsample_nearest2x(x[0]));
  }));
  checks.push_back(check_op("tile_spatial", {{3}}, [&](Ts& x) {
    return fold(ad::tile_spatial(x[0], 4, 4));
  }));
  checks.push_back(check_op("concat_channels", {{2, 3, 3}, {3, 3, 3}},
                            [&](Ts& x) {
                              return fold(ad::concat_channels(x[0], x[1]));
                            }));
  checks.push_back(check_op("reshape", {{3, 4}}, [&](Ts& x) {
    return fold(ad::reshape(x[0], {2, 6}));
  }));
  checks.push_back(check_op("gru_cell", {{3}, {4}, {4, 3}, {4, 4}, {4}, {4, 3},
                                         {4, 4}, {4}, {4, 3}, {4, 4}, {4}},
                            [&](Ts& x) {
                              nn::BoundGru<double> g{x[2], x[3], x[4], x[5],
                                                     x[6], x[7], x[8], x[9],
                                                     x[10], 4};
                              return fold(nn::gru_cell(x[0], x[1], g));
                            },
                            /*seed=*/7, /*h=*/1e-5, /*rtol=*/1e-3));
  return checks;
}

}  // namespace tagan::test
