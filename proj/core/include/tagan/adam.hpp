// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "tagan/checkpoint.hpp"
#include "tagan/param_store.hpp"

namespace tagan {

/// Adam with bias correction (Kingma & Ba defaults for beta2/eps). Zero
/// moments at construction; a zero gradient leaves parameters untouched
/// while still advancing the step counter.
template <typename S>
class AdamOptimizer {
public:
  AdamOptimizer(std::vector<Parameter<S>*> params, double beta1 = 0.9,
                double beta2 = 0.999, double eps = 1e-8)
      : params_(std::move(params)), beta1_(beta1), beta2_(beta2), eps_(eps) {
    slots_.resize(params_.size());
    for (std::size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m.assign(params_[i]->value.numel(), S(0));
      slots_[i].v.assign(params_[i]->value.numel(), S(0));
    }
  }

  /// One update from the gradients currently stored on the parameters.
  void step(double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t i = 0; i < params_.size(); ++i) {
      Parameter<S>& p = *params_[i];
      auto& m = slots_[i].m;
      auto& v = slots_[i].v;
      for (std::size_t j = 0; j < m.size(); ++j) {
        const double g = static_cast<double>(p.grad.data[j]);
        const double mj = beta1_ * static_cast<double>(m[j]) + (1.0 - beta1_) * g;
        const double vj = beta2_ * static_cast<double>(v[j]) + (1.0 - beta2_) * g * g;
        m[j] = static_cast<S>(mj);
        v[j] = static_cast<S>(vj);
        const double m_hat = mj / bc1;
        const double v_hat = vj / bc2;
        p.value.data[j] -= static_cast<S>(lr * m_hat / (std::sqrt(v_hat) + eps_));
      }
    }
  }

  std::int64_t step_count() const { return t_; }

  void append_state(Checkpoint& ckpt, const std::string& prefix) const {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      const Shape& shape = params_[i]->value.shape;
      ckpt.add(prefix + params_[i]->name + "/m", TensorData<S>(shape, slots_[i].m));
      ckpt.add(prefix + params_[i]->name + "/v", TensorData<S>(shape, slots_[i].v));
    }
    ckpt.add(prefix + "t", TensorData<double>({1}, {static_cast<double>(t_)}));
  }

  void load_state(const Checkpoint& ckpt, const std::string& prefix) {
    for (std::size_t i = 0; i < params_.size(); ++i) {
      slots_[i].m = ckpt.get<S>(prefix + params_[i]->name + "/m").data;
      slots_[i].v = ckpt.get<S>(prefix + params_[i]->name + "/v").data;
      if (slots_[i].m.size() != params_[i]->value.numel() ||
          slots_[i].v.size() != params_[i]->value.numel()) {
        throw IoError("optimizer state size mismatch for " + params_[i]->name);
      }
    }
    t_ = static_cast<std::int64_t>(ckpt.get<double>(prefix + "t").data[0]);
  }

private:
  struct Slot {
    std::vector<S> m, v;
  };

  std::vector<Parameter<S>*> params_;
  std::vector<Slot> slots_;
  double beta1_, beta2_, eps_;
  std::int64_t t_ = 0;
};

}  // namespace tagan
