// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "tagan/error.hpp"
#include "tagan/rng.hpp"
#include "tagan/tensor.hpp"

namespace tagan {

/// One named learnable tensor plus its gradient accumulator.
template <typename S>
struct Parameter {
  std::string name;
  TensorData<S> value;
  TensorData<S> grad;

  Parameter(std::string n, Shape shape)
      : name(std::move(n)), value(shape), grad(std::move(shape)) {}
};

/// Owns every learnable tensor of a model, in creation order. Creation
/// order is the canonical order for checkpoints and optimizer state, so it
/// must be deterministic (models create parameters in a fixed sequence).
template <typename S>
class ParamStore {
public:
  Parameter<S>& create(const std::string& name, Shape shape) {
    if (index_.count(name)) {
      throw ContractError("duplicate parameter name: " + name);
    }
    index_[name] = params_.size();
    params_.push_back(std::make_unique<Parameter<S>>(name, std::move(shape)));
    return *params_.back();
  }

  Parameter<S>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : params_[it->second].get();
  }

  Parameter<S>& at(const std::string& name) {
    if (Parameter<S>* p = find(name)) return *p;
    throw ContractError("unknown parameter: " + name);
  }

  std::size_t size() const { return params_.size(); }
  Parameter<S>& operator[](std::size_t i) { return *params_[i]; }
  const Parameter<S>& operator[](std::size_t i) const { return *params_[i]; }

  /// Parameters whose name starts with prefix, in creation order.
  std::vector<Parameter<S>*> group(const std::string& prefix) {
    std::vector<Parameter<S>*> out;
    for (auto& p : params_) {
      if (p->name.rfind(prefix, 0) == 0) out.push_back(p.get());
    }
    return out;
  }

  void zero_grad(const std::string& prefix = "") {
    for (auto& p : params_) {
      if (p->name.rfind(prefix, 0) == 0) {
        std::fill(p->grad.data.begin(), p->grad.data.end(), S(0));
      }
    }
  }

  std::size_t total_elements() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p->value.numel();
    return n;
  }

private:
  std::vector<std::unique_ptr<Parameter<S>>> params_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// Fill a parameter with N(0, stddev) values.
template <typename S>
void init_normal(Parameter<S>& p, Rng& rng, double stddev) {
  for (auto& v : p.value.data) v = static_cast<S>(rng.normal(0.0, stddev));
}

/// Fill a parameter with U(-bound, bound) values.
template <typename S>
void init_uniform(Parameter<S>& p, Rng& rng, double bound) {
  for (auto& v : p.value.data) v = static_cast<S>(rng.uniform(-bound, bound));
}

}  // namespace tagan
