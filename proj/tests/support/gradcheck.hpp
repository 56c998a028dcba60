// SPDX-License-Identifier: Apache-2.0
//
// Central finite-difference gradient checking. The analytic gradients come
// from one backward pass; the numeric side re-evaluates the loss with each
// parameter element nudged by +/- h. Everything runs in float64.
#pragma once

#include <cmath>
#include <functional>
#include <sstream>
#include <string>
#include <vector>

#include "tagan/param_store.hpp"

namespace tagan::test {

struct GradCheckResult {
  std::size_t checked = 0;
  double max_abs_err = 0;
  double max_rel_err = 0;
  bool ok = true;
  std::string worst;

  std::string describe() const {
    std::ostringstream os;
    os << (ok ? "ok" : "FAIL") << " checked=" << checked
       << " max_abs_err=" << max_abs_err << " max_rel_err=" << max_rel_err;
    if (!worst.empty()) os << " worst=" << worst;
    return os.str();
  }
};

/// Compare analytic gradients (one per parameter, same layout as the
/// parameter data) against central differences of `eval`, which must
/// recompute the scalar loss from the parameters' current values.
inline GradCheckResult fd_check(
    const std::vector<Parameter<double>*>& params,
    const std::vector<std::vector<double>>& analytic,
    const std::function<double()>& eval, double h = 1e-5, double rtol = 1e-3,
    double atol = 1e-6) {
  GradCheckResult result;
  for (std::size_t p = 0; p < params.size(); ++p) {
    auto& data = params[p]->value.data;
    for (std::size_t i = 0; i < data.size(); ++i) {
      const double saved = data[i];
      data[i] = saved + h;
      const double f_plus = eval();
      data[i] = saved - h;
      const double f_minus = eval();
      data[i] = saved;

      const double numeric = (f_plus - f_minus) / (2.0 * h);
      const double exact = analytic[p][i];
      const double abs_err = std::abs(numeric - exact);
      const double scale = std::max(std::abs(numeric), std::abs(exact));
      const double rel_err = scale > 0 ? abs_err / scale : 0.0;
      ++result.checked;
      if (abs_err > result.max_abs_err) result.max_abs_err = abs_err;
      if (rel_err > result.max_rel_err && abs_err > atol) {
        result.max_rel_err = rel_err;
      }
      if (abs_err > atol && rel_err > rtol) {
        result.ok = false;
        if (result.worst.empty() || abs_err > result.max_abs_err * 0.999) {
          std::ostringstream os;
          os << params[p]->name << '[' << i << "] analytic=" << exact
             << " numeric=" << numeric;
          result.worst = os.str();
        }
      }
    }
  }
  return result;
}

/// Convenience wrapper: builds the loss with `make_loss` (fresh graph per
/// call), collects analytic gradients for `params`, then runs fd_check.
inline GradCheckResult check_gradients(
    ParamStore<double>& store, const std::vector<Parameter<double>*>& params,
    const std::function<double(bool collect)>& make_loss, double h = 1e-5,
    double rtol = 1e-3, double atol = 1e-6) {
  store.zero_grad();
  make_loss(/*collect=*/true);
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto* p : params) analytic.push_back(p->grad.data);
  return fd_check(params, analytic, [&] { return make_loss(false); }, h, rtol,
                  atol);
}

}  // namespace tagan::test
