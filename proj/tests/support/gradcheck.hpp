// Copyright 2026 The snrmask Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference check of network gradients.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "snrmask/network.hpp"

namespace snrmask::testing {

/// Largest relative error between the analytic gradient of the summed
/// squared error and central differences, over every parameter.
inline double max_gradient_error(NetworkParams<double> p, const Mat<double>& x,
                                 const Mat<double>& y, double h = 1e-5) {
  NetworkParams<double> grads = detail::zeros_like(p);
  loss_and_gradient(p, x, y, grads);
  std::vector<double*> params, analytic;
  p.visit([&](double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) params.push_back(d + i);
  });
  grads.visit([&](double* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) analytic.push_back(d + i);
  });
  auto loss_at = [&] {
    RecurrentState<double> st;
    return (detail::forward_sequence<double>(p, x, st, nullptr) - y).squaredNorm();
  };
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = *params[i];
    *params[i] = orig + h;
    const double lp = loss_at();
    *params[i] = orig - h;
    const double lm = loss_at();
    *params[i] = orig;
    const double numeric = (lp - lm) / (2 * h);
    const double err = std::abs(numeric - *analytic[i]) /
                       std::max({std::abs(numeric), std::abs(*analytic[i]), 1e-6});
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace snrmask::testing
