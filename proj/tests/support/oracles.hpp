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

// Reference computations used as test oracles. They deliberately avoid the
// library's code paths (plain O(N^2) DFTs, scalar loops).

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

namespace snrmask::testing {

/// Brute-force DFT of a real sequence, bins 0..n/2.
inline std::vector<std::complex<double>> naive_dft(const std::vector<double>& x) {
  const std::size_t n = x.size();
  std::vector<std::complex<double>> out(n / 2 + 1);
  for (std::size_t k = 0; k <= n / 2; ++k) {
    std::complex<double> acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += x[i] * std::polar(1.0, -2.0 * std::numbers::pi * k * i / n);
    }
    out[k] = acc;
  }
  return out;
}

/// Brute-force inverse DFT from a one-sided spectrum via explicit
/// Hermitian mirroring; returns the complex result so the imaginary part can
/// be inspected.
inline std::vector<std::complex<double>> naive_idft_full(
    const std::vector<std::complex<double>>& half, std::size_t n) {
  std::vector<std::complex<double>> full(n);
  for (std::size_t k = 0; k < n; ++k) {
    full[k] = k <= n / 2 ? half[k] : std::conj(half[n - k]);
  }
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::complex<double> acc = 0;
    for (std::size_t k = 0; k < n; ++k) {
      acc += full[k] * std::polar(1.0, 2.0 * std::numbers::pi * k * i / n);
    }
    out[i] = acc / static_cast<double>(n);
  }
  return out;
}

inline double spp_reference(double post_snr, double xi) {
  return 1.0 / (1.0 + (1.0 + xi) * std::exp(-post_snr * xi / (1.0 + xi)));
}

}  // namespace snrmask::testing
