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

#pragma once

#include <cmath>
#include <numbers>
#include <span>
#include <vector>

#include "snrmask/error.hpp"
#include "snrmask/fft.hpp"
#include "snrmask/types.hpp"

namespace snrmask {

/// Frame geometry: 8 kHz, 32 ms frames, 16 ms shift, mirror spectrum dropped.
struct FrameParams {
  int sample_rate = 8000;
  int frame_len = 256;
  int frame_shift = 128;

  int num_bins() const { return frame_len / 2 + 1; }

  void validate() const {
    detail::require(frame_len >= 2 && frame_len % 2 == 0 &&
                        frame_shift * 2 == frame_len,
                    ErrorKind::kInvalidArgument,
                    "frame_len must be even with frame_shift = frame_len/2");
    detail::require(sample_rate > 0 && sample_rate * 32 == frame_len * 1000,
                    ErrorKind::kInvalidArgument,
                    "frame_len must span 32 ms at the sample rate");
  }

  /// Frames produced by stft() for a signal of the given length.
  int frames_for(std::size_t num_samples) const {
    if (num_samples < static_cast<std::size_t>(frame_len)) return 0;
    return static_cast<int>((num_samples - frame_len) / frame_shift) + 1;
  }

  bool operator==(const FrameParams&) const = default;
};

/// L x K matrix of one-sided DFT coefficients.
struct ComplexSpectrogram {
  ComplexMatrix frames;
  FrameParams params;

  int num_frames() const { return static_cast<int>(frames.rows()); }
  int num_bins() const { return static_cast<int>(frames.cols()); }

  /// Periodogram |X|^2.
  RealMatrix power() const { return frames.cwiseAbs2(); }
};

/// Square root of the periodic Hann window.
inline std::vector<double> sqrt_hann(int len) {
  detail::require(len >= 2 && len % 2 == 0, ErrorKind::kInvalidArgument,
                  "window length must be even and >= 2");
  std::vector<double> w(len);
  for (int n = 0; n < len; ++n) {
    const double hann =
        0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * n / len);
    w[n] = std::sqrt(hann);
  }
  return w;
}

/// Windowed DFT of overlapping frames. Trailing samples that do not fill a
/// whole frame are dropped.
inline ComplexSpectrogram stft(std::span<const double> signal,
                               const FrameParams& params = {}) {
  params.validate();
  detail::require(signal.size() >= static_cast<std::size_t>(params.frame_len),
                  ErrorKind::kInvalidArgument,
                  "signal shorter than one frame");
  const int n = params.frame_len;
  const int bins = params.num_bins();
  const int num_frames = params.frames_for(signal.size());
  const auto window = sqrt_hann(n);
  auto& fft = cached_fft(n);

  ComplexSpectrogram out{ComplexMatrix(num_frames, bins), params};
  std::vector<double> frame(n);
  std::vector<std::complex<double>> spec(bins);
  for (int l = 0; l < num_frames; ++l) {
    const std::size_t start = static_cast<std::size_t>(l) * params.frame_shift;
    for (int i = 0; i < n; ++i) frame[i] = signal[start + i] * window[i];
    fft.forward(frame, spec);
    for (int k = 0; k < bins; ++k) out.frames(l, k) = spec[k];
  }
  return out;
}

/// Inverse DFT, synthesis window and overlap-add. The output spans
/// (L - 1) * shift + frame_len samples; only samples covered by two frames
/// are perfectly reconstructed.
inline std::vector<double> istft(const ComplexSpectrogram& spec) {
  const auto& params = spec.params;
  params.validate();
  detail::require(spec.num_frames() > 0, ErrorKind::kInvalidArgument,
                  "empty spectrogram");
  detail::require(spec.num_bins() == params.num_bins(),
                  ErrorKind::kInvalidArgument, "bin count mismatch");
  const int n = params.frame_len;
  const int bins = params.num_bins();
  const auto window = sqrt_hann(n);
  auto& fft = cached_fft(n);

  std::vector<double> out(
      static_cast<std::size_t>(spec.num_frames() - 1) * params.frame_shift + n,
      0.0);
  std::vector<std::complex<double>> bins_buf(bins);
  std::vector<double> frame(n);
  for (int l = 0; l < spec.num_frames(); ++l) {
    for (int k = 0; k < bins; ++k) bins_buf[k] = spec.frames(l, k);
    fft.inverse(bins_buf, frame);
    const std::size_t start = static_cast<std::size_t>(l) * params.frame_shift;
    for (int i = 0; i < n; ++i) out[start + i] += frame[i] * window[i];
  }
  return out;
}

}  // namespace snrmask
