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

#include <algorithm>
#include <cmath>
#include <span>
#include <vector>

#include "snrmask/enhance.hpp"
#include "snrmask/error.hpp"
#include "snrmask/stft.hpp"

namespace snrmask {

struct SegConfig {
  double clip_lo = -10.0;
  double clip_hi = 35.0;
  // Speech-active frames: clean energy within this many dB of the loudest.
  double activity_range_db = 40.0;
  int frame_len = 256;
  int frame_shift = 128;

  void validate() const {
    detail::require(clip_lo < clip_hi, ErrorKind::kInvalidArgument,
                    "clip_lo must be below clip_hi");
    detail::require(frame_len >= 1 && frame_shift >= 1,
                    ErrorKind::kInvalidArgument, "bad metric frame geometry");
  }
};

/// Applies mixture-derived floored gains to an isolated component.
inline ComplexSpectrogram shadow_filter(const ComplexSpectrogram& component,
                                        const MaskMatrix& gains, double floor) {
  return apply_gain(component, gains, floor);
}

/// Time-domain shadow filtering; the result is aligned with the input
/// (output of istft, truncated to the input length).
inline std::vector<double> shadow_filter_signal(std::span<const double> component,
                                                const MaskMatrix& gains,
                                                double floor,
                                                const FrameParams& frame = {}) {
  auto out = istft(shadow_filter(stft(component, frame), gains, floor));
  out.resize(std::min(out.size(), component.size()));
  return out;
}

namespace detail {

template <typename F>
void for_each_segment(std::size_t len, const SegConfig& cfg, F&& f) {
  const auto n = static_cast<std::size_t>(cfg.frame_len);
  const auto hop = static_cast<std::size_t>(cfg.frame_shift);
  for (std::size_t start = 0; start + n <= len; start += hop) f(start, n);
}

inline double energy(std::span<const double> x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

}  // namespace detail

/// Segmental speech SNR: mean over speech-active frames of the clipped
/// ratio of clean energy to the energy of the speech distortion.
inline double seg_ssnr(std::span<const double> clean,
                       std::span<const double> filtered,
                       const SegConfig& cfg = {}) {
  cfg.validate();
  detail::require(clean.size() == filtered.size(), ErrorKind::kInvalidArgument,
                  "signals are not aligned");
  std::vector<std::pair<double, double>> frames;  // (signal, distortion)
  double max_energy = 0;
  detail::for_each_segment(clean.size(), cfg, [&](std::size_t s, std::size_t n) {
    double sig = 0, err = 0;
    for (std::size_t i = s; i < s + n; ++i) {
      sig += clean[i] * clean[i];
      const double d = clean[i] - filtered[i];
      err += d * d;
    }
    frames.emplace_back(sig, err);
    max_energy = std::max(max_energy, sig);
  });
  const double threshold = max_energy * std::pow(10.0, -cfg.activity_range_db / 10.0);
  double sum = 0;
  int count = 0;
  for (const auto& [sig, err] : frames) {
    if (!(sig > 0.0) || sig < threshold) continue;
    const double db = err > 0.0 ? 10.0 * std::log10(sig / err) : cfg.clip_hi;
    sum += std::clamp(db, cfg.clip_lo, cfg.clip_hi);
    ++count;
  }
  if (count == 0) {
    throw Error(ErrorKind::kUndefinedResult, "no speech-active frames");
  }
  return sum / count;
}

/// Segmental noise reduction: mean over frames of input-to-output noise
/// energy ratio in dB. Frames where either energy is zero are skipped.
inline double seg_nr(std::span<const double> noise,
                     std::span<const double> filtered,
                     const SegConfig& cfg = {}) {
  cfg.validate();
  detail::require(noise.size() == filtered.size(), ErrorKind::kInvalidArgument,
                  "signals are not aligned");
  double sum = 0;
  int count = 0;
  detail::for_each_segment(noise.size(), cfg, [&](std::size_t s, std::size_t n) {
    const double in = detail::energy(noise.subspan(s, n));
    const double out = detail::energy(filtered.subspan(s, n));
    if (in > 0.0 && out > 0.0) {
      sum += 10.0 * std::log10(in / out);
      ++count;
    }
  });
  if (count == 0) {
    throw Error(ErrorKind::kUndefinedResult, "no frames with noise energy");
  }
  return sum / count;
}

struct ShadowScores {
  double seg_ssnr = 0.0;
  double seg_nr = 0.0;
};

/// Shadow-filters speech and noise components with one gain field and
/// scores samples [begin, end) of the result. seg_ssnr is NaN when the
/// speech component has no active frames there.
inline ShadowScores shadow_scores(std::span<const double> speech,
                                  std::span<const double> noise,
                                  const MaskMatrix& gains, double floor,
                                  std::size_t begin, std::size_t end,
                                  const FrameParams& frame = {},
                                  const SegConfig& cfg = {}) {
  const auto fs = shadow_filter_signal(speech, gains, floor, frame);
  const auto fn = shadow_filter_signal(noise, gains, floor, frame);
  end = std::min({end, fs.size(), fn.size()});
  detail::require(begin < end, ErrorKind::kInvalidArgument, "empty scoring region");
  const std::size_t len = end - begin;
  ShadowScores r;
  try {
    r.seg_ssnr = seg_ssnr(speech.subspan(begin, len),
                          std::span<const double>(fs).subspan(begin, len), cfg);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::kUndefinedResult) throw;
    r.seg_ssnr = std::numeric_limits<double>::quiet_NaN();
  }
  r.seg_nr = seg_nr(noise.subspan(begin, len),
                    std::span<const double>(fn).subspan(begin, len), cfg);
  return r;
}

}  // namespace snrmask
