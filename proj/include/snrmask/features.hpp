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
#include <string>
#include <string_view>
#include <cstdint>

#include "snrmask/error.hpp"
#include "snrmask/noise_tracker.hpp"
#include "snrmask/speech_psd.hpp"
#include "snrmask/stft.hpp"
#include "snrmask/types.hpp"

namespace snrmask {

enum class FeatureKind : std::uint32_t {
  kLogPeriodogram = 0,
  kNat = 1,
  kPrior = 2,
  kPost = 3,
  kSnrNat = 4,
};

inline std::string to_string(FeatureKind kind) {
  switch (kind) {
    case FeatureKind::kLogPeriodogram: return "per";
    case FeatureKind::kNat: return "nat";
    case FeatureKind::kPrior: return "prior";
    case FeatureKind::kPost: return "post";
    case FeatureKind::kSnrNat: return "snrnat";
  }
  return "unknown";
}

inline FeatureKind parse_feature_kind(std::string_view name) {
  for (auto k : {FeatureKind::kLogPeriodogram, FeatureKind::kNat,
                 FeatureKind::kPrior, FeatureKind::kPost,
                 FeatureKind::kSnrNat}) {
    if (name == to_string(k)) return k;
  }
  throw Error(ErrorKind::kInvalidArgument,
              "unknown feature kind '" + std::string(name) + "'");
}

inline FeatureKind feature_kind_from_id(std::uint32_t id) {
  if (id > static_cast<std::uint32_t>(FeatureKind::kSnrNat)) {
    throw Error(ErrorKind::kFormat, "unknown feature kind id");
  }
  return static_cast<FeatureKind>(id);
}

/// Per-frame dimensionality before context stacking.
inline int base_dim(FeatureKind kind, int num_bins = kNumBins) {
  return (kind == FeatureKind::kNat || kind == FeatureKind::kSnrNat)
             ? 2 * num_bins
             : num_bins;
}

inline bool needs_speech_psd(FeatureKind kind) {
  return kind == FeatureKind::kPrior || kind == FeatureKind::kSnrNat;
}

struct FeatureMatrix {
  RealMatrix rows;  // L x (base_dim * context)
  FeatureKind kind = FeatureKind::kLogPeriodogram;
  int context = 1;

  int num_frames() const { return static_cast<int>(rows.rows()); }
  int dim() const { return static_cast<int>(rows.cols()); }
};

/// L x K gains or ratio-mask targets in [0, 1].
using MaskMatrix = RealMatrix;

inline constexpr double kLogFloor = 1e-12;

inline double floored_log(double x) { return std::log(std::max(x, kLogFloor)); }

/// Noise and speech PSD estimators for one stream.
struct Trackers {
  NoiseTracker noise;
  SpeechPsdEstimator speech;

  Trackers() = default;
  Trackers(const NoiseTrackerConfig& ncfg, const TcsConfig& scfg)
      : noise(ncfg), speech(scfg) {}

  /// Initializes the noise tracker on the first init_frames rows of power.
  void init(const RealMatrix& power, int init_frames) {
    detail::require(init_frames >= 1, ErrorKind::kInvalidArgument,
                    "initialization region shorter than one frame");
    const auto rows = std::min<Eigen::Index>(init_frames, power.rows());
    noise.init(power.topRows(rows));
    speech.reset();
  }
};

/// Frame-by-frame PSD estimates for a whole utterance.
struct PsdTrack {
  RealMatrix noisy_power;
  RealMatrix noise_psd;
  RealMatrix speech_psd;  // empty unless requested
};

inline PsdTrack track_psds(const ComplexSpectrogram& spec, Trackers& trackers,
                           bool with_speech) {
  detail::require(trackers.noise.initialized(), ErrorKind::kInvalidState,
                  "trackers must be initialized on the noise-only preamble");
  PsdTrack out;
  out.noisy_power = spec.power();
  const Eigen::Index frames = out.noisy_power.rows();
  const Eigen::Index bins = out.noisy_power.cols();
  out.noise_psd.resize(frames, bins);
  if (with_speech) out.speech_psd.resize(frames, bins);
  for (Eigen::Index l = 0; l < frames; ++l) {
    const RealVector y = out.noisy_power.row(l).transpose();
    const RealVector n = trackers.noise.update(y).noise_psd;
    out.noise_psd.row(l) = n.transpose();
    if (with_speech) {
      out.speech_psd.row(l) = trackers.speech.estimate(y, n).transpose();
    }
  }
  return out;
}

/// Feature rows from precomputed PSD tracks.
inline FeatureMatrix features_from_track(const PsdTrack& track,
                                         FeatureKind kind) {
  const Eigen::Index frames = track.noisy_power.rows();
  const Eigen::Index bins = track.noisy_power.cols();
  FeatureMatrix f;
  f.kind = kind;
  f.context = 1;
  f.rows.resize(frames, base_dim(kind, static_cast<int>(bins)));
  for (Eigen::Index l = 0; l < frames; ++l) {
    for (Eigen::Index k = 0; k < bins; ++k) {
      const double y = track.noisy_power(l, k);
      const double n = track.noise_psd(l, k);
      switch (kind) {
        case FeatureKind::kLogPeriodogram:
          f.rows(l, k) = floored_log(y);
          break;
        case FeatureKind::kNat:
          f.rows(l, k) = floored_log(y);
          f.rows(l, bins + k) = floored_log(n);
          break;
        case FeatureKind::kPrior:
          f.rows(l, k) = floored_log(track.speech_psd(l, k) / n);
          break;
        case FeatureKind::kPost:
          f.rows(l, k) = floored_log(y / n);
          break;
        case FeatureKind::kSnrNat:
          f.rows(l, k) = floored_log(track.speech_psd(l, k) / n);
          f.rows(l, bins + k) = floored_log(y / n);
          break;
      }
    }
  }
  return f;
}

/// Per-frame features of the given kind; advances the trackers through the
/// whole spectrogram.
inline FeatureMatrix extract(const ComplexSpectrogram& noisy_spec,
                             FeatureKind kind, Trackers& trackers) {
  return features_from_track(
      track_psds(noisy_spec, trackers, needs_speech_psd(kind)), kind);
}

/// Super-vector of the current and depth-1 previous frames; frames before
/// the start repeat the first frame.
inline FeatureMatrix stack_context(const FeatureMatrix& f, int depth) {
  detail::require(depth >= 1, ErrorKind::kInvalidArgument,
                  "context depth must be >= 1");
  detail::require(f.context == 1, ErrorKind::kInvalidArgument,
                  "features are already context-stacked");
  const Eigen::Index d = f.rows.cols();
  FeatureMatrix out;
  out.kind = f.kind;
  out.context = depth;
  out.rows.resize(f.rows.rows(), d * depth);
  for (Eigen::Index l = 0; l < f.rows.rows(); ++l) {
    for (int j = 0; j < depth; ++j) {
      const Eigen::Index src = std::max<Eigen::Index>(l - j, 0);
      out.rows.block(l, j * d, 1, d) = f.rows.row(src);
    }
  }
  return out;
}

/// Ideal ratio mask |S|^2 / (|S|^2 + |N|^2); 0/0 is defined as 0.
inline MaskMatrix irm(const ComplexSpectrogram& clean,
                      const ComplexSpectrogram& noise) {
  detail::require(clean.frames.rows() == noise.frames.rows() &&
                      clean.frames.cols() == noise.frames.cols(),
                  ErrorKind::kInvalidArgument, "spectrogram shape mismatch");
  const RealMatrix s = clean.power();
  const RealMatrix n = noise.power();
  MaskMatrix m(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    const double den = s.data()[i] + n.data()[i];
    m.data()[i] = den > 0.0 ? s.data()[i] / den : 0.0;
  }
  return m;
}

}  // namespace snrmask
