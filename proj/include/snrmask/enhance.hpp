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
#include <optional>
#include <span>
#include <vector>

#include "snrmask/error.hpp"
#include "snrmask/features.hpp"
#include "snrmask/network.hpp"
#include "snrmask/noise_tracker.hpp"
#include "snrmask/speech_psd.hpp"
#include "snrmask/stft.hpp"

namespace snrmask {

enum class EnhanceMode { kConventionalWiener, kDnnMask };

struct EnhanceConfig {
  double gain_floor = 0.1;  // -20 dB
  EnhanceMode mode = EnhanceMode::kConventionalWiener;
  // Expected input feature of the model in DNN mode; unset accepts any.
  std::optional<FeatureKind> feature;
  double init_seconds = 2.0;
  FrameParams frame;
  NoiseTrackerConfig noise;
  TcsConfig tcs;

  void validate() const {
    detail::require(gain_floor >= 0.0 && gain_floor < 1.0,
                    ErrorKind::kInvalidArgument, "gain floor must be in [0,1)");
    detail::require(init_seconds > 0.0, ErrorKind::kInvalidArgument,
                    "init_seconds must be positive");
    frame.validate();
  }

  std::size_t init_samples() const {
    return static_cast<std::size_t>(std::lround(init_seconds * frame.sample_rate));
  }
  /// Frames lying entirely inside the initialization region.
  int init_frames() const { return frame.frames_for(init_samples()); }
};

inline double db_to_amplitude(double db) { return std::pow(10.0, db / 20.0); }

/// Wiener gain speech / (speech + noise); zero where both vanish.
inline MaskMatrix wiener_gain(const RealMatrix& speech_psd,
                              const RealMatrix& noise_psd) {
  detail::require(speech_psd.rows() == noise_psd.rows() &&
                      speech_psd.cols() == noise_psd.cols(),
                  ErrorKind::kInvalidArgument, "PSD shape mismatch");
  MaskMatrix g(speech_psd.rows(), speech_psd.cols());
  for (Eigen::Index i = 0; i < g.size(); ++i) {
    const double s = std::max(speech_psd.data()[i], 0.0);
    const double den = s + std::max(noise_psd.data()[i], 0.0);
    g.data()[i] = den > 0.0 ? s / den : 0.0;
  }
  return g;
}

/// Scales every coefficient by max(gain, floor).
inline ComplexSpectrogram apply_gain(const ComplexSpectrogram& spec,
                                     const MaskMatrix& gains, double floor) {
  detail::require(gains.rows() == spec.frames.rows() &&
                      gains.cols() == spec.frames.cols(),
                  ErrorKind::kInvalidArgument, "gain shape mismatch");
  ComplexSpectrogram out = spec;
  for (Eigen::Index l = 0; l < gains.rows(); ++l) {
    for (Eigen::Index k = 0; k < gains.cols(); ++k) {
      out.frames(l, k) *= std::max(gains(l, k), floor);
    }
  }
  return out;
}

/// Conventional gains: SPP noise tracker, cepstral speech PSD, Wiener gain.
inline MaskMatrix conventional_gains(const ComplexSpectrogram& noisy,
                                     const EnhanceConfig& cfg) {
  Trackers trackers(cfg.noise, cfg.tcs);
  trackers.init(noisy.power(), cfg.init_frames());
  const PsdTrack track = track_psds(noisy, trackers, true);
  return wiener_gain(track.speech_psd, track.noise_psd);
}

/// Input features for a model: extracts its feature kind over the whole
/// utterance and stacks its context depth.
template <typename T>
FeatureMatrix model_features(const ComplexSpectrogram& noisy,
                             const NetworkParams<T>& model,
                             const EnhanceConfig& cfg) {
  Trackers trackers(cfg.noise, cfg.tcs);
  trackers.init(noisy.power(), cfg.init_frames());
  FeatureMatrix f = extract(noisy, model.feature, trackers);
  return model.context > 1 ? stack_context(f, model.context) : f;
}

template <typename T>
void check_mask_model(const NetworkParams<T>& model, const EnhanceConfig& cfg,
                      int num_bins) {
  detail::require(model.output_dim() == num_bins, ErrorKind::kInvalidArgument,
                  "model output does not match the STFT bin count");
  detail::require(model.context >= 1 &&
                      model.input_dim() ==
                          base_dim(model.feature, num_bins) * model.context,
                  ErrorKind::kInvalidArgument,
                  "model input does not match its declared feature kind");
  if (cfg.feature && *cfg.feature != model.feature) {
    throw Error(ErrorKind::kInvalidArgument,
                "model was trained on '" + to_string(model.feature) +
                    "' features, not '" + to_string(*cfg.feature) + "'");
  }
}

template <typename T>
MaskMatrix dnn_gains(const ComplexSpectrogram& noisy,
                     const NetworkParams<T>& model, const EnhanceConfig& cfg) {
  check_mask_model(model, cfg, noisy.num_bins());
  return forward(model, model_features(noisy, model, cfg)).mask;
}

struct EnhanceResult {
  std::vector<double> samples;  // length (L-1)*shift + frame_len
  MaskMatrix gains;             // before the floor
};

/// STFT, gain estimation, floored gain, overlap-add. The first init_seconds
/// must be free of speech; they initialize the noise tracker and are
/// enhanced like the rest.
inline EnhanceResult enhance(std::span<const double> samples,
                             const EnhanceConfig& cfg,
                             const NetworkParams<float>* model = nullptr) {
  cfg.validate();
  detail::require(samples.size() >= cfg.init_samples() &&
                      samples.size() >= static_cast<std::size_t>(cfg.frame.frame_len),
                  ErrorKind::kInvalidArgument,
                  "input shorter than the initialization period");
  const ComplexSpectrogram noisy = stft(samples, cfg.frame);
  EnhanceResult r;
  if (cfg.mode == EnhanceMode::kDnnMask) {
    detail::require(model != nullptr, ErrorKind::kInvalidArgument,
                    "DNN mode needs a model");
    r.gains = dnn_gains(noisy, *model, cfg);
  } else {
    r.gains = conventional_gains(noisy, cfg);
  }
  r.samples = istft(apply_gain(noisy, r.gains, cfg.gain_floor));
  return r;
}

}  // namespace snrmask
