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

#include "snrmask/speech_psd.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

namespace snrmask {
namespace {

constexpr double kBias = 1.3345682515283614;  // exp(euler_gamma / 2)

RealVector random_psd(std::mt19937_64& rng, double scale = 1.0) {
  std::exponential_distribution<double> e(1.0);
  RealVector v(kNumBins);
  for (auto& x : v) x = scale * (0.01 + e(rng));
  return v;
}

TEST(MlSpeechPsd, Arithmetic) {
  const RealVector noise = RealVector::Constant(1, 2.0);
  EXPECT_DOUBLE_EQ(ml_speech_psd(RealVector::Constant(1, 10.0), noise)[0], 8.0);
  EXPECT_DOUBLE_EQ(ml_speech_psd(RealVector::Constant(1, 1.0), noise)[0], 1e-3 * 2.0);
  EXPECT_DOUBLE_EQ(ml_speech_psd(RealVector::Constant(1, 2.0), noise)[0], 1e-3 * 2.0);
}

TEST(MlSpeechPsd, NonPositiveNoiseRejected) {
  try {
    ml_speech_psd(RealVector::Constant(2, 1.0), RealVector::Zero(2));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::kInvalidArgument);
  }
}

TEST(TcsEstimate, ConstantInputConvergesToBiasCorrectedMl) {
  std::mt19937_64 rng(3);
  const RealVector noise = random_psd(rng);
  const RealVector noisy = noise.array() * (1.5 + 10.0 * random_psd(rng).array());
  const RealVector ml = ml_speech_psd(noisy, noise);
  SpeechPsdEstimator est;
  RealVector out;
  for (int l = 0; l < 600; ++l) out = est.estimate(noisy, noise);
  for (int k = 0; k < kNumBins; ++k) EXPECT_NEAR(out[k] / ml[k], kBias, 1e-9);
}

TEST(TcsEstimate, NoSmoothingIsBiasCorrectedPassThrough) {
  TcsConfig cfg;
  cfg.alpha_env = cfg.alpha_rest = cfg.alpha_pitch = 0.0;
  SpeechPsdEstimator est(cfg);
  std::mt19937_64 rng(4);
  for (int l = 0; l < 5; ++l) {
    const RealVector noise = random_psd(rng);
    const RealVector noisy = random_psd(rng, 3.0);
    const RealVector ml = ml_speech_psd(noisy, noise);
    const RealVector out = est.estimate(noisy, noise);
    EXPECT_TRUE(out.isApprox(ml * kBias, 1e-10));
  }
}

TEST(TcsEstimate, CepstralRoundTripWithoutBias) {
  TcsConfig cfg;
  cfg.alpha_env = cfg.alpha_rest = cfg.alpha_pitch = 0.0;
  cfg.euler_gamma = 0.0;
  SpeechPsdEstimator est(cfg);
  std::mt19937_64 rng(5);
  const RealVector noise = random_psd(rng);
  const RealVector noisy = random_psd(rng, 4.0);
  const RealVector ml = ml_speech_psd(noisy, noise);
  const RealVector out = est.estimate(noisy, noise);
  EXPECT_LT(((out - ml).array() / ml.array()).abs().maxCoeff(), 1e-9);
}

TEST(TcsEstimate, FlatSpectrumStaysFlat) {
  const auto ceps = cepstrum_from_log(RealVector::Constant(kNumBins, std::log(5.0)));
  EXPECT_NEAR(ceps[0], std::log(5.0), 1e-12);
  for (std::size_t q = 1; q < ceps.size(); ++q) EXPECT_NEAR(ceps[q], 0.0, 1e-12);

  SpeechPsdEstimator est;
  const RealVector noise = RealVector::Constant(kNumBins, 1.0);
  RealVector out;
  for (double level : {6.0, 3.0, 11.0}) {
    out = est.estimate(RealVector::Constant(kNumBins, level), noise);
    EXPECT_LT(out.maxCoeff() - out.minCoeff(), 1e-9 * out.maxCoeff());
  }
}

TEST(TcsEstimate, ScaleEquivariance) {
  std::mt19937_64 rng(6);
  for (double g2 : {1e-4, 0.3, 1.0, 70.0, 1e5}) {
    SpeechPsdEstimator a, b;
    for (int l = 0; l < 30; ++l) {
      const RealVector noise = random_psd(rng);
      const RealVector noisy = random_psd(rng, 5.0);
      const RealVector oa = a.estimate(noisy, noise);
      const RealVector ob = b.estimate(g2 * noisy, g2 * noise);
      EXPECT_TRUE(ob.isApprox(g2 * oa, 1e-10)) << g2;
    }
  }
}

TEST(TcsEstimate, OutputPositiveAndFinite) {
  std::mt19937_64 rng(7);
  SpeechPsdEstimator est;
  for (int l = 0; l < 200; ++l) {
    const RealVector noise = random_psd(rng, 1e-6);
    RealVector noisy = random_psd(rng, l % 7 == 0 ? 1e-9 : 1e-3);
    noisy[l % kNumBins] = 0.0;
    const RealVector out = est.estimate(noisy, noise);
    EXPECT_TRUE(out.allFinite());
    EXPECT_GT(out.minCoeff(), 0.0);
  }
}

TEST(TcsEstimate, SmoothingIsConvexPerQuefrency) {
  std::mt19937_64 rng(8);
  SpeechPsdEstimator est;
  est.estimate(random_psd(rng, 4.0), random_psd(rng));
  for (int l = 0; l < 20; ++l) {
    const auto prev = est.state().ceps_prev;
    const RealVector noise = random_psd(rng);
    const RealVector noisy = random_psd(rng, 4.0);
    const auto ml_ceps =
        cepstrum_from_log(ml_speech_psd(noisy, noise).array().log().matrix());
    est.estimate(noisy, noise);
    const auto& cur = est.state().ceps_prev;
    for (std::size_t q = 0; q < cur.size(); ++q) {
      const double lo = std::min(prev[q], ml_ceps[q]);
      const double hi = std::max(prev[q], ml_ceps[q]);
      EXPECT_GE(cur[q], lo - 1e-12);
      EXPECT_LE(cur[q], hi + 1e-12);
    }
  }
}

TEST(PitchPeak, HarmonicRippleAt100Hz) {
  // Harmonics every 100 Hz: log spectrum ripples with period 3.2 bins.
  RealVector log_spec(kNumBins);
  for (int k = 0; k < kNumBins; ++k) {
    const double f = k * 8000.0 / 256.0;
    log_spec[k] = 2.0 + std::cos(2.0 * std::numbers::pi * f / 100.0);
  }
  const auto ceps = cepstrum_from_log(log_spec);
  // Brute-force argmax over the search range.
  int arg = 16;
  for (int q = 16; q <= 128; ++q) {
    if (ceps[q] > ceps[arg]) arg = q;
  }
  EXPECT_EQ(arg, 80);
  EXPECT_EQ(detect_pitch_peak(ceps), std::optional<int>(80));
}

TEST(PitchPeak, FlatCepstrumIsUnvoiced) {
  std::vector<double> ceps(256, 0.0);
  EXPECT_FALSE(detect_pitch_peak(ceps).has_value());
}

TEST(PitchPeak, TieResolvesToLowerQuefrency) {
  std::vector<double> ceps(256, 0.01);
  ceps[40] = ceps[90] = 1.0;
  EXPECT_EQ(detect_pitch_peak(ceps), std::optional<int>(40));
}

TEST(PitchPeak, PitchRegionIsSmoothedLightly) {
  // A voiced frame after a long unvoiced history: the pitch quefrency must
  // follow the new frame much faster than its neighbours.
  SpeechPsdEstimator est;
  const RealVector noise = RealVector::Constant(kNumBins, 1.0);
  for (int l = 0; l < 50; ++l) est.estimate(RealVector::Constant(kNumBins, 4.0), noise);
  RealVector noisy(kNumBins);
  for (int k = 0; k < kNumBins; ++k) {
    const double f = k * 8000.0 / 256.0;
    noisy[k] = 1.0 + std::exp(2.0 + 1.5 * std::cos(2.0 * std::numbers::pi * f / 100.0));
  }
  est.estimate(noisy, noise);
  const auto ml_ceps = cepstrum_from_log(ml_speech_psd(noisy, noise).array().log().matrix());
  const auto& c = est.state().ceps_prev;
  EXPECT_NEAR(c[80], 0.8 * ml_ceps[80], 1e-12);
  EXPECT_NEAR(c[60], 0.04 * ml_ceps[60], 1e-12);
}

TEST(TcsConfig, Validation) {
  TcsConfig cfg;
  EXPECT_NO_THROW(cfg.validate());
  cfg.alpha_rest = 1.0;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = {};
  cfg.xi_min_ml = 0.0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace snrmask
