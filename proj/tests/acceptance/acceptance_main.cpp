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

// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit on any
// failure. Measured values are printed next to each verdict.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "snrmask.hpp"
#include "snrmask/cli.hpp"
#include "support/gradcheck.hpp"
#include "support/signals.hpp"

namespace {

using namespace snrmask;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Verdict {
  bool pass = true;
  std::string detail;

  void check(bool ok, const char* fmt, auto... args) {
    char buf[256];
    std::snprintf(buf, sizeof buf, fmt, args...);
    if (!detail.empty()) detail += "; ";
    detail += buf;
    if (!ok) {
      detail += " [x]";
      pass = false;
    }
  }
};

int failures = 0;

void report(int id, const char* name, const std::function<Verdict()>& fn) {
  Verdict v;
  try {
    v = fn();
  } catch (const std::exception& e) {
    v.pass = false;
    v.detail = std::string("exception: ") + e.what();
  }
  if (!v.pass) ++failures;
  std::printf("%s criterion %d (%s): %s\n", v.pass ? "PASS" : "FAIL", id, name,
              v.detail.c_str());
  std::fflush(stdout);
}

std::vector<double> scaled(const std::vector<double>& x, double g) {
  std::vector<double> y(x);
  for (auto& v : y) v *= g;
  return y;
}

// ---------------------------------------------------------------------------
// Shared desk-scale setup: in-memory corpus, trained model, held-out audio.

constexpr int kTrainUtterances = 60;
constexpr int kTestUtterances = 12;
constexpr double kUtteranceSeconds = 3.0;

struct Desk {
  AudioCache audio;
  NetworkParams<float> model;
  TrainResult<float> result;
  double train_seconds = 0.0;
  double synth_seconds = 0.0;
};

AudioCache training_audio() {
  AudioCache a;
  for (int i = 0; i < 20; ++i) {
    a.put("train/sp" + std::to_string(i), testing::pseudo_speech(kUtteranceSeconds, 1000 + i));
  }
  a.put("train/white", testing::white_noise(8000 * 60, 0.1, 2000));
  a.put("train/modwhite", testing::modulated_white_noise(8000 * 60, 0.1, 2001));
  // Held out from training.
  for (int i = 0; i < kTestUtterances; ++i) {
    a.put("test/sp" + std::to_string(i), testing::pseudo_speech(kUtteranceSeconds, 5000 + i));
  }
  a.put("test/white", testing::white_noise(8000 * 60, 0.1, 6000));
  return a;
}

Desk& desk() {
  static Desk d = [] {
    Desk d;
    d.audio = training_audio();
    CorpusPlan plan;
    plan.seed = 7;
    plan.feature = FeatureKind::kSnrNat;
    plan.context = context_for(Architecture::kFeedForward);
    for (int i = 0; i < 20; ++i) plan.speech.push_back("train/sp" + std::to_string(i));
    plan.noise = {"train/white", "train/modwhite"};
    plan.count = kTrainUtterances;
    plan.snr_lo = -5.0;
    plan.snr_hi = 15.0;
    auto t0 = Clock::now();
    const auto manifest = resolve_plan(plan, d.audio);
    const auto corpus = build_corpus(manifest, d.audio, 1);
    d.synth_seconds = seconds_since(t0);

    std::vector<TrainRecord> data;
    for (const auto& u : corpus.records.utterances) {
      data.push_back({FeatureMatrix{u.features, plan.feature, plan.context}, u.targets});
    }
    auto init = glorot_init<float>(
        mask_network_spec(Architecture::kFeedForward, Preset::kDesk, corpus.records.feat_dim),
        11);
    init.feature = plan.feature;
    init.context = plan.context;
    TrainConfig cfg;
    cfg.epochs = 30;
    // Small minibatches: the 3-minute corpus gives only ~9k training frames.
    cfg.batch_size = 4;
    cfg.seed = 11;
    t0 = Clock::now();
    d.result = train(init, data, cfg);
    d.train_seconds = seconds_since(t0);
    d.model = d.result.params;
    return d;
  }();
  return d;
}

EvalSet held_out_set() {
  EvalSet s;
  s.dataset = "heldout";
  s.seed = 3;
  for (int i = 0; i < kTestUtterances; ++i) s.speech.push_back("test/sp" + std::to_string(i));
  s.noise = {"test/white"};
  s.level_snr_db = 5.0;
  s.levels_dbfs = {-40, -24, -18, -12, -6};
  s.snrs_db = {0, 5};
  return s;
}

std::vector<EvalRow> held_out_rows(EvalMode mode) {
  Desk& d = desk();
  return evaluate(held_out_set(), d.audio, mode, EnhanceConfig{},
                  mode == EvalMode::kDnn ? &d.model : nullptr);
}

EvalRow snr_row(const std::vector<EvalRow>& rows, double snr) {
  for (const auto& r : rows) {
    if (r.condition.rfind("snr/", 0) == 0 && r.snr_db == snr) return r;
  }
  throw Error(ErrorKind::kInvalidState, "missing SNR row");
}

// A held-out noisy utterance: 2 s of noise, then speech at 5 dB SNR.
std::vector<double> held_out_mixture() {
  Desk& d = desk();
  MixRecord rec{"test/sp0", "test/white", 5.0, -12.0, 4321, false, 0, 0};
  return synthesize(rec, d.audio, 2.0).noisy;
}

// ---------------------------------------------------------------------------
// Criteria

Verdict stft_round_trip() {
  Verdict v;
  double worst = 0.0;
  const auto t0 = Clock::now();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto x = testing::white_noise(16000, 0.3, seed);
    const auto y = istft(stft(x));
    double err = 0.0, peak = 0.0;
    for (std::size_t i = 128; i + 128 < y.size(); ++i) {
      err = std::max(err, std::abs(y[i] - x[i]));
      peak = std::max(peak, std::abs(x[i]));
    }
    worst = std::max(worst, err / peak);
  }
  const double per_signal = seconds_since(t0) / 5;
  v.check(worst < 1e-6, "max interior rel err %.2e < 1e-6", worst);
  v.check(per_signal < 1.0, "%.4f s per 2-s signal < 1 s", per_signal);
  return v;
}

Verdict scale_invariance() {
  Verdict v;
  Desk& d = desk();
  const auto x = held_out_mixture();
  const double gains[] = {std::pow(10.0, -1.7), 1.0, std::pow(10.0, 0.9)};
  EnhanceConfig cfg;
  auto features = [&](double g, FeatureKind kind) {
    const auto spec = stft(scaled(x, g));
    Trackers t;
    t.init(spec.power(), cfg.init_frames());
    return extract(spec, kind, t).rows;
  };
  auto dnn = [&](double g) { return dnn_gains(stft(scaled(x, g)), d.model, cfg); };

  const RealMatrix f_ref = features(1.0, FeatureKind::kSnrNat);
  const RealMatrix g_ref = dnn(1.0);
  const RealMatrix p_ref = features(1.0, FeatureKind::kLogPeriodogram);
  double feat_dev = 0, gain_dev = 0, shift_dev = 0;
  for (double g : gains) {
    feat_dev = std::max(feat_dev, (features(g, FeatureKind::kSnrNat) - f_ref).cwiseAbs().maxCoeff());
    gain_dev = std::max(gain_dev, (dnn(g) - g_ref).cwiseAbs().maxCoeff());
    const RealMatrix shift = features(g, FeatureKind::kLogPeriodogram) - p_ref;
    shift_dev = std::max(shift_dev, (shift.array() - 2.0 * std::log(g)).abs().maxCoeff());
  }
  v.check(feat_dev < 1e-5, "SNR-NAT feature dev %.2e < 1e-5", feat_dev);
  v.check(gain_dev < 1e-5, "DNN gain dev %.2e < 1e-5", gain_dev);
  v.check(shift_dev < 1e-9, "log-periodogram shift dev from 2 log g %.2e", shift_dev);

  double lo = 1e9, hi = -1e9;
  for (const auto& r : held_out_rows(EvalMode::kDnn)) {
    if (r.condition.rfind("level/", 0) != 0) continue;
    lo = std::min(lo, r.seg_nr);
    hi = std::max(hi, r.seg_nr);
  }
  v.check(hi - lo < 0.5, "SegNR spread over -40..-6 dBFS %.3f dB < 0.5", hi - lo);
  return v;
}

// Median over bins of 10 log10(tracked / truth) at each frame.
std::vector<double> tracking_error_db(const std::vector<double>& init_noise,
                                      const std::vector<double>& noise,
                                      const std::vector<double>& truth_per_frame) {
  NoiseTracker tracker;
  tracker.init(stft(init_noise).power());
  const RealMatrix p = stft(noise).power();
  std::vector<double> med(static_cast<std::size_t>(p.rows()));
  for (Eigen::Index l = 0; l < p.rows(); ++l) {
    const RealVector est = tracker.update(p.row(l).transpose()).noise_psd;
    std::vector<double> db(static_cast<std::size_t>(est.size()));
    for (Eigen::Index k = 0; k < est.size(); ++k) {
      db[static_cast<std::size_t>(k)] =
          10.0 * std::log10(est[k] / truth_per_frame[static_cast<std::size_t>(l)]);
    }
    std::nth_element(db.begin(), db.begin() + db.size() / 2, db.end());
    med[static_cast<std::size_t>(l)] = db[db.size() / 2];
  }
  return med;
}

Verdict tracker_accuracy() {
  Verdict v;
  const double sigma = 0.1;
  const double truth = sigma * sigma * 128.0;  // E|Y|^2 with sum(w^2) = 128
  const int one_second = FrameParams{}.frames_for(8000);
  const int two_seconds = FrameParams{}.frames_for(16000);

  // Stationary noise; the tracker starts 6 dB low.
  {
    const auto init = testing::white_noise(16000, sigma / 2, 1);
    const auto noise = testing::white_noise(8000 * 4, sigma, 2);
    const auto err = tracking_error_db(init, noise, std::vector<double>(300, truth));
    double worst = 0;
    for (std::size_t l = one_second; l < err.size(); ++l) worst = std::max(worst, std::abs(err[l]));
    v.check(worst <= 3.0, "stationary: max |median err| after 1 s %.2f dB <= 3", worst);
  }
  // 6 dB steps up and down after 3 s.
  for (double step_db : {6.0, -6.0}) {
    const double g = std::pow(10.0, step_db / 20.0);
    const auto init = testing::white_noise(16000, sigma, 3);
    auto noise = testing::white_noise(8000 * 8, sigma, 4);
    for (std::size_t i = 8000 * 3; i < noise.size(); ++i) noise[i] *= g;
    // Frames fully after the step see the new level.
    const int step_frame = 8000 * 3 / 128;
    std::vector<double> t(600, truth);
    for (std::size_t l = step_frame; l < t.size(); ++l) t[l] = truth * g * g;
    const auto err = tracking_error_db(init, noise, t);
    int settled = -1;
    for (std::size_t l = step_frame; l < err.size(); ++l) {
      bool ok = true;
      for (std::size_t m = l; m < err.size(); ++m) ok = ok && std::abs(err[m]) <= 3.0;
      if (ok) {
        settled = static_cast<int>(l) - step_frame;
        break;
      }
    }
    const double settle_s = settled < 0 ? 1e9 : settled * 128.0 / 8000.0;
    v.check(settled >= 0 && settled <= two_seconds,
            "%+.0f dB step: within 3 dB after %.2f s <= 2 s", step_db, settle_s);
  }
  return v;
}

Verdict gradient_check() {
  Verdict v;
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto fill = [&](Eigen::Index r, Eigen::Index c, bool unit) {
    Mat<double> m(r, c);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = unit ? u(rng) : n(rng);
    return m;
  };
  auto jitter_bias = [&](NetworkParams<double>& p) {
    for (auto& l : p.layers) {
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias[i] = 0.2 * n(rng);
    }
  };
  auto mlp = glorot_init<double>(
      {{6, 10, Activation::kReLU}, {10, 6, Activation::kReLU}, {6, 4, Activation::kSigmoid}}, 1);
  jitter_bias(mlp);
  auto rec = glorot_init<double>(
      {{4, 4, Activation::kRecurrentGated}, {4, 3, Activation::kSigmoid}}, 2);
  jitter_bias(rec);
  const double e_mlp = testing::max_gradient_error(mlp, fill(8, 6, false), fill(8, 4, true));
  const double e_rec = testing::max_gradient_error(rec, fill(12, 4, false), fill(12, 3, true));
  v.check(mlp.num_params() <= 200 && rec.num_params() <= 200, "params %zu / %zu <= 200",
          mlp.num_params(), rec.num_params());
  v.check(e_mlp < 1e-4, "MLP max rel err %.2e < 1e-4", e_mlp);
  v.check(e_rec < 1e-4, "LSTM max rel err %.2e < 1e-4", e_rec);
  return v;
}

Verdict lr_schedule() {
  Verdict v;
  v.check(lr_at(1) == 0.4, "lr(1) = %.6f", lr_at(1));
  v.check(std::abs(lr_at(28) - 0.1001) < 5e-5, "lr(28) = %.6f ~ 0.1001", lr_at(28));
  v.check(lr_at(100) == 0.1, "lr(100) = %.6f", lr_at(100));
  return v;
}

Verdict desk_training() {
  Verdict v;
  Desk& d = desk();
  const auto& h = d.result.history;
  double best = h.front().val_loss;
  for (const auto& e : h) best = std::min(best, e.val_loss);
  v.check(h.size() == 30, "%zu epochs", h.size());
  v.check(d.train_seconds < 600.0, "train %.1f s < 600 s (synth %.1f s)", d.train_seconds,
          d.synth_seconds);
  v.check(best <= 0.7 * h.front().val_loss, "best val %.4f <= 0.7 x epoch-1 %.4f", best,
          h.front().val_loss);
  const auto row = snr_row(held_out_rows(EvalMode::kDnn), 5.0);
  v.check(row.seg_nr >= 5.0, "held-out 5 dB SegNR %.2f >= 5", row.seg_nr);
  v.check(row.seg_ssnr >= 10.0, "SegSSNR %.2f >= 10", row.seg_ssnr);
  return v;
}

Verdict oracle_mask() {
  Verdict v;
  const auto oracle = snr_row(held_out_rows(EvalMode::kOracle), 0.0);
  const auto model = snr_row(held_out_rows(EvalMode::kDnn), 0.0);
  v.check(oracle.seg_nr >= 10.0 && oracle.seg_nr <= 20.0, "oracle SegNR %.2f in [10, 20]",
          oracle.seg_nr);
  v.check(oracle.seg_nr > model.seg_nr, "oracle %.2f > model %.2f", oracle.seg_nr,
          model.seg_nr);
  return v;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Verdict cli_determinism() {
  Verdict v;
  namespace fs = std::filesystem;
  const fs::path dir = fs::temp_directory_path() / "snrmask_acceptance_cli";
  fs::remove_all(dir);
  fs::create_directories(dir);
  for (int i = 0; i < 4; ++i) {
    write_wav(dir / ("sp" + std::to_string(i) + ".wav"), testing::pseudo_speech(2.0, 70 + i));
  }
  write_wav(dir / "white.wav", testing::white_noise(8000 * 20, 0.1, 80));
  write_wav(dir / "modwhite.wav", testing::modulated_white_noise(8000 * 20, 0.1, 81));
  std::ofstream(dir / "train.json")
      << R"({"speech": ["sp0.wav", "sp1.wav", "sp2.wav"], "noise": ["white.wav", "modwhite.wav"],)"
      << R"( "count": 10, "snr_db": [-5, 15], "feature": "snrnat"})";
  std::ofstream(dir / "test.json")
      << R"({"speech": ["sp3.wav"], "noise": ["white.wav"], "snr_sweep": {"snr_db": [0, 5]},)"
      << R"( "level_sweep": {"snr_db": 5, "peak_dbfs": [-24, -6]}})";

  auto run = [&](std::vector<std::string> args) {
    args.insert(args.begin(), "snrmask");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    return cli::run(static_cast<int>(argv.size()), argv.data());
  };
  std::vector<std::string> outputs[2];
  for (int pass = 0; pass < 2; ++pass) {
    const std::string tag = std::to_string(pass);
    const auto p = [&](const std::string& n) { return (dir / (n + tag)).string(); };
    int rc = run({"synth", (dir / "train.json").string(), "-o", p("records"), "--arch", "ff",
                  "--seed", "42"});
    rc |= run({"train", p("records"), "-o", p("model"), "--epochs", "3", "--seed", "42"});
    rc |= run({"eval", (dir / "test.json").string(), "-o", p("tsv"), "--model", p("model"),
               "--seed", "42"});
    v.check(rc == 0, "pass %d exit status %d", pass + 1, rc);
    for (const char* n : {"records", "model", "tsv"}) outputs[pass].push_back(slurp(p(n)));
    outputs[pass].push_back(slurp(p("records") + ".manifest.json"));
  }
  const char* names[] = {"records", "model", "tsv", "manifest"};
  for (int i = 0; i < 4; ++i) {
    const bool same = !outputs[0][i].empty() && outputs[0][i] == outputs[1][i];
    v.check(same, "%s identical (%zu bytes)", names[i], outputs[0][i].size());
  }
  fs::remove_all(dir);
  return v;
}

Verdict noise_only_rejection() {
  Verdict v;
  Desk& d = desk();
  // Held-out stationary noise only, at a typical level.
  const auto noise = scaled(testing::white_noise(8000 * 6, 1.0, 9000), 0.05);
  EnhanceConfig cfg;
  cfg.mode = EnhanceMode::kDnnMask;
  const auto r = enhance(noise, cfg, &d.model);
  int ok = 0;
  for (Eigen::Index l = 0; l < r.gains.rows(); ++l) {
    const double mean = r.gains.row(l).cwiseMax(cfg.gain_floor).mean();
    ok += mean <= cfg.gain_floor + 0.05;
  }
  const double frac = static_cast<double>(ok) / static_cast<double>(r.gains.rows());
  v.check(frac >= 0.9, "%.1f%% of frames with mean gain <= %.2f (need >= 90%%)", 100 * frac,
          cfg.gain_floor + 0.05);
  return v;
}

}  // namespace

int main() {
  report(1, "STFT round trip", stft_round_trip);
  report(2, "scale invariance", scale_invariance);
  report(3, "noise tracker accuracy", tracker_accuracy);
  report(4, "gradient correctness", gradient_check);
  report(5, "learning-rate schedule", lr_schedule);
  report(6, "desk-scale training", desk_training);
  report(7, "oracle mask", oracle_mask);
  report(8, "CLI determinism", cli_determinism);
  report(9, "noise-only rejection", noise_only_rejection);
  std::printf("%d of 9 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
