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

#include <json.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "snrmask/dataset.hpp"
#include "snrmask/enhance.hpp"
#include "snrmask/metrics.hpp"
#include "snrmask/network.hpp"

namespace snrmask {

enum class EvalMode { kConventional, kDnn, kOracle };

inline EvalMode parse_eval_mode(std::string_view s) {
  if (s == "conventional") return EvalMode::kConventional;
  if (s == "dnn") return EvalMode::kDnn;
  if (s == "oracle") return EvalMode::kOracle;
  throw Error(ErrorKind::kInvalidArgument, "unknown mode '" + std::string(s) + "'");
}

/// Test conditions: a level sweep at fixed SNR and an SNR sweep with
/// random peak levels, each crossed with every noise and speech file.
struct EvalSet {
  std::string dataset = "test";
  std::uint64_t seed = 0;
  double init_seconds = 2.0;
  std::vector<std::string> speech;
  std::vector<std::string> noise;
  bool level_sweep = true;
  double level_snr_db = 5.0;
  std::vector<double> levels_dbfs{-40, -24, -18, -12, -6};
  bool snr_sweep = true;
  std::vector<double> snrs_db{-5, 0, 5, 10, 15, 20};
  double peak_lo = -26.0, peak_hi = -3.0;
};

inline EvalSet eval_set_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kFormat, "test set must be a JSON object");
  EvalSet s;
  s.dataset = detail::json_get<std::string>(j, "dataset", s.dataset);
  s.seed = detail::json_get<std::uint64_t>(j, "seed", s.seed);
  s.init_seconds = detail::json_get<double>(j, "init_seconds", s.init_seconds);
  s.speech = detail::json_get<std::vector<std::string>>(j, "speech", {});
  s.noise = detail::json_get<std::vector<std::string>>(j, "noise", {});
  if (j.contains("level_sweep")) {
    const auto& l = j.at("level_sweep");
    s.level_sweep = !l.is_boolean() || l.get<bool>();
    if (l.is_object()) {
      s.level_snr_db = detail::json_get<double>(l, "snr_db", s.level_snr_db);
      s.levels_dbfs = detail::json_get<std::vector<double>>(l, "peak_dbfs", s.levels_dbfs);
    }
  }
  if (j.contains("snr_sweep")) {
    const auto& l = j.at("snr_sweep");
    s.snr_sweep = !l.is_boolean() || l.get<bool>();
    if (l.is_object()) {
      s.snrs_db = detail::json_get<std::vector<double>>(l, "snr_db", s.snrs_db);
      std::tie(s.peak_lo, s.peak_hi) = detail::json_range(l, "peak_dbfs", {s.peak_lo, s.peak_hi});
    }
  }
  if (s.speech.empty() || s.noise.empty()) {
    throw Error(ErrorKind::kFormat, "test set needs speech and noise lists");
  }
  return s;
}

struct EvalRow {
  std::string condition;  // "<sweep>/<noise name>"
  double snr_db = 0.0;
  std::optional<double> peak_dbfs;  // empty for random levels
  std::string feature;
  std::string dataset;
  double seg_ssnr = 0.0;
  double seg_nr = 0.0;
  double delta_seg_ssnr = 0.0;  // relative to the conventional Wiener chain
  double delta_seg_nr = 0.0;
};

/// Gains for one mixture in the requested mode.
inline MaskMatrix mixture_gains(const Mixture& m, EvalMode mode, const EnhanceConfig& cfg,
                                const NetworkParams<float>* model) {
  const ComplexSpectrogram noisy = stft(m.noisy, cfg.frame);
  switch (mode) {
    case EvalMode::kConventional:
      return conventional_gains(noisy, cfg);
    case EvalMode::kDnn:
      detail::require(model != nullptr, ErrorKind::kInvalidArgument, "dnn mode needs a model");
      return dnn_gains(noisy, *model, cfg);
    case EvalMode::kOracle:
      return irm(stft(m.speech, cfg.frame), stft(m.noise, cfg.frame));
  }
  return {};
}

/// Shadow-filter scores of a mixture, excluding the initialization region.
inline ShadowScores score_mixture(const Mixture& m, const MaskMatrix& gains,
                                  const EnhanceConfig& cfg) {
  return shadow_scores(m.speech, m.noise, gains, cfg.gain_floor,
                       std::max<std::size_t>(cfg.init_samples(), cfg.frame.frame_shift),
                       m.noisy.size(), cfg.frame);
}

inline std::string stem_of(const std::string& path) {
  return std::filesystem::path(path).stem().string();
}

/// Runs every condition of the set. Rows come out in a fixed order (sweep,
/// noise, condition value) and each row averages over the speech files.
inline std::vector<EvalRow> evaluate(const EvalSet& set, AudioCache& audio, EvalMode mode,
                                     const EnhanceConfig& cfg,
                                     const NetworkParams<float>* model, int workers = 1) {
  struct Job {
    std::size_t row;
    MixRecord rec;
  };
  std::vector<EvalRow> rows;
  std::vector<Job> jobs;
  std::mt19937_64 rng(set.seed);
  std::uniform_real_distribution<double> peak(set.peak_lo, set.peak_hi);
  const std::string feature =
      mode == EvalMode::kDnn && model ? to_string(model->feature)
                                      : (mode == EvalMode::kOracle ? "oracle" : "conventional");
  for (const auto& s : set.speech) audio.get(s);
  for (const auto& n : set.noise) audio.get(n);

  auto add_rows = [&](const std::string& sweep, double snr, std::optional<double> level) {
    for (const auto& noise : set.noise) {
      rows.push_back({sweep + "/" + stem_of(noise), snr, level, feature, set.dataset});
      for (const auto& speech : set.speech) {
        MixRecord r;
        r.speech = speech;
        r.noise = noise;
        r.snr_db = snr;
        r.peak_dbfs = level ? *level : peak(rng);
        const auto n_len = audio.at(noise).size();
        r.noise_offset = std::uniform_int_distribution<std::uint64_t>(0, n_len - 1)(rng);
        jobs.push_back({rows.size() - 1, r});
      }
    }
  };
  if (set.level_sweep) {
    for (double level : set.levels_dbfs) add_rows("level", set.level_snr_db, level);
  }
  if (set.snr_sweep) {
    for (double snr : set.snrs_db) add_rows("snr", snr, std::nullopt);
  }

  std::vector<ShadowScores> scores(jobs.size()), baseline(jobs.size());
  const AudioCache& shared = audio;
  parallel_for(jobs.size(), workers, [&](std::size_t i) {
    MixRecord rec = jobs[i].rec;
    const Mixture m = synthesize(rec, shared, set.init_seconds);
    scores[i] = score_mixture(m, mixture_gains(m, mode, cfg, model), cfg);
    baseline[i] = mode == EvalMode::kConventional
                      ? scores[i]
                      : score_mixture(m, mixture_gains(m, EvalMode::kConventional, cfg, nullptr),
                                      cfg);
  });

  std::vector<int> ssnr_count(rows.size(), 0), nr_count(rows.size(), 0);
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    auto& row = rows[jobs[i].row];
    if (std::isfinite(scores[i].seg_ssnr) && std::isfinite(baseline[i].seg_ssnr)) {
      row.seg_ssnr += scores[i].seg_ssnr;
      row.delta_seg_ssnr += scores[i].seg_ssnr - baseline[i].seg_ssnr;
      ++ssnr_count[jobs[i].row];
    }
    row.seg_nr += scores[i].seg_nr;
    row.delta_seg_nr += scores[i].seg_nr - baseline[i].seg_nr;
    ++nr_count[jobs[i].row];
  }
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double ns = ssnr_count[r] > 0 ? ssnr_count[r] : std::numeric_limits<double>::quiet_NaN();
    rows[r].seg_ssnr /= ns;
    rows[r].delta_seg_ssnr /= ns;
    rows[r].seg_nr /= nr_count[r];
    rows[r].delta_seg_nr /= nr_count[r];
  }
  return rows;
}

inline std::string format_tsv(const std::vector<EvalRow>& rows) {
  std::string out =
      "condition\tsnr_db\tpeak_dbfs\tfeature\tdataset\tseg_ssnr\tseg_nr\t"
      "delta_seg_ssnr\tdelta_seg_nr\n";
  char buf[256];
  for (const auto& r : rows) {
    std::string peak = "rand";
    if (r.peak_dbfs) {
      std::snprintf(buf, sizeof buf, "%.2f", *r.peak_dbfs);
      peak = buf;
    }
    std::snprintf(buf, sizeof buf, "%.2f\t%s\t%s\t%s\t%.4f\t%.4f\t%.4f\t%.4f", r.snr_db,
                  peak.c_str(), r.feature.c_str(), r.dataset.c_str(), r.seg_ssnr, r.seg_nr,
                  r.delta_seg_ssnr, r.delta_seg_nr);
    out += r.condition + "\t" + buf + "\n";
  }
  return out;
}

}  // namespace snrmask
