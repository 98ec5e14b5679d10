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

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <filesystem>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "snrmask/binary_io.hpp"
#include "snrmask/enhance.hpp"
#include "snrmask/error.hpp"
#include "snrmask/features.hpp"
#include "snrmask/stft.hpp"
#include "snrmask/wav.hpp"

namespace snrmask {

// ---------------------------------------------------------------------------
// Level and SNR

inline double peak_abs(std::span<const double> x) {
  double m = 0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

inline double energy(std::span<const double> x) {
  double e = 0;
  for (double v : x) e += v * v;
  return e;
}

struct Scaled {
  std::vector<double> samples;
  double gain = 1.0;
};

/// Scales a signal so that its peak magnitude is peak_dbfs re full scale.
inline Scaled scale_to_peak(std::span<const double> samples, double peak_dbfs) {
  const double peak = peak_abs(samples);
  detail::require(peak > 0.0, ErrorKind::kInvalidArgument,
                  "cannot scale an all-zero signal");
  Scaled out;
  out.gain = db_to_amplitude(peak_dbfs) / peak;
  out.samples.reserve(samples.size());
  for (double v : samples) out.samples.push_back(v * out.gain);
  return out;
}

/// Gain for the noise so that energy(speech) / energy(gain*noise) hits snr_db.
inline double noise_gain_for_snr(std::span<const double> speech,
                                 std::span<const double> noise, double snr_db) {
  const double es = energy(speech);
  const double en = energy(noise);
  detail::require(es > 0.0, ErrorKind::kInvalidArgument, "speech has zero energy");
  detail::require(en > 0.0, ErrorKind::kInvalidArgument, "noise has zero energy");
  return std::sqrt(es / (en * std::pow(10.0, snr_db / 10.0)));
}

struct Mixture {
  std::vector<double> noisy;
  std::vector<double> speech;  // delayed speech component, zero in the preamble
  std::vector<double> noise;   // scaled noise component
  double noise_gain = 0.0;
};

/// Speech delayed by init_samples on top of a noise excerpt of matching
/// length. The SNR is measured over the speech extent only; the preamble
/// holds noise alone.
inline Mixture mix_at_snr(std::span<const double> speech,
                          std::span<const double> noise, double snr_db,
                          std::size_t init_samples = 0) {
  const std::size_t total = init_samples + speech.size();
  detail::require(noise.size() >= total, ErrorKind::kInvalidArgument,
                  "noise shorter than speech plus preamble");
  Mixture m;
  m.noise_gain = noise_gain_for_snr(speech, noise.subspan(init_samples, speech.size()),
                                    snr_db);
  m.speech.assign(total, 0.0);
  std::copy(speech.begin(), speech.end(), m.speech.begin() + static_cast<std::ptrdiff_t>(init_samples));
  m.noise.resize(total);
  m.noisy.resize(total);
  for (std::size_t i = 0; i < total; ++i) {
    m.noise[i] = m.noise_gain * noise[i];
    m.noisy[i] = m.speech[i] + m.noise[i];
  }
  return m;
}

/// Noise excerpt starting at offset, wrapping around the source.
inline std::vector<double> noise_excerpt(std::span<const double> source,
                                         std::size_t offset, std::size_t length) {
  detail::require(!source.empty(), ErrorKind::kInvalidArgument, "empty noise source");
  std::vector<double> out(length);
  for (std::size_t i = 0; i < length; ++i) out[i] = source[(offset + i) % source.size()];
  return out;
}

// ---------------------------------------------------------------------------
// Manifest

struct MixRecord {
  std::string speech;
  std::string noise;
  double snr_db = 0.0;
  double peak_dbfs = -26.0;
  std::uint64_t noise_offset = 0;
  bool noise_only = false;
  // Resolved by synthesis.
  double speech_gain = 0.0;
  double noise_gain = 0.0;
};

struct CorpusManifest {
  std::uint64_t seed = 0;
  FeatureKind feature = FeatureKind::kSnrNat;
  int context = 1;
  double init_seconds = 2.0;
  std::vector<MixRecord> records;
};

/// Unresolved corpus description: sources plus the ranges to draw from.
struct CorpusPlan {
  std::uint64_t seed = 0;
  FeatureKind feature = FeatureKind::kSnrNat;
  int context = 1;
  double init_seconds = 2.0;
  std::vector<std::string> speech;
  std::vector<std::string> noise;
  int count = 0;
  double snr_lo = -10.0, snr_hi = 15.0;
  double peak_lo = -26.0, peak_hi = -3.0;
  double noise_only_fraction = 0.1;
};

/// Number of noise-only records for a corpus size (rounded to nearest).
inline int noise_only_count(int count, double fraction) {
  return static_cast<int>(std::lround(fraction * count));
}

/// Loads every distinct source once; workers then share it read-only.
class AudioCache {
 public:
  explicit AudioCache(std::filesystem::path base = {}) : base_(std::move(base)) {}

  /// Registers in-memory audio under a name (used instead of a file).
  void put(const std::string& name, std::vector<double> samples) {
    audio_[name] = std::move(samples);
  }

  const std::vector<double>& get(const std::string& name) {
    auto it = audio_.find(name);
    if (it != audio_.end()) return it->second;
    std::filesystem::path p(name);
    if (p.is_relative() && !base_.empty()) p = base_ / p;
    return audio_[name] = read_wav_8k(p);
  }

  const std::vector<double>& at(const std::string& name) const {
    auto it = audio_.find(name);
    detail::require(it != audio_.end(), ErrorKind::kIo, "audio not loaded: " + name);
    return it->second;
  }

 private:
  std::filesystem::path base_;
  std::map<std::string, std::vector<double>> audio_;
};

/// Draws per-record sources, SNRs, levels and noise offsets from the seed.
/// Speech sources are used in turn; the noise-only records are a seeded
/// random subset of size round(fraction * count).
inline CorpusManifest resolve_plan(const CorpusPlan& plan, AudioCache& audio) {
  detail::require(plan.count >= 1 && !plan.speech.empty() && !plan.noise.empty(),
                  ErrorKind::kInvalidArgument,
                  "corpus plan needs speech, noise and a positive count");
  detail::require(plan.snr_lo <= plan.snr_hi && plan.peak_lo <= plan.peak_hi,
                  ErrorKind::kInvalidArgument, "bad SNR or level range");
  detail::require(plan.noise_only_fraction >= 0.0 && plan.noise_only_fraction <= 1.0,
                  ErrorKind::kInvalidArgument, "noise_only_fraction must be in [0,1]");
  std::mt19937_64 rng(plan.seed);
  std::vector<int> idx(static_cast<std::size_t>(plan.count));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  std::vector<bool> noise_only(idx.size(), false);
  const int n_only = noise_only_count(plan.count, plan.noise_only_fraction);
  for (int i = 0; i < n_only; ++i) noise_only[static_cast<std::size_t>(idx[i])] = true;

  std::uniform_real_distribution<double> snr(plan.snr_lo, plan.snr_hi);
  std::uniform_real_distribution<double> peak(plan.peak_lo, plan.peak_hi);
  std::uniform_int_distribution<std::size_t> pick_noise(0, plan.noise.size() - 1);

  CorpusManifest m;
  m.seed = plan.seed;
  m.feature = plan.feature;
  m.context = plan.context;
  m.init_seconds = plan.init_seconds;
  for (int i = 0; i < plan.count; ++i) {
    MixRecord r;
    r.speech = plan.speech[static_cast<std::size_t>(i) % plan.speech.size()];
    r.noise = plan.noise[pick_noise(rng)];
    r.snr_db = snr(rng);
    r.peak_dbfs = peak(rng);
    const auto& src = audio.get(r.noise);
    detail::require(!src.empty(), ErrorKind::kInvalidArgument, "empty noise source " + r.noise);
    r.noise_offset = std::uniform_int_distribution<std::uint64_t>(0, src.size() - 1)(rng);
    r.noise_only = noise_only[static_cast<std::size_t>(i)];
    m.records.push_back(r);
  }
  return m;
}

inline nlohmann::json to_json(const MixRecord& r) {
  return {{"speech", r.speech},         {"noise", r.noise},
          {"snr_db", r.snr_db},         {"peak_dbfs", r.peak_dbfs},
          {"noise_offset", r.noise_offset}, {"noise_only", r.noise_only},
          {"speech_gain", r.speech_gain}, {"noise_gain", r.noise_gain}};
}

inline nlohmann::json to_json(const CorpusManifest& m) {
  nlohmann::json recs = nlohmann::json::array();
  for (const auto& r : m.records) recs.push_back(to_json(r));
  return {{"version", 1},           {"seed", m.seed},
          {"feature", to_string(m.feature)}, {"context", m.context},
          {"init_seconds", m.init_seconds}, {"records", recs}};
}

namespace detail {

template <typename V>
V json_get(const nlohmann::json& j, const char* key, V fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<V>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::kFormat, std::string("manifest field '") + key + "': " + e.what());
  }
}

inline std::pair<double, double> json_range(const nlohmann::json& j, const char* key,
                                            std::pair<double, double> fallback) {
  if (!j.contains(key)) return fallback;
  const auto v = json_get<std::vector<double>>(j, key, {});
  if (v.size() != 2) {
    throw Error(ErrorKind::kFormat, std::string("manifest field '") + key +
                                        "' must be a [lo, hi] pair");
  }
  return {v[0], v[1]};
}

}  // namespace detail

/// A manifest file holds either resolved "records" or a plan (sources and
/// ranges); plans are resolved with the audio cache.
inline CorpusManifest manifest_from_json(const nlohmann::json& j, AudioCache& audio) {
  if (!j.is_object()) throw Error(ErrorKind::kFormat, "manifest must be a JSON object");
  const int version = detail::json_get<int>(j, "version", 1);
  if (version != 1) throw Error(ErrorKind::kFormat, "unsupported manifest version");
  const auto seed = detail::json_get<std::uint64_t>(j, "seed", 0);
  const auto feature = parse_feature_kind(detail::json_get<std::string>(j, "feature", "snrnat"));
  const int context = detail::json_get<int>(j, "context", 1);
  const double init = detail::json_get<double>(j, "init_seconds", 2.0);
  detail::require(context >= 1, ErrorKind::kFormat, "context must be >= 1");
  detail::require(init >= 0.0, ErrorKind::kFormat, "init_seconds must be >= 0");

  if (j.contains("records")) {
    CorpusManifest m{seed, feature, context, init, {}};
    for (const auto& rj : j.at("records")) {
      MixRecord r;
      r.speech = detail::json_get<std::string>(rj, "speech", "");
      r.noise = detail::json_get<std::string>(rj, "noise", "");
      r.snr_db = detail::json_get<double>(rj, "snr_db", 0.0);
      r.peak_dbfs = detail::json_get<double>(rj, "peak_dbfs", -26.0);
      r.noise_offset = detail::json_get<std::uint64_t>(rj, "noise_offset", 0);
      r.noise_only = detail::json_get<bool>(rj, "noise_only", false);
      r.speech_gain = detail::json_get<double>(rj, "speech_gain", 0.0);
      r.noise_gain = detail::json_get<double>(rj, "noise_gain", 0.0);
      if (r.speech.empty() || r.noise.empty()) {
        throw Error(ErrorKind::kFormat, "manifest record needs speech and noise");
      }
      m.records.push_back(r);
    }
    return m;
  }

  CorpusPlan p;
  p.seed = seed;
  p.feature = feature;
  p.context = context;
  p.init_seconds = init;
  p.speech = detail::json_get<std::vector<std::string>>(j, "speech", {});
  p.noise = detail::json_get<std::vector<std::string>>(j, "noise", {});
  p.count = detail::json_get<int>(j, "count", static_cast<int>(p.speech.size()));
  std::tie(p.snr_lo, p.snr_hi) = detail::json_range(j, "snr_db", {p.snr_lo, p.snr_hi});
  std::tie(p.peak_lo, p.peak_hi) = detail::json_range(j, "peak_dbfs", {p.peak_lo, p.peak_hi});
  p.noise_only_fraction = detail::json_get<double>(j, "noise_only_fraction", 0.1);
  return resolve_plan(p, audio);
}

// ---------------------------------------------------------------------------
// Record files

enum class RecordContent : std::uint32_t {
  kFeatures = 0,     // features and IRM targets (targets may be absent)
  kActivations = 1,  // second-last-layer activations and predicted masks
};

struct Utterance {
  RealMatrix features;  // frames x feat_dim
  RealMatrix targets;   // frames x target_dim (target_dim may be 0)
};

struct RecordFile {
  RecordContent content = RecordContent::kFeatures;
  FeatureKind kind = FeatureKind::kSnrNat;
  int context = 1;
  int feat_dim = 0;
  int target_dim = 0;
  std::vector<Utterance> utterances;

  std::uint64_t total_frames() const {
    std::uint64_t n = 0;
    for (const auto& u : utterances) n += static_cast<std::uint64_t>(u.features.rows());
    return n;
  }
};

// Record file layout (little endian):
//   "SNRF" | u32 version | u32 content | u32 kind | u32 context
//   | u32 feat_dim | u32 target_dim | u32 utterances | u64 total frames
//   | per utterance: u32 frames, then per frame feat_dim + target_dim f32
inline constexpr char kRecordMagic[4] = {'S', 'N', 'R', 'F'};
inline constexpr std::uint32_t kRecordVersion = 1;

inline std::vector<char> encode_records(const RecordFile& f) {
  io::ByteWriter w;
  w.bytes(std::string_view(kRecordMagic, 4));
  w.u32(kRecordVersion);
  w.u32(static_cast<std::uint32_t>(f.content));
  w.u32(static_cast<std::uint32_t>(f.kind));
  w.u32(static_cast<std::uint32_t>(f.context));
  w.u32(static_cast<std::uint32_t>(f.feat_dim));
  w.u32(static_cast<std::uint32_t>(f.target_dim));
  w.u32(static_cast<std::uint32_t>(f.utterances.size()));
  w.u64(f.total_frames());
  for (const auto& u : f.utterances) {
    detail::require(u.features.cols() == f.feat_dim &&
                        (u.targets.cols() == f.target_dim) &&
                        (f.target_dim == 0 || u.targets.rows() == u.features.rows()),
                    ErrorKind::kInvalidArgument, "utterance dims do not match header");
    w.u32(static_cast<std::uint32_t>(u.features.rows()));
    for (Eigen::Index l = 0; l < u.features.rows(); ++l) {
      for (Eigen::Index d = 0; d < u.features.cols(); ++d) {
        w.f32(static_cast<float>(u.features(l, d)));
      }
      for (Eigen::Index d = 0; d < u.targets.cols(); ++d) {
        w.f32(static_cast<float>(u.targets(l, d)));
      }
    }
  }
  return std::move(w.data());
}

inline RecordFile decode_records(const std::vector<char>& buf,
                                 const std::string& name = "records") {
  io::ByteReader r(buf, name);
  if (buf.size() < 4) throw Error(ErrorKind::kCorruptFile, name + ": truncated header");
  if (r.bytes(4) != std::string_view(kRecordMagic, 4)) {
    throw Error(ErrorKind::kFormat, name + ": not a record file (bad magic)");
  }
  if (r.u32() != kRecordVersion) {
    throw Error(ErrorKind::kFormat, name + ": unsupported record version");
  }
  RecordFile f;
  const std::uint32_t content = r.u32();
  if (content > 1) throw Error(ErrorKind::kFormat, name + ": unknown content type");
  f.content = static_cast<RecordContent>(content);
  f.kind = feature_kind_from_id(r.u32());
  f.context = static_cast<int>(r.u32());
  f.feat_dim = static_cast<int>(r.u32());
  f.target_dim = static_cast<int>(r.u32());
  const std::uint32_t n_utt = r.u32();
  const std::uint64_t total = r.u64();
  if (f.feat_dim < 1 || f.feat_dim > (1 << 20) || f.target_dim < 0 ||
      f.target_dim > (1 << 20)) {
    throw Error(ErrorKind::kCorruptFile, name + ": bad dimensions");
  }
  const std::size_t row_bytes = 4u * static_cast<std::size_t>(f.feat_dim + f.target_dim);
  std::uint64_t seen = 0;
  for (std::uint32_t i = 0; i < n_utt; ++i) {
    const std::uint32_t frames = r.u32();
    if (static_cast<std::uint64_t>(frames) * row_bytes > r.remaining()) {
      throw Error(ErrorKind::kCorruptFile, name + ": utterance exceeds file size");
    }
    Utterance u;
    u.features.resize(frames, f.feat_dim);
    u.targets.resize(frames, f.target_dim);
    for (std::uint32_t l = 0; l < frames; ++l) {
      for (int d = 0; d < f.feat_dim; ++d) u.features(l, d) = r.f32();
      for (int d = 0; d < f.target_dim; ++d) u.targets(l, d) = r.f32();
    }
    seen += frames;
    f.utterances.push_back(std::move(u));
  }
  if (seen != total || r.remaining() != 0) {
    throw Error(ErrorKind::kCorruptFile, name + ": frame count does not match header");
  }
  return f;
}

inline void write_records(const std::filesystem::path& path, const RecordFile& f) {
  io::write_file(path, encode_records(f));
}

inline RecordFile read_records(const std::filesystem::path& path) {
  return decode_records(io::read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// Synthesis

/// Runs fn(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown by any task is rethrown.
template <typename F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  const std::size_t threads =
      std::min<std::size_t>(n, static_cast<std::size_t>(std::max(workers, 1)));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

/// Rebuilds the speech, noise and noisy signals of one record and fills in
/// its gains. Noise-only records draw the noise gain as if the speech were
/// present and then omit the speech.
inline Mixture synthesize(MixRecord& rec, const AudioCache& audio, double init_seconds,
                          int sample_rate = 8000) {
  const auto init = static_cast<std::size_t>(std::lround(init_seconds * sample_rate));
  const Scaled speech = scale_to_peak(audio.at(rec.speech), rec.peak_dbfs);
  const auto noise = noise_excerpt(audio.at(rec.noise), rec.noise_offset,
                                   init + speech.samples.size());
  Mixture m = mix_at_snr(speech.samples, noise, rec.snr_db, init);
  rec.speech_gain = speech.gain;
  rec.noise_gain = m.noise_gain;
  if (rec.noise_only) {
    std::fill(m.speech.begin(), m.speech.end(), 0.0);
    m.noisy = m.noise;
  }
  return m;
}

/// Features and IRM targets of one mixture with the initialization frames
/// removed. Context stacking happens before the cut so the first kept frame
/// sees real history.
inline Utterance make_utterance(const Mixture& m, FeatureKind kind, int context,
                                const EnhanceConfig& cfg) {
  const ComplexSpectrogram noisy = stft(m.noisy, cfg.frame);
  Trackers trackers(cfg.noise, cfg.tcs);
  const int init_frames = cfg.init_frames();
  trackers.init(noisy.power(), std::max(init_frames, 1));
  FeatureMatrix f = extract(noisy, kind, trackers);
  if (context > 1) f = stack_context(f, context);
  const MaskMatrix target = irm(stft(m.speech, cfg.frame), stft(m.noise, cfg.frame));
  const Eigen::Index drop = std::min<Eigen::Index>(init_frames, f.rows.rows());
  const Eigen::Index keep = f.rows.rows() - drop;
  return {f.rows.bottomRows(keep), target.bottomRows(keep)};
}

struct CorpusResult {
  RecordFile records;
  CorpusManifest manifest;  // with gains resolved
};

inline CorpusResult build_corpus(const CorpusManifest& manifest, AudioCache& audio,
                                 int workers = 1) {
  detail::require(!manifest.records.empty(), ErrorKind::kInvalidArgument,
                  "manifest has no records");
  for (const auto& r : manifest.records) {
    audio.get(r.speech);
    audio.get(r.noise);
  }
  EnhanceConfig cfg;
  cfg.init_seconds = manifest.init_seconds > 0.0 ? manifest.init_seconds : 1e-9;
  CorpusResult out;
  out.manifest = manifest;
  out.records.content = RecordContent::kFeatures;
  out.records.kind = manifest.feature;
  out.records.context = manifest.context;
  out.records.feat_dim = base_dim(manifest.feature) * manifest.context;
  out.records.target_dim = kNumBins;
  out.records.utterances.resize(manifest.records.size());
  const AudioCache& shared = audio;
  parallel_for(manifest.records.size(), workers, [&](std::size_t i) {
    MixRecord& rec = out.manifest.records[i];
    const Mixture m = synthesize(rec, shared, manifest.init_seconds);
    out.records.utterances[i] =
        make_utterance(m, manifest.feature, manifest.context, cfg);
  });
  return out;
}

}  // namespace snrmask
