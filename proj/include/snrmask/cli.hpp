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

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "snrmask/dataset.hpp"
#include "snrmask/enhance.hpp"
#include "snrmask/evaluation.hpp"
#include "snrmask/model_io.hpp"
#include "snrmask/network.hpp"
#include "snrmask/wav.hpp"

namespace snrmask::cli {

enum ExitCode : int {
  kOk = 0,
  kUsage = 2,
  kIoError = 3,
  kFormatError = 4,
  kNumericError = 5,
};

inline int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return kIoError;
    case ErrorKind::kFormat:
    case ErrorKind::kCorruptFile: return kFormatError;
    case ErrorKind::kNumeric:
    case ErrorKind::kUndefinedResult: return kNumericError;
    case ErrorKind::kInvalidArgument:
    case ErrorKind::kInvalidState: return kUsage;
  }
  return kUsage;
}

/// Verbosity from SNRMASK_LOG: 0 errors only (default), 1 info, 2 debug.
inline int log_level() {
  const char* v = std::getenv("SNRMASK_LOG");
  return v ? std::atoi(v) : 0;
}

inline void log_info(const std::string& msg) {
  if (log_level() >= 1) std::cerr << "snrmask: " << msg << "\n";
}

inline void require_file(const std::string& path) {
  if (!std::filesystem::is_regular_file(path)) {
    throw Error(ErrorKind::kIo, "no such file: " + path);
  }
}

inline nlohmann::json read_json(const std::string& path) {
  require_file(path);
  std::ifstream in(path);
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::kFormat, path + ": " + e.what());
  }
}

inline void write_text(const std::filesystem::path& path, const std::string& text) {
  io::write_file(path, std::vector<char>(text.begin(), text.end()));
}

struct Options {
  // shared
  std::optional<std::uint64_t> seed;
  std::optional<int> frames;
  std::optional<std::string> feature;
  std::optional<std::string> arch;
  std::string preset = "desk";
  double gain_floor_db = -20.0;
  int workers = 1;
  double init_seconds = 2.0;
  // positional / outputs
  std::string input;
  std::string output;
  std::string model;
  std::string mode;
  std::string resolved;
  std::string history;
  // training
  int epochs = 100;
  int batch = 128;
  double val_fraction = 0.15;
};

inline EnhanceConfig enhance_config(const Options& o) {
  EnhanceConfig cfg;
  cfg.gain_floor = db_to_amplitude(o.gain_floor_db);
  cfg.init_seconds = o.init_seconds;
  if (o.feature) cfg.feature = parse_feature_kind(*o.feature);
  return cfg;
}

inline int context_option(const Options& o, int fallback) {
  if (o.frames) {
    detail::require(*o.frames >= 1, ErrorKind::kInvalidArgument, "--frames must be >= 1");
    return *o.frames;
  }
  if (o.arch) return context_for(parse_architecture(*o.arch));
  return fallback;
}

inline int cmd_synth(const Options& o) {
  nlohmann::json j = read_json(o.input);
  if (o.seed) j["seed"] = *o.seed;
  if (o.feature) j["feature"] = to_string(parse_feature_kind(*o.feature));
  if (o.frames || o.arch) j["context"] = context_option(o, 1);
  AudioCache audio(std::filesystem::path(o.input).parent_path());
  const CorpusManifest manifest = manifest_from_json(j, audio);
  const CorpusResult result = build_corpus(manifest, audio, o.workers);
  write_records(o.output, result.records);
  const std::string resolved = o.resolved.empty() ? o.output + ".manifest.json" : o.resolved;
  write_text(resolved, to_json(result.manifest).dump(2) + "\n");
  int noise_only = 0;
  for (const auto& r : result.manifest.records) noise_only += r.noise_only ? 1 : 0;
  std::cout << "records\t" << result.records.utterances.size() << "\n"
            << "noise_only\t" << noise_only << "\n"
            << "frames\t" << result.records.total_frames() << "\n"
            << "feature\t" << to_string(result.records.kind) << "\n"
            << "feat_dim\t" << result.records.feat_dim << "\n";
  return kOk;
}

inline int cmd_featdump(const Options& o) {
  require_file(o.input);
  detail::require(o.feature.has_value(), ErrorKind::kInvalidArgument, "--feature is required");
  const auto samples = read_wav_8k(o.input);
  EnhanceConfig cfg = enhance_config(o);
  detail::require(samples.size() >= cfg.init_samples(), ErrorKind::kInvalidArgument,
                  "input shorter than the initialization period");
  const FeatureKind kind = parse_feature_kind(*o.feature);
  const int context = context_option(o, 1);
  const ComplexSpectrogram noisy = stft(samples, cfg.frame);
  Trackers trackers(cfg.noise, cfg.tcs);
  trackers.init(noisy.power(), cfg.init_frames());
  FeatureMatrix f = extract(noisy, kind, trackers);
  if (context > 1) f = stack_context(f, context);
  RecordFile rf;
  rf.kind = kind;
  rf.context = context;
  rf.feat_dim = f.dim();
  rf.target_dim = 0;
  rf.utterances.push_back({f.rows, RealMatrix(f.rows.rows(), 0)});
  write_records(o.output, rf);
  return kOk;
}

inline int cmd_train(const Options& o) {
  require_file(o.input);
  const RecordFile rf = read_records(o.input);
  detail::require(rf.content == RecordContent::kFeatures && rf.target_dim == kNumBins,
                  ErrorKind::kFormat, o.input + ": record file has no IRM targets");
  const Architecture arch = o.arch ? parse_architecture(*o.arch)
                                   : (rf.context > 1 ? Architecture::kFeedForward
                                                     : Architecture::kRecurrent);
  TrainConfig tc;
  tc.epochs = o.epochs;
  tc.batch_size = o.batch;
  tc.val_fraction = o.val_fraction;
  tc.seed = o.seed.value_or(0);
  auto params = glorot_init<float>(mask_network_spec(arch, parse_preset(o.preset), rf.feat_dim),
                                   tc.seed);
  params.feature = rf.kind;
  params.context = rf.context;
  std::vector<TrainRecord> data;
  for (const auto& u : rf.utterances) {
    data.push_back({FeatureMatrix{u.features, rf.kind, rf.context}, u.targets});
  }
  const auto result = train(params, data, tc, [](const EpochStats& s) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "epoch %d lr %.4f train %.6f val %.6f", s.epoch, s.lr,
                  s.train_loss, s.val_loss);
    log_info(buf);
  });
  save_model(result.params, o.output);
  std::string hist = "epoch\tlr\ttrain_loss\tval_loss\n";
  char buf[160];
  for (const auto& s : result.history) {
    std::snprintf(buf, sizeof buf, "%d\t%.6f\t%.9g\t%.9g\n", s.epoch, s.lr, s.train_loss,
                  s.val_loss);
    hist += buf;
  }
  if (!o.history.empty()) write_text(o.history, hist);
  std::cout << "best_epoch\t" << result.best_epoch << "\n"
            << "best_val_loss\t" << result.history[result.best_epoch - 1].val_loss << "\n";
  return kOk;
}

inline int cmd_enhance(const Options& o) {
  require_file(o.input);
  EnhanceConfig cfg = enhance_config(o);
  std::optional<NetworkParams<float>> model;
  const std::string mode = o.mode.empty() ? (o.model.empty() ? "conventional" : "dnn") : o.mode;
  if (mode == "dnn") {
    detail::require(!o.model.empty(), ErrorKind::kInvalidArgument, "dnn mode needs --model");
    require_file(o.model);
    model = load_model(o.model);
    cfg.mode = EnhanceMode::kDnnMask;
    check_mask_model(*model, cfg, cfg.frame.num_bins());
  } else if (mode != "conventional") {
    throw Error(ErrorKind::kInvalidArgument, "unknown mode '" + mode + "'");
  }
  const auto samples = read_wav_8k(o.input);
  const EnhanceResult r = enhance(samples, cfg, model ? &*model : nullptr);
  write_wav(o.output, r.samples);
  return kOk;
}

inline int cmd_eval(const Options& o) {
  const nlohmann::json j = read_json(o.input);
  EvalSet set = eval_set_from_json(j);
  if (o.seed) set.seed = *o.seed;
  set.init_seconds = o.init_seconds;
  EnhanceConfig cfg = enhance_config(o);
  const std::string mode_name =
      o.mode.empty() ? (o.model.empty() ? "conventional" : "dnn") : o.mode;
  const EvalMode mode = parse_eval_mode(mode_name);
  std::optional<NetworkParams<float>> model;
  if (mode == EvalMode::kDnn) {
    detail::require(!o.model.empty(), ErrorKind::kInvalidArgument, "dnn mode needs --model");
    require_file(o.model);
    model = load_model(o.model);
    check_mask_model(*model, cfg, cfg.frame.num_bins());
  }
  AudioCache audio(std::filesystem::path(o.input).parent_path());
  const auto rows = evaluate(set, audio, mode, cfg, model ? &*model : nullptr, o.workers);
  write_text(o.output, format_tsv(rows));
  return kOk;
}

inline int cmd_actdump(const Options& o) {
  require_file(o.input);
  require_file(o.model);
  const auto model = load_model(o.model);
  EnhanceConfig cfg = enhance_config(o);
  check_mask_model(model, cfg, cfg.frame.num_bins());
  const auto samples = read_wav_8k(o.input);
  detail::require(samples.size() >= cfg.init_samples(), ErrorKind::kInvalidArgument,
                  "input shorter than the initialization period");
  const ComplexSpectrogram noisy = stft(samples, cfg.frame);
  const ForwardResult fr = forward(model, model_features(noisy, model, cfg));
  RecordFile rf;
  rf.content = RecordContent::kActivations;
  rf.kind = model.feature;
  rf.context = model.context;
  rf.feat_dim = static_cast<int>(fr.hidden.cols());
  rf.target_dim = static_cast<int>(fr.mask.cols());
  rf.utterances.push_back({fr.hidden, fr.mask});
  write_records(o.output, rf);
  return kOk;
}

/// Parses arguments and runs one subcommand. Errors are reported on stderr
/// and mapped to exit codes: 2 usage, 3 io, 4 format, 5 numeric.
inline int run(int argc, const char* const* argv) {
  CLI::App app{"snrmask: SNR-feature mask-based speech enhancement toolkit"};
  app.require_subcommand(1);
  Options o;

  auto add_common = [&o](CLI::App* c) {
    c->add_option("--seed", o.seed, "Random seed");
    c->add_option("--workers", o.workers, "Worker threads")->check(CLI::PositiveNumber);
    c->add_option("--init-seconds", o.init_seconds, "Noise-only preamble length");
  };
  auto add_feature = [&o](CLI::App* c) {
    c->add_option("--feature", o.feature, "per|nat|prior|post|snrnat");
    c->add_option("--frames", o.frames, "Context frames stacked per feature vector");
  };

  auto* synth = app.add_subcommand("synth", "Synthesize a training corpus from a manifest");
  synth->add_option("manifest", o.input)->required();
  synth->add_option("-o,--out", o.output, "Record file")->required();
  synth->add_option("--resolved", o.resolved, "Resolved manifest output");
  synth->add_option("--arch", o.arch, "ff|rec (sets the context depth)");
  add_common(synth);
  add_feature(synth);

  auto* featdump = app.add_subcommand("featdump", "Write the features of one WAV file");
  featdump->add_option("wav", o.input)->required();
  featdump->add_option("-o,--out", o.output)->required();
  add_common(featdump);
  add_feature(featdump);
  featdump->add_option("--arch", o.arch, "ff|rec (sets the context depth)");

  auto* train_cmd = app.add_subcommand("train", "Train a mask network on a record file");
  train_cmd->add_option("records", o.input)->required();
  train_cmd->add_option("-o,--out", o.output, "Model file")->required();
  train_cmd->add_option("--arch", o.arch, "ff|rec");
  train_cmd->add_option("--preset", o.preset, "paper|desk");
  train_cmd->add_option("--epochs", o.epochs)->check(CLI::PositiveNumber);
  train_cmd->add_option("--batch", o.batch)->check(CLI::PositiveNumber);
  train_cmd->add_option("--val-fraction", o.val_fraction);
  train_cmd->add_option("--history", o.history, "Per-epoch loss TSV");
  add_common(train_cmd);

  auto* enh = app.add_subcommand("enhance", "Enhance one WAV file");
  enh->add_option("wav", o.input)->required();
  enh->add_option("-o,--out", o.output)->required();
  enh->add_option("--model", o.model);
  enh->add_option("--mode", o.mode, "conventional|dnn");
  enh->add_option("--gain-floor-db", o.gain_floor_db);
  add_common(enh);
  add_feature(enh);

  auto* ev = app.add_subcommand("eval", "Score a test set and write a metrics TSV");
  ev->add_option("testset", o.input)->required();
  ev->add_option("-o,--out", o.output)->required();
  ev->add_option("--model", o.model);
  ev->add_option("--mode", o.mode, "conventional|dnn|oracle");
  ev->add_option("--gain-floor-db", o.gain_floor_db);
  add_common(ev);
  add_feature(ev);

  auto* act = app.add_subcommand("actdump", "Write second-last-layer activations");
  act->add_option("wav", o.input)->required();
  act->add_option("--model", o.model)->required();
  act->add_option("-o,--out", o.output)->required();
  add_common(act);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (*synth) return cmd_synth(o);
    if (*featdump) return cmd_featdump(o);
    if (*train_cmd) return cmd_train(o);
    if (*enh) return cmd_enhance(o);
    if (*ev) return cmd_eval(o);
    if (*act) return cmd_actdump(o);
  } catch (const Error& e) {
    std::cerr << "snrmask: " << to_string(e.kind()) << ": " << e.what() << "\n";
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "snrmask: io: " << e.what() << "\n";
    return kIoError;
  }
  return kUsage;
}

}  // namespace snrmask::cli
