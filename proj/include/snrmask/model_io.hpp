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

#include <filesystem>
#include <string>

#include "snrmask/binary_io.hpp"
#include "snrmask/network.hpp"

namespace snrmask {

// Model file layout (little endian):
//   "SNRM" | u32 version | u64 seed | u32 feature kind | u32 context
//   | u32 layer count | per layer: u32 in, u32 out, u32 activation
//   | u64 parameter count | f32 parameters (per layer: weights, recurrent,
//   bias; column-major)
inline constexpr char kModelMagic[4] = {'S', 'N', 'R', 'M'};
inline constexpr std::uint32_t kModelVersion = 1;

inline std::vector<char> encode_model(const NetworkParams<float>& params) {
  io::ByteWriter w;
  w.bytes(std::string_view(kModelMagic, 4));
  w.u32(kModelVersion);
  w.u64(params.seed);
  w.u32(static_cast<std::uint32_t>(params.feature));
  w.u32(static_cast<std::uint32_t>(params.context));
  w.u32(static_cast<std::uint32_t>(params.layers.size()));
  for (const auto& l : params.layers) {
    w.u32(static_cast<std::uint32_t>(l.spec.in_dim));
    w.u32(static_cast<std::uint32_t>(l.spec.out_dim));
    w.u32(static_cast<std::uint32_t>(l.spec.activation));
  }
  w.u64(params.num_params());
  params.visit([&](const float* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) w.f32(d[i]);
  });
  return std::move(w.data());
}

inline NetworkParams<float> decode_model(const std::vector<char>& buf,
                                         const std::string& name = "model") {
  io::ByteReader r(buf, name);
  if (buf.size() < 4) {
    throw Error(ErrorKind::kCorruptFile, name + ": truncated model header");
  }
  if (r.bytes(4) != std::string_view(kModelMagic, 4)) {
    throw Error(ErrorKind::kFormat, name + ": not a model file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kModelVersion) {
    throw Error(ErrorKind::kFormat, name + ": unsupported model version " +
                                        std::to_string(version));
  }
  NetworkParams<float> p;
  p.seed = r.u64();
  p.feature = feature_kind_from_id(r.u32());
  p.context = static_cast<int>(r.u32());
  const std::uint32_t n_layers = r.u32();
  if (n_layers == 0 || n_layers > 64) {
    throw Error(ErrorKind::kCorruptFile, name + ": bad layer count");
  }
  std::vector<LayerSpec> spec;
  for (std::uint32_t i = 0; i < n_layers; ++i) {
    LayerSpec s;
    s.in_dim = static_cast<int>(r.u32());
    s.out_dim = static_cast<int>(r.u32());
    const std::uint32_t act = r.u32();
    if (act > static_cast<std::uint32_t>(Activation::kRecurrentGated) ||
        s.in_dim < 1 || s.out_dim < 1 || s.in_dim > (1 << 20) ||
        s.out_dim > (1 << 20)) {
      throw Error(ErrorKind::kCorruptFile, name + ": bad layer table");
    }
    s.activation = static_cast<Activation>(act);
    spec.push_back(s);
  }
  try {
    validate_layer_specs(spec);
  } catch (const Error& e) {
    throw Error(ErrorKind::kCorruptFile, name + ": " + e.what());
  }
  for (const auto& s : spec) {
    Layer<float> l;
    l.spec = s;
    if (s.activation == Activation::kRecurrentGated) {
      l.weights.resize(4 * s.out_dim, s.in_dim);
      l.recurrent.resize(4 * s.out_dim, s.out_dim);
      l.bias.resize(4 * s.out_dim);
    } else {
      l.weights.resize(s.out_dim, s.in_dim);
      l.recurrent.resize(0, 0);
      l.bias.resize(s.out_dim);
    }
    p.layers.push_back(std::move(l));
  }
  const std::uint64_t count = r.u64();
  if (count != p.num_params()) {
    throw Error(ErrorKind::kCorruptFile, name + ": parameter count mismatch");
  }
  if (r.remaining() != count * 4) {
    throw Error(ErrorKind::kCorruptFile,
                name + ": parameter blob has wrong length");
  }
  p.visit([&](float* d, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) d[i] = r.f32();
  });
  return p;
}

inline void save_model(const NetworkParams<float>& params,
                       const std::filesystem::path& path) {
  io::write_file(path, encode_model(params));
}

inline NetworkParams<float> load_model(const std::filesystem::path& path) {
  return decode_model(io::read_file(path), path.string());
}

}  // namespace snrmask
