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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "snrmask/binary_io.hpp"

namespace snrmask {

struct WavData {
  int sample_rate = 8000;
  std::vector<double> samples;  // mono, full scale = 1.0
};

/// Parses a mono 16-bit PCM RIFF/WAVE buffer. Unknown chunks are skipped.
inline WavData decode_wav(const std::vector<char>& buf,
                          const std::string& name = "wav") {
  io::ByteReader r(buf, name);
  if (buf.size() < 12 || r.bytes(4) != "RIFF") {
    throw Error(ErrorKind::kFormat, name + ": not a RIFF file");
  }
  r.u32();
  if (r.bytes(4) != "WAVE") {
    throw Error(ErrorKind::kFormat, name + ": not a WAVE file");
  }
  WavData wav;
  bool have_fmt = false;
  while (r.remaining() >= 8) {
    const std::string id = r.bytes(4);
    const std::uint32_t size = r.u32();
    if (id == "fmt ") {
      if (size < 16) throw Error(ErrorKind::kFormat, name + ": short fmt chunk");
      const std::uint16_t format = r.u16();
      const std::uint16_t channels = r.u16();
      wav.sample_rate = static_cast<int>(r.u32());
      r.u32();  // byte rate
      r.u16();  // block align
      const std::uint16_t bits = r.u16();
      r.skip(size - 16 + (size & 1));
      if ((format != 1 && format != 0xFFFE) || bits != 16) {
        throw Error(ErrorKind::kFormat, name + ": only 16-bit PCM is supported");
      }
      if (channels != 1) {
        throw Error(ErrorKind::kFormat, name + ": only mono audio is supported");
      }
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw Error(ErrorKind::kFormat, name + ": data before fmt");
      const std::size_t n = std::min<std::size_t>(size, r.remaining()) / 2;
      wav.samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        wav.samples[i] = static_cast<std::int16_t>(r.u16()) / 32768.0;
      }
      return wav;
    } else {
      r.skip(std::min<std::size_t>(size + (size & 1), r.remaining()));
    }
  }
  throw Error(ErrorKind::kFormat, name + ": no data chunk");
}

inline std::vector<char> encode_wav(std::span<const double> samples,
                                    int sample_rate = 8000) {
  io::ByteWriter w;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  w.bytes("RIFF");
  w.u32(36 + data_bytes);
  w.bytes("WAVE");
  w.bytes("fmt ");
  w.u32(16);
  w.u16(1);
  w.u16(1);
  w.u32(static_cast<std::uint32_t>(sample_rate));
  w.u32(static_cast<std::uint32_t>(sample_rate) * 2);
  w.u16(2);
  w.u16(16);
  w.bytes("data");
  w.u32(data_bytes);
  for (double s : samples) {
    const double v = std::clamp(std::round(s * 32768.0), -32768.0, 32767.0);
    w.u16(static_cast<std::uint16_t>(static_cast<std::int16_t>(v)));
  }
  return std::move(w.data());
}

inline WavData read_wav(const std::filesystem::path& path) {
  return decode_wav(io::read_file(path), path.string());
}

/// Reads a WAV file and insists on the toolkit's 8 kHz rate.
inline std::vector<double> read_wav_8k(const std::filesystem::path& path) {
  WavData w = read_wav(path);
  if (w.sample_rate != 8000) {
    throw Error(ErrorKind::kFormat, path.string() + ": sample rate " +
                                        std::to_string(w.sample_rate) +
                                        " Hz, expected 8000 Hz");
  }
  return std::move(w.samples);
}

inline void write_wav(const std::filesystem::path& path,
                      std::span<const double> samples, int sample_rate = 8000) {
  io::write_file(path, encode_wav(samples, sample_rate));
}

}  // namespace snrmask
