#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>

#include "mosest/audio/buffer.hpp"
#include "mosest/core/error.hpp"
#include "mosest/io/container.hpp"

namespace mosest::io {

/// 16-bit PCM mono WAV at 16 kHz. Anything else is rejected on read.
inline audio::AudioBuffer decode_wav(std::string_view bytes, const std::string& name = "wav") {
  detail::Reader r(bytes);
  try {
    if (r.take(4) != "RIFF") throw FormatError("not a RIFF file");
    r.get<std::uint32_t>();
    if (r.take(4) != "WAVE") throw FormatError("not a WAVE file");
    bool have_fmt = false;
    while (r.remaining() >= 8) {
      const auto id = r.take(4);
      const auto size = r.get<std::uint32_t>();
      if (id == "fmt ") {
        if (size < 16) throw FormatError("short fmt chunk");
        const auto format = r.get<std::uint16_t>();
        const auto channels = r.get<std::uint16_t>();
        const auto rate = r.get<std::uint32_t>();
        r.get<std::uint32_t>();
        r.get<std::uint16_t>();
        const auto bits = r.get<std::uint16_t>();
        r.take(size - 16);
        if (format != 1 || bits != 16) throw DataError(name + ": only 16-bit PCM is supported");
        if (channels != 1) throw DataError(name + ": only mono audio is supported");
        if (rate != static_cast<std::uint32_t>(audio::kSampleRate))
          throw DataError(name + ": sample rate " + std::to_string(rate) + " != 16000");
        have_fmt = true;
      } else if (id == "data") {
        if (!have_fmt) throw FormatError("data chunk before fmt chunk");
        const auto data = r.take(std::min<std::size_t>(size, r.remaining()));
        audio::AudioBuffer out;
        out.samples.resize(data.size() / 2);
        for (std::size_t i = 0; i < out.samples.size(); ++i) {
          std::int16_t s;
          std::memcpy(&s, data.data() + 2 * i, 2);
          out.samples[i] = static_cast<double>(s) / 32768.0;
        }
        return out;
      } else {
        r.take(std::min<std::size_t>(size + (size & 1U), r.remaining()));
      }
    }
  } catch (const FormatError& e) {
    throw FormatError(name + ": " + e.what());
  }
  throw FormatError(name + ": no data chunk");
}

struct WavEncoding {
  std::string bytes;
  std::size_t clipped = 0;  ///< samples outside [-1, 1) that were saturated
};

inline WavEncoding encode_wav(const audio::AudioBuffer& a) {
  WavEncoding enc;
  const auto n = static_cast<std::uint32_t>(a.samples.size());
  auto& out = enc.bytes;
  out.reserve(44 + 2 * n);
  out += "RIFF";
  detail::put<std::uint32_t>(out, 36 + 2 * n);
  out += "WAVEfmt ";
  detail::put<std::uint32_t>(out, 16);
  detail::put<std::uint16_t>(out, 1);
  detail::put<std::uint16_t>(out, 1);
  detail::put<std::uint32_t>(out, audio::kSampleRate);
  detail::put<std::uint32_t>(out, audio::kSampleRate * 2);
  detail::put<std::uint16_t>(out, 2);
  detail::put<std::uint16_t>(out, 16);
  out += "data";
  detail::put<std::uint32_t>(out, 2 * n);
  for (double x : a.samples) {
    if (!std::isfinite(x)) throw InvalidArgument("non-finite sample in audio buffer");
    double scaled = std::nearbyint(x * 32768.0);
    if (scaled > 32767.0 || scaled < -32768.0) {
      ++enc.clipped;
      scaled = std::clamp(scaled, -32768.0, 32767.0);
    }
    detail::put<std::int16_t>(out, static_cast<std::int16_t>(scaled));
  }
  return enc;
}

inline audio::AudioBuffer read_wav(const std::filesystem::path& path) {
  return decode_wav(read_file(path), path.string());
}

/// Returns the number of clipped samples.
inline std::size_t write_wav(const std::filesystem::path& path, const audio::AudioBuffer& a) {
  auto enc = encode_wav(a);
  write_file_atomic(path, enc.bytes);
  return enc.clipped;
}

}  // namespace mosest::io
