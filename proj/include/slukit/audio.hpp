#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "slukit/common.hpp"

namespace slukit {

/// Mono waveform. Samples stay within [-1, 1]; 16-bit PCM on disk.
struct AudioClip {
  int sample_rate = 16000;
  std::vector<float> samples;

  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }

  friend bool operator==(const AudioClip&, const AudioClip&) = default;
};

namespace detail {

inline void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

inline void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
  out.push_back(static_cast<char>((v >> 16) & 0xFF));
  out.push_back(static_cast<char>((v >> 24) & 0xFF));
}

inline std::uint16_t get_u16(std::string_view b, size_t off) {
  return static_cast<std::uint16_t>(static_cast<unsigned char>(b[off]) |
                                    (static_cast<unsigned char>(b[off + 1])
                                     << 8));
}

inline std::uint32_t get_u32(std::string_view b, size_t off) {
  return static_cast<std::uint32_t>(static_cast<unsigned char>(b[off])) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 1]))
          << 8) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 2]))
          << 16) |
         (static_cast<std::uint32_t>(static_cast<unsigned char>(b[off + 3]))
          << 24);
}

}  // namespace detail

/// Encodes a clip as RIFF/WAVE, PCM 16-bit mono little-endian.
inline std::string encode_wav(const AudioClip& clip) {
  if (clip.sample_rate <= 0) throw ArgumentError("sample_rate must be > 0");
  const std::uint32_t n = static_cast<std::uint32_t>(clip.samples.size());
  const std::uint32_t data_bytes = n * 2;
  std::string out;
  out.reserve(44 + data_bytes);
  out += "RIFF";
  detail::put_u32(out, 36 + data_bytes);
  out += "WAVE";
  out += "fmt ";
  detail::put_u32(out, 16);
  detail::put_u16(out, 1);  // PCM
  detail::put_u16(out, 1);  // mono
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate));
  detail::put_u32(out, static_cast<std::uint32_t>(clip.sample_rate) * 2);
  detail::put_u16(out, 2);   // block align
  detail::put_u16(out, 16);  // bits per sample
  out += "data";
  detail::put_u32(out, data_bytes);
  for (float s : clip.samples) {
    float c = std::clamp(s, -1.0f, 1.0f);
    auto q = static_cast<std::int16_t>(std::lround(c * 32767.0f));
    detail::put_u16(out, static_cast<std::uint16_t>(q));
  }
  return out;
}

/// Decodes RIFF/WAVE bytes. Accepts PCM format 1, 16-bit, mono only;
/// anything else is an error rather than a silent downmix.
inline AudioClip decode_wav(std::string_view bytes) {
  if (bytes.size() < 12 || bytes.substr(0, 4) != "RIFF" ||
      bytes.substr(8, 4) != "WAVE")
    throw ParseError("malformed WAV header: missing RIFF/WAVE magic");

  bool have_fmt = false;
  std::uint16_t format = 0;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  size_t data_off = 0;
  std::uint32_t data_len = 0;
  bool have_data = false;

  size_t pos = 12;
  while (pos + 8 <= bytes.size()) {
    std::string_view id = bytes.substr(pos, 4);
    std::uint32_t size = detail::get_u32(bytes, pos + 4);
    size_t body = pos + 8;
    if (body + size > bytes.size())
      throw ParseError("malformed WAV: truncated chunk \"" + std::string(id) +
                       "\"");
    if (id == "fmt ") {
      if (size < 16) throw ParseError("malformed WAV: fmt chunk too small");
      format = detail::get_u16(bytes, body);
      channels = detail::get_u16(bytes, body + 2);
      rate = detail::get_u32(bytes, body + 4);
      bits = detail::get_u16(bytes, body + 14);
      have_fmt = true;
    } else if (id == "data") {
      data_off = body;
      data_len = size;
      have_data = true;
    }
    pos = body + size + (size % 2);  // chunks are word-aligned
  }

  if (!have_fmt) throw ParseError("malformed WAV: no fmt chunk");
  if (!have_data) throw ParseError("malformed WAV: no data chunk");
  if (format != 1)
    throw ParseError("unsupported WAV codec: format " + std::to_string(format));
  if (bits != 16)
    throw ParseError("unsupported WAV: " + std::to_string(bits) +
                     "-bit samples (16-bit required)");
  if (channels != 1)
    throw ParseError("unsupported WAV: " + std::to_string(channels) +
                     " channels (mono required)");
  if (rate == 0) throw ParseError("malformed WAV: zero sample rate");

  AudioClip clip;
  clip.sample_rate = static_cast<int>(rate);
  clip.samples.resize(data_len / 2);
  for (size_t i = 0; i < clip.samples.size(); ++i) {
    auto q = static_cast<std::int16_t>(detail::get_u16(bytes, data_off + 2 * i));
    clip.samples[i] = std::max(-1.0f, static_cast<float>(q) / 32767.0f);
  }
  return clip;
}

inline AudioClip read_wav(const std::filesystem::path& path) {
  try {
    return decode_wav(read_text_file(path));
  } catch (ParseError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
  write_text_file(path, encode_wav(clip));
}

/// Resamples by linear interpolation without changing the declared rate, so
/// both tempo and pitch shift by `factor`. Output length is round(n / factor);
/// factor 1.0 returns the input samples bit for bit.
inline AudioClip speed_perturb(const AudioClip& clip, double factor) {
  if (!(factor >= 0.5 && factor <= 2.0))
    throw ArgumentError("speed factor must be in [0.5, 2.0], got " +
                        std::to_string(factor));
  AudioClip out;
  out.sample_rate = clip.sample_rate;
  const size_t n = clip.samples.size();
  if (n == 0) return out;
  const auto out_len = static_cast<size_t>(
      std::llround(static_cast<double>(n) / factor));
  out.samples.resize(out_len);
  for (size_t j = 0; j < out_len; ++j) {
    double s = static_cast<double>(j) * factor;
    size_t k = std::min(static_cast<size_t>(s), n - 1);
    size_t k1 = std::min(k + 1, n - 1);
    double frac = s - static_cast<double>(k);
    out.samples[j] = static_cast<float>(
        clip.samples[k] + frac * (clip.samples[k1] - clip.samples[k]));
  }
  return out;
}

/// Joins clips in order and keeps at most floor(max_seconds * rate) samples
/// from the head.
inline AudioClip concat_truncate(const std::vector<AudioClip>& clips,
                                 double max_seconds = 30.0) {
  if (clips.empty()) throw ArgumentError("concat_truncate: empty clip list");
  if (max_seconds <= 0) throw ArgumentError("max_seconds must be > 0");
  const int rate = clips.front().sample_rate;
  size_t total = 0;
  for (const AudioClip& c : clips) {
    if (c.sample_rate != rate)
      throw ArgumentError("concat_truncate: mixed sample rates " +
                          std::to_string(rate) + " vs " +
                          std::to_string(c.sample_rate));
    total += c.samples.size();
  }
  const auto cap = static_cast<size_t>(
      std::floor(max_seconds * static_cast<double>(rate)));
  AudioClip out;
  out.sample_rate = rate;
  out.samples.reserve(std::min(total, cap));
  for (const AudioClip& c : clips) {
    for (float s : c.samples) {
      if (out.samples.size() >= cap) return out;
      out.samples.push_back(s);
    }
  }
  return out;
}

inline double rms(const AudioClip& clip) {
  if (clip.samples.empty()) return 0.0;
  double acc = 0.0;
  for (float s : clip.samples) acc += static_cast<double>(s) * s;
  return std::sqrt(acc / static_cast<double>(clip.samples.size()));
}

}  // namespace slukit
