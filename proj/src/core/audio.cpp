// Copyright 2026 The refspeech authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

namespace refspeech::audio {

AudioBuffer AudioBuffer::slice(double start_s, double end_s) const {
  const auto n = static_cast<std::ptrdiff_t>(samples.size());
  auto lo = static_cast<std::ptrdiff_t>(std::llround(start_s * sample_rate));
  auto hi = static_cast<std::ptrdiff_t>(std::llround(end_s * sample_rate));
  lo = std::clamp<std::ptrdiff_t>(lo, 0, n);
  hi = std::clamp<std::ptrdiff_t>(hi, lo, n);
  AudioBuffer out;
  out.sample_rate = sample_rate;
  out.samples.assign(samples.begin() + lo, samples.begin() + hi);
  return out;
}

namespace {

std::uint32_t read_u32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) |
         (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

std::uint16_t read_u16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

void append_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 24) & 0xff));
}

void append_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

AudioBuffer read_wav(const std::string& path) {
  const std::string raw = read_file(path);
  const auto* data = reinterpret_cast<const unsigned char*>(raw.data());
  const std::size_t size = raw.size();
  if (size < 12 || std::memcmp(data, "RIFF", 4) != 0 ||
      std::memcmp(data + 8, "WAVE", 4) != 0) {
    throw_data(ErrorCode::kBadArgument, path + ": not a RIFF/WAVE file");
  }

  std::uint16_t format_tag = 0;
  std::uint16_t channels = 0;
  std::uint32_t sample_rate = 0;
  std::uint16_t bits = 0;
  const unsigned char* payload = nullptr;
  std::size_t payload_size = 0;

  std::size_t offset = 12;
  while (offset + 8 <= size) {
    const std::uint32_t chunk_size = read_u32(data + offset + 4);
    const unsigned char* chunk = data + offset + 8;
    if (offset + 8 + chunk_size > size) break;
    if (std::memcmp(data + offset, "fmt ", 4) == 0 && chunk_size >= 16) {
      format_tag = read_u16(chunk);
      channels = read_u16(chunk + 2);
      sample_rate = read_u32(chunk + 4);
      bits = read_u16(chunk + 14);
      // WAVE_FORMAT_EXTENSIBLE carries the real tag in the sub-format GUID.
      if (format_tag == 0xfffe && chunk_size >= 26) {
        format_tag = read_u16(chunk + 24);
      }
    } else if (std::memcmp(data + offset, "data", 4) == 0) {
      payload = chunk;
      payload_size = chunk_size;
    }
    offset += 8 + chunk_size + (chunk_size & 1);
  }
  if (payload == nullptr || sample_rate == 0 || channels == 0) {
    throw_data(ErrorCode::kBadArgument, path + ": missing fmt/data chunk");
  }
  if (channels > 2) {
    throw_data(ErrorCode::kBadArgument, path + ": more than 2 channels");
  }

  AudioBuffer buffer;
  buffer.sample_rate = sample_rate;
  if (format_tag == 1 && bits == 16) {
    const std::size_t frames = payload_size / (2 * channels);
    buffer.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        const auto v = static_cast<std::int16_t>(
            read_u16(payload + 2 * (i * channels + c)));
        acc += static_cast<double>(v) / 32768.0;
      }
      buffer.samples[i] = acc / channels;
    }
  } else if (format_tag == 3 && bits == 32) {
    const std::size_t frames = payload_size / (4 * channels);
    buffer.samples.resize(frames);
    for (std::size_t i = 0; i < frames; ++i) {
      double acc = 0.0;
      for (std::uint16_t c = 0; c < channels; ++c) {
        float v;
        std::memcpy(&v, payload + 4 * (i * channels + c), 4);
        acc += static_cast<double>(v);
      }
      buffer.samples[i] = acc / channels;
    }
  } else {
    throw_data(ErrorCode::kBadArgument,
               path + ": unsupported format (tag " + std::to_string(format_tag) +
                   ", " + std::to_string(bits) + " bit)");
  }
  for (double& s : buffer.samples) {
    if (!std::isfinite(s)) s = 0.0;
    s = std::clamp(s, -1.0, 1.0);
  }
  return buffer;
}

void write_wav(const AudioBuffer& buffer, const std::string& path) {
  const auto n = static_cast<std::uint32_t>(buffer.samples.size());
  const std::uint32_t data_size = n * 2;
  std::string out;
  out.reserve(44 + data_size);
  out += "RIFF";
  append_u32(out, 36 + data_size);
  out += "WAVE";
  out += "fmt ";
  append_u32(out, 16);
  append_u16(out, 1);  // PCM
  append_u16(out, 1);  // mono
  const auto rate = static_cast<std::uint32_t>(std::llround(buffer.sample_rate));
  append_u32(out, rate);
  append_u32(out, rate * 2);
  append_u16(out, 2);
  append_u16(out, 16);
  out += "data";
  append_u32(out, data_size);
  for (const double s : buffer.samples) {
    const double clamped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(clamped * 32767.0));
    append_u16(out, static_cast<std::uint16_t>(v));
  }
  write_file_atomic(path, out);
}

AudioBuffer resample(const AudioBuffer& input, double target_rate) {
  if (target_rate <= 0.0) {
    throw_validation(ErrorCode::kBadArgument, "target rate must be positive");
  }
  if (input.sample_rate == target_rate) return input;

  const double ratio = input.sample_rate / target_rate;
  const double cutoff = 0.95 * std::min(1.0, 1.0 / ratio);  // of input Nyquist
  constexpr int kTaps = 24;

  AudioBuffer out;
  out.sample_rate = target_rate;
  const auto out_len = static_cast<std::size_t>(
      std::floor(static_cast<double>(input.samples.size()) / ratio));
  out.samples.resize(out_len);

  const auto n = static_cast<std::ptrdiff_t>(input.samples.size());
  for (std::size_t m = 0; m < out_len; ++m) {
    const double center = static_cast<double>(m) * ratio;
    const auto k0 = static_cast<std::ptrdiff_t>(std::floor(center)) - kTaps + 1;
    const auto k1 = static_cast<std::ptrdiff_t>(std::floor(center)) + kTaps;
    double acc = 0.0;
    for (std::ptrdiff_t k = std::max<std::ptrdiff_t>(k0, 0);
         k <= std::min(k1, n - 1); ++k) {
      const double x = center - static_cast<double>(k);
      double w;
      if (x == 0.0) {
        w = cutoff;
      } else {
        w = std::sin(M_PI * cutoff * x) / (M_PI * x);
      }
      // Hann window over the tap span.
      const double h = 0.5 + 0.5 * std::cos(M_PI * x / kTaps);
      acc += input.samples[static_cast<std::size_t>(k)] * w * h;
    }
    out.samples[m] = acc;
  }
  return out;
}

double rms(const std::vector<double>& samples) {
  if (samples.empty()) return 0.0;
  double ss = 0.0;
  for (const double s : samples) ss += s * s;
  return std::sqrt(ss / static_cast<double>(samples.size()));
}

FrameTrack rms_track(const AudioBuffer& buffer, double frame_s, double hop_s) {
  FrameTrack track;
  track.frame_s = frame_s;
  track.hop_s = hop_s;
  const auto frame_len =
      static_cast<std::size_t>(std::llround(frame_s * buffer.sample_rate));
  const auto hop_len =
      static_cast<std::size_t>(std::llround(hop_s * buffer.sample_rate));
  if (frame_len == 0 || hop_len == 0 || buffer.samples.size() < frame_len) {
    return track;
  }
  for (std::size_t start = 0; start + frame_len <= buffer.samples.size();
       start += hop_len) {
    double ss = 0.0;
    for (std::size_t i = start; i < start + frame_len; ++i) {
      ss += buffer.samples[i] * buffer.samples[i];
    }
    track.values.push_back(std::sqrt(ss / static_cast<double>(frame_len)));
  }
  return track;
}

}  // namespace refspeech::audio
