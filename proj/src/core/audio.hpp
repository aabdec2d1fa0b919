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

#pragma once

#include <string>
#include <vector>

#include "common.hpp"

namespace refspeech::audio {

// Mono audio in [-1, 1]. Stereo inputs are downmixed at load time.
struct AudioBuffer {
  std::vector<double> samples;
  double sample_rate = 16000.0;

  double duration() const {
    return static_cast<double>(samples.size()) / sample_rate;
  }
  AudioBuffer slice(double start_s, double end_s) const;
};

// Reads PCM 16-bit or IEEE float32 WAV; stereo is averaged to mono.
AudioBuffer read_wav(const std::string& path);
// Writes PCM 16-bit mono.
void write_wav(const AudioBuffer& buffer, const std::string& path);

// Windowed-sinc resampling to an arbitrary target rate.
AudioBuffer resample(const AudioBuffer& input, double target_rate);

// Frame-wise RMS track. Frames of `frame_s` seconds every `hop_s` seconds;
// only frames fully inside the buffer are emitted.
struct FrameTrack {
  std::vector<double> values;
  double frame_s = 0.040;
  double hop_s = 0.010;

  double frame_start(std::size_t index) const {
    return static_cast<double>(index) * hop_s;
  }
  double frame_center(std::size_t index) const {
    return frame_start(index) + frame_s / 2.0;
  }
};

FrameTrack rms_track(const AudioBuffer& buffer, double frame_s = 0.040,
                     double hop_s = 0.010);

double rms(const std::vector<double>& samples);

}  // namespace refspeech::audio
