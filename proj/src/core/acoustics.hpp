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

#include <map>
#include <string>
#include <vector>

#include "audio.hpp"

namespace refspeech::acoustics {

// Sustained-vowel screening: recordings with too little energy are dropped,
// recordings with abrupt gain changes keep only the longest stable stretch
// before the last change, and long segments are split into 3 s chunks with a
// 2 s stride.
struct SegmentationOptions {
  double min_max_rms = 0.005;       // exclusion threshold on the frame track
  double abrupt_change_frac = 0.15; // of whole-signal RMS, between frames
  double min_segment_s = 0.5;
  double split_above_s = 4.0;
  double chunk_s = 3.0;
  double chunk_stride_s = 2.0;
};

enum class SegmentDecision { kKeptWhole, kSegmented, kExcluded };
enum class SegmentReason {
  kNone,
  kLowEnergy,        // max frame RMS below threshold
  kNoStableSegment,  // nothing long enough between abrupt changes
};

struct SegmentationReport {
  SegmentDecision decision = SegmentDecision::kKeptWhole;
  SegmentReason reason = SegmentReason::kNone;
  std::vector<std::pair<double, double>> chunks;  // [start, end) seconds
  std::vector<double> change_points;              // abrupt RMS changes, seconds
};

SegmentationReport segment_vowel(const audio::AudioBuffer& buffer,
                                 const SegmentationOptions& options = {});

// Glottal pulse marks with derived periods and per-period peak amplitudes.
// A voice break is flagged where a period exceeds max_phonation_period.
struct PeriodTrack {
  std::vector<double> pulse_times;  // strictly increasing, seconds
  std::vector<double> periods;      // pulse_times.size()-1 entries
  std::vector<double> amplitudes;   // peak |x| per period
  std::vector<bool> voice_break;    // per period
  double max_phonation_period = 0.02;
  audio::AudioBuffer audio;  // retained for spectral measures (HNR)

  std::size_t period_count() const { return periods.size(); }
  // Sub-track over period indices [first, last).
  PeriodTrack slice(std::size_t first, std::size_t last) const;
};

struct PitchOptions {
  double f0_floor = 60.0;
  double f0_ceil = 600.0;
  double voicing_threshold = 0.45;  // on the normalized autocorrelation peak
  double max_phonation_period = 0.02;
  double frame_s = 0.040;
  double hop_s = 0.010;
};

PeriodTrack extract_period_track(const audio::AudioBuffer& buffer,
                                 const PitchOptions& options = {});

struct IndexRange {
  std::size_t first = 0;
  std::size_t last = 0;  // exclusive, over period indices
  std::size_t size() const { return last - first; }
};

// Longest run of consecutive periods without voice breaks; the run must reach
// min_periods or the sample is excluded.
IndexRange find_stable_segment(const PeriodTrack& track,
                               std::size_t min_periods = 110);

struct VoiceQualityOptions {
  std::size_t min_periods = 110;
  double hnr_cap_db = 40.0;
};

// F0 statistics, jitter and shimmer families, and HNR. local_jitter and
// local_shimmer are percentages; rap/ppq5 jitter and the apq shimmer variants
// are plain ratios; local_absolute_jitter is in seconds; local_db_shimmer and
// hnr are in dB.
std::map<std::string, double> voice_quality_features(
    const PeriodTrack& track, const VoiceQualityOptions& options = {});

// Perturbation measures on bare period/amplitude sequences. Used by the
// feature extractor above; exposed for direct checks on constructed inputs.
std::map<std::string, double> perturbation_measures(
    const std::vector<double>& periods, const std::vector<double>& amplitudes);

struct FormantOptions {
  double analysis_rate = 10000.0;  // analysis band resampled to this rate
  double preemphasis_from_hz = 50.0;
  int lpc_order = 12;              // 2 + analysis_rate/1000
  double max_bandwidth_hz = 400.0;
  double frame_s = 0.025;
  double hop_s = 0.010;
  int max_formants = 4;
};

// Mean and median of F1..F4 from frame-wise linear-prediction root finding.
std::map<std::string, double> formant_features(
    const audio::AudioBuffer& buffer, const FormantOptions& options = {});

struct RhythmOptions {
  double silence_threshold_db = -25.0;  // relative to 99th percentile intensity
  double min_dip_db = 2.0;              // syllable nucleus prominence
  double min_segment_s = 0.1;
  double frame_s = 0.040;
  double hop_s = 0.010;
};

// Syllable-nucleus and pause statistics over connected speech. Totals are
// taken over the span from the first to the last speech segment, so leading
// and trailing silences never count.
std::map<std::string, double> rhythm_features(
    const audio::AudioBuffer& buffer, const RhythmOptions& options = {});

// Feature-name sets per group, used for per-task admissibility and for the
// outlier scan's acoustic-only subset.
const std::vector<std::string>& voice_quality_feature_names();
const std::vector<std::string>& vocal_tract_feature_names();
const std::vector<std::string>& rhythm_feature_names();

}  // namespace refspeech::acoustics
