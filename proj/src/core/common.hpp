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

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace refspeech {

// Error taxonomy. Categories map 1:1 onto CLI exit codes and C API status
// codes: Validation=2, Data=3, Numeric=4.
enum class ErrorCategory { kValidation = 2, kData = 3, kNumeric = 4 };

enum class ErrorCode {
  kMissingColumn,
  kDuplicateSampleId,
  kMalformedNumber,
  kTooFewSpeakers,
  kExcludedLowEnergy,
  kExcludedNoStableSegment,
  kNoVoicingDetected,
  kNoStableSegment,
  kTooFewPeriods,
  kNoFormantsFound,
  kNoSpeechDetected,
  kHonoreUndefined,
  kEmptyTranscript,
  kMissingPosTags,
  kSingularCovariance,
  kInsufficientSamples,
  kTooFewValues,
  kConstantFeature,
  kMissingFeature,
  kZeroWidthInterval,
  kUnknownStratum,
  kEmptyStratum,
  kZeroSigma,
  kIndeterminateScore,
  kDimensionMismatch,
  kNonBinaryLabels,
  kDivergedLoss,
  kEmptySearchSpace,
  kFoldPlanMismatch,
  kInsufficientPartition,
  kIoError,
  kBadArgument,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, ErrorCode code, std::string message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        category_(category),
        code_(code) {}

  ErrorCategory category() const { return category_; }
  ErrorCode code() const { return code_; }

 private:
  ErrorCategory category_;
  ErrorCode code_;
};

[[noreturn]] void throw_validation(ErrorCode code, const std::string& message);
[[noreturn]] void throw_data(ErrorCode code, const std::string& message);
[[noreturn]] void throw_numeric(ErrorCode code, const std::string& message);

// Deterministic RNG with named substream derivation. All randomness in the
// project flows from one root seed; components derive their own stream via
// derive(seed, label), so adding a consumer never perturbs another's draws.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) { next(); next(); }

  static std::uint64_t derive(std::uint64_t seed, const std::string& label);
  static std::uint64_t derive(std::uint64_t seed, const std::string& label,
                              std::uint64_t index);

  std::uint64_t next();

  // Uniform in [0, 1).
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller (no cached spare; call cost is two draws).
  double normal();
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& items) {
    if (items.empty()) return;
    for (std::size_t i = items.size() - 1; i > 0; --i) {
      std::swap(items[i], items[below(i + 1)]);
    }
  }

 private:
  std::uint64_t state_;
};

// Shortest round-trip decimal formatting (std::to_chars). Every number the
// project writes to CSV/JSON goes through this so reruns are byte-identical.
std::string format_double(double value);

// Strict locale-independent parse; rejects NaN/inf/overflow and trailing garbage.
double parse_double_strict(const std::string& text, bool* ok);

std::uint64_t fnv1a64(const void* data, std::size_t size);
std::uint64_t fnv1a64(const std::string& text);

// Runs fn(i) for i in [0, n). worker_count <= 1 runs inline. Results must not
// depend on scheduling: callers derive per-index RNG streams.
void parallel_for(std::size_t n, int worker_count,
                  const std::function<void(std::size_t)>& fn);

// Resolves the effective worker count: explicit > env REFSPEECH_THREADS > hw.
int resolve_worker_count(int requested);

// Writes content to path atomically (temp file in the same directory + rename).
void write_file_atomic(const std::string& path, const std::string& content);

std::string read_file(const std::string& path);

}  // namespace refspeech
