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

#include "common.hpp"

#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <sstream>
#include <thread>

#include <unistd.h>

namespace refspeech {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingColumn: return "MissingColumn";
    case ErrorCode::kDuplicateSampleId: return "DuplicateSampleId";
    case ErrorCode::kMalformedNumber: return "MalformedNumber";
    case ErrorCode::kTooFewSpeakers: return "TooFewSpeakers";
    case ErrorCode::kExcludedLowEnergy: return "ExcludedLowEnergy";
    case ErrorCode::kExcludedNoStableSegment: return "ExcludedNoStableSegment";
    case ErrorCode::kNoVoicingDetected: return "NoVoicingDetected";
    case ErrorCode::kNoStableSegment: return "NoStableSegment";
    case ErrorCode::kTooFewPeriods: return "TooFewPeriods";
    case ErrorCode::kNoFormantsFound: return "NoFormantsFound";
    case ErrorCode::kNoSpeechDetected: return "NoSpeechDetected";
    case ErrorCode::kHonoreUndefined: return "HonoreUndefined";
    case ErrorCode::kEmptyTranscript: return "EmptyTranscript";
    case ErrorCode::kMissingPosTags: return "MissingPosTags";
    case ErrorCode::kSingularCovariance: return "SingularCovariance";
    case ErrorCode::kInsufficientSamples: return "InsufficientSamples";
    case ErrorCode::kTooFewValues: return "TooFewValues";
    case ErrorCode::kConstantFeature: return "ConstantFeature";
    case ErrorCode::kMissingFeature: return "MissingFeature";
    case ErrorCode::kZeroWidthInterval: return "ZeroWidthInterval";
    case ErrorCode::kUnknownStratum: return "UnknownStratum";
    case ErrorCode::kEmptyStratum: return "EmptyStratum";
    case ErrorCode::kZeroSigma: return "ZeroSigma";
    case ErrorCode::kIndeterminateScore: return "IndeterminateScore";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kNonBinaryLabels: return "NonBinaryLabels";
    case ErrorCode::kDivergedLoss: return "DivergedLoss";
    case ErrorCode::kEmptySearchSpace: return "EmptySearchSpace";
    case ErrorCode::kFoldPlanMismatch: return "FoldPlanMismatch";
    case ErrorCode::kInsufficientPartition: return "InsufficientPartition";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kBadArgument: return "BadArgument";
  }
  return "UnknownError";
}

void throw_validation(ErrorCode code, const std::string& message) {
  throw Error(ErrorCategory::kValidation, code, message);
}

void throw_data(ErrorCode code, const std::string& message) {
  throw Error(ErrorCategory::kData, code, message);
}

void throw_numeric(ErrorCode code, const std::string& message) {
  throw Error(ErrorCategory::kNumeric, code, message);
}

namespace {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::derive(std::uint64_t seed, const std::string& label) {
  std::uint64_t state = seed ^ (0x6a09e667f3bcc908ULL + fnv1a64(label));
  return splitmix64(state);
}

std::uint64_t Rng::derive(std::uint64_t seed, const std::string& label,
                          std::uint64_t index) {
  std::uint64_t state = derive(seed, label) ^ (index * 0x2545f4914f6cdd1dULL + 1);
  return splitmix64(state);
}

std::uint64_t Rng::next() { return splitmix64(state_); }

double Rng::uniform() {
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) return 0;
  // Rejection sampling to avoid modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t value = next();
  while (value >= limit) value = next();
  return value % n;
}

double Rng::normal() {
  double u1 = uniform();
  while (u1 <= 0.0) u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

double Rng::normal(double mean, double stddev) {
  return mean + stddev * normal();
}

std::string format_double(double value) {
  char buffer[64];
  const auto result =
      std::to_chars(buffer, buffer + sizeof(buffer), value);
  return std::string(buffer, result.ptr);
}

double parse_double_strict(const std::string& text, bool* ok) {
  *ok = false;
  if (text.empty()) return 0.0;
  const char* begin = text.data();
  const char* end = text.data() + text.size();
  double value = 0.0;
  const auto result = std::from_chars(begin, end, value);
  if (result.ec != std::errc() || result.ptr != end) return 0.0;
  if (!std::isfinite(value)) return 0.0;
  *ok = true;
  return value;
}

std::uint64_t fnv1a64(const void* data, std::size_t size) {
  const auto* bytes = static_cast<const unsigned char*>(data);
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (std::size_t i = 0; i < size; ++i) {
    hash ^= bytes[i];
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::uint64_t fnv1a64(const std::string& text) {
  return fnv1a64(text.data(), text.size());
}

void parallel_for(std::size_t n, int worker_count,
                  const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  const int workers = resolve_worker_count(worker_count);
  if (workers <= 1 || n == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> cursor{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = cursor.fetch_add(1);
      if (i >= n) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  const int spawn = static_cast<int>(
      std::min<std::size_t>(static_cast<std::size_t>(workers), n));
  pool.reserve(spawn);
  for (int w = 0; w < spawn; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

int resolve_worker_count(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("REFSPEECH_THREADS")) {
    const int parsed = std::atoi(env);
    if (parsed > 0) return parsed;
  }
  if (requested == 0) {
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : static_cast<int>(hw);
  }
  return 1;
}

void write_file_atomic(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp =
      path + ".tmp-" + std::to_string(static_cast<unsigned>(::getpid()));
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw_data(ErrorCode::kIoError, "cannot open for writing: " + tmp);
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) {
      throw_data(ErrorCode::kIoError, "short write: " + tmp);
    }
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw_data(ErrorCode::kIoError, "rename failed for " + path);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_data(ErrorCode::kIoError, "cannot open: " + path);
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

}  // namespace refspeech
