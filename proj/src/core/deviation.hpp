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
#include <optional>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace refspeech::deviation {

enum class NormMethod { kZscore, kMinMax, kNone };

const char* to_string(NormMethod method);
NormMethod norm_method_from_string(const std::string& text);

// Per-stratum scaling statistics, fitted on control-labeled training samples
// only. Strata are (gender, dataset_id) pairs.
struct NormalizerStats {
  struct FeatureStats {
    double offset = 0.0;  // mean (zscore) or min (minmax)
    double scale = 1.0;   // std (zscore) or max-min (minmax)
    bool degenerate = false;  // zero spread: values pass through unchanged
  };
  NormMethod method = NormMethod::kZscore;
  // key: gender|dataset_id
  std::map<std::string, std::map<std::string, FeatureStats>> strata;
  std::vector<std::string> degenerate_features;  // collected for warnings

  static std::string stratum_key(corpus::Gender gender,
                                 const std::string& dataset_id);
};

NormalizerStats fit_normalizer(const corpus::FeatureTable& train,
                               NormMethod method);
corpus::FeatureTable apply_normalizer(const NormalizerStats& stats,
                                      const corpus::FeatureTable& table);

// Scalar deviation scores of a value against reference statistics.
double ds_mstd(double x, double mu, double sigma);
double ds_mstd_nocap(double x, double mu, double sigma);
double ds_q123(double x, double q1, double q3);
double ds_ri(double x, double ri_lb, double ri_ub);
double ds_mahalanobis(const std::vector<double>& x,
                      const std::vector<double>& median,
                      const std::vector<std::vector<double>>& covariance);

enum class Score { kMstd, kMstdNoCap, kQ123, kRi, kMahalanobis, kRaw };

const char* to_string(Score score);
Score score_from_string(const std::string& text);
// Feature-name suffix appended by the tabular transform, e.g. ".dsri".
const char* score_suffix(Score score);

// Reference-population statistics consumed by the deviation transforms.
// All values live in the same (normalized) space as incoming samples.
struct ReferenceSummary {
  struct FeatureSummary {
    double mu = 0.0;
    double sigma = 0.0;
    double q1 = 0.0, q2 = 0.0, q3 = 0.0;
    double ri_lb = 0.0, ri_ub = 0.0;
  };
  std::map<std::string, FeatureSummary> features;
  // Multivariate pieces for the Mahalanobis score.
  std::vector<std::string> covariance_features;
  std::vector<double> median;
  std::vector<std::vector<double>> covariance;
};

ReferenceSummary summarize_reference(const corpus::FeatureTable& reference,
                                     const std::vector<std::string>& features);

struct DeviationResult {
  corpus::FeatureTable table;
  // Features dropped because the score was indeterminate for them
  // (e.g. identical first and third quartiles under the quartile score).
  std::vector<std::string> dropped_features;
};

// Maps a feature table into deviation space. kRaw passes values through
// unchanged. Per-feature scores rename columns with the score suffix; the
// multivariate score yields a single "joint<suffix>" column per sample.
DeviationResult deviation_transform(const corpus::FeatureTable& table,
                                    const ReferenceSummary& summary,
                                    Score score);

}  // namespace refspeech::deviation
