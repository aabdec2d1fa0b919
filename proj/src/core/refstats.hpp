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
#include <map>
#include <set>
#include <string>
#include <vector>

#include "corpus.hpp"

namespace refspeech::refstats {

// Percentile with linear interpolation between closest order statistics:
// rank = q/100 * (n-1), value interpolated between floor/ceil order stats.
double percentile(std::vector<double> values, double q);
double mean(const std::vector<double>& values);
// Sample standard deviation (n-1 denominator).
double stddev(const std::vector<double>& values);
double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b);

// [2.5th, 97.5th] percentile range of a feature in the reference population,
// with bootstrap confidence bands on both limits.
struct ReferenceInterval {
  std::string feature;
  double lower = 0.0;
  double upper = 0.0;
  double ci_lower_lo = 0.0, ci_lower_hi = 0.0;
  double ci_upper_lo = 0.0, ci_upper_hi = 0.0;
  std::size_t n = 0;
  bool low_n_warning = false;  // n below the direct-approach minimum of 120
};

struct RiOptions {
  std::size_t bootstrap_resamples = 1000;
  double ci_coverage = 0.90;  // CI = [5th, 95th] pct of the bootstrap dist
  std::uint64_t seed = 0;
  int threads = 1;
};

ReferenceInterval estimate_ri(const std::vector<double>& values,
                              const RiOptions& options);

struct MannWhitneyResult {
  double u = 0.0;  // min(U_a, U_b)
  double p_two_sided = 1.0;
};

// Normal approximation with midrank tie correction and continuity correction.
MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b);

struct OutlierReport {
  std::map<std::string, double> distances;  // sample_id -> Mahalanobis dist
  double cutoff = 0.0;                      // mean(d) + 3*std(d)
  std::set<std::string> excluded;
  std::vector<std::string> features_used;
};

// Distances of each row to the column-mean vector under the sample covariance.
// A ridge of 1e-8 * trace/d is added when the covariance is not invertible.
std::vector<double> mahalanobis_distances(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& center,
    const std::vector<std::vector<double>>& covariance);

OutlierReport mahalanobis_outliers(const corpus::FeatureTable& table,
                                   const std::vector<std::string>& features);

// Hierarchical agglomeration of features under distance 1-|r| with average
// linkage; the dendrogram is cut at height 1-CT. CT=1 short-circuits to
// singletons. Zero-variance features are isolated into their own clusters.
struct ClusterModel {
  double correlation_threshold = 1.0;
  std::vector<std::vector<std::string>> clusters;
  std::vector<std::string> prototypes;  // empty until select_prototypes
  std::vector<std::string> constant_features;  // isolated with a warning
};

ClusterModel cluster_features(const corpus::FeatureTable& table, double ct);

// Per cluster, the member whose standard deviation is most similar between
// the reference table and the control table; ties break lexicographically.
ClusterModel select_prototypes(ClusterModel clusters,
                               const corpus::FeatureTable& reference,
                               const corpus::FeatureTable& controls);

struct RiDistanceRow {
  std::string sample_id;
  corpus::Label label = corpus::Label::kUnlabeled;
  int n_outside = 0;
  double mean_distance = 0.0;
};

struct RiDistanceReport {
  std::vector<RiDistanceRow> rows;
  // Control-vs-patient comparisons, present when both groups are non-trivial.
  bool has_group_comparison = false;
  MannWhitneyResult n_outside_test;
  MannWhitneyResult distance_test;
};

// Distance of a value to an interval, as a fraction of the interval length;
// zero inside. Zero-width intervals fall back to the raw offset from the bound.
double distance_to_interval(double x, double lower, double upper);

RiDistanceReport ri_distance_report(
    const corpus::FeatureTable& table,
    const std::map<std::string, ReferenceInterval>& intervals);

}  // namespace refspeech::refstats
