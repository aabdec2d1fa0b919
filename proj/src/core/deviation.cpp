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

#include "deviation.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "refstats.hpp"

namespace refspeech::deviation {

const char* to_string(NormMethod method) {
  switch (method) {
    case NormMethod::kZscore: return "zscore";
    case NormMethod::kMinMax: return "minmax";
    case NormMethod::kNone: return "none";
  }
  return "none";
}

NormMethod norm_method_from_string(const std::string& text) {
  if (text == "zscore") return NormMethod::kZscore;
  if (text == "minmax") return NormMethod::kMinMax;
  if (text == "none") return NormMethod::kNone;
  throw_validation(ErrorCode::kBadArgument,
                   "unknown normalization '" + text + "'");
}

std::string NormalizerStats::stratum_key(corpus::Gender gender,
                                         const std::string& dataset_id) {
  return std::string(corpus::to_string(gender)) + "|" + dataset_id;
}

NormalizerStats fit_normalizer(const corpus::FeatureTable& train,
                               NormMethod method) {
  NormalizerStats stats;
  stats.method = method;
  if (method == NormMethod::kNone) return stats;

  // Collect control values per stratum per feature.
  std::map<std::string, std::map<std::string, std::vector<double>>> values;
  std::set<std::string> strata_seen;
  for (const auto& row : train.rows()) {
    const std::string key =
        NormalizerStats::stratum_key(row.gender, row.dataset_id);
    strata_seen.insert(key);
    if (row.label != corpus::Label::kControl) continue;
    for (const auto& [name, value] : row.features) {
      values[key][name].push_back(value);
    }
  }
  for (const auto& key : strata_seen) {
    const auto it = values.find(key);
    const bool enough =
        it != values.end() &&
        std::any_of(it->second.begin(), it->second.end(),
                    [](const auto& kv) { return kv.second.size() >= 2; });
    if (!enough) {
      throw_validation(ErrorCode::kEmptyStratum,
                       "stratum '" + key +
                           "' has < 2 control training samples");
    }
  }

  for (const auto& [key, features] : values) {
    for (const auto& [name, vals] : features) {
      NormalizerStats::FeatureStats fs;
      if (method == NormMethod::kZscore) {
        fs.offset = refstats::mean(vals);
        fs.scale = refstats::stddev(vals);
      } else {
        const auto [lo, hi] = std::minmax_element(vals.begin(), vals.end());
        fs.offset = *lo;
        fs.scale = *hi - *lo;
      }
      if (fs.scale <= 0.0) {
        fs.degenerate = true;
        fs.offset = 0.0;
        fs.scale = 1.0;
        stats.degenerate_features.push_back(key + ":" + name);
      }
      stats.strata[key][name] = fs;
    }
  }
  return stats;
}

corpus::FeatureTable apply_normalizer(const NormalizerStats& stats,
                                      const corpus::FeatureTable& table) {
  if (stats.method == NormMethod::kNone) return table;
  std::vector<corpus::SampleRecord> rows;
  rows.reserve(table.size());
  for (const auto& row : table.rows()) {
    const std::string key =
        NormalizerStats::stratum_key(row.gender, row.dataset_id);
    const auto stratum = stats.strata.find(key);
    if (stratum == stats.strata.end()) {
      throw_validation(ErrorCode::kUnknownStratum,
                       "stratum '" + key + "' was not seen at fit time");
    }
    corpus::SampleRecord out = row;
    for (auto& [name, value] : out.features) {
      const auto fs = stratum->second.find(name);
      if (fs == stratum->second.end() || fs->second.degenerate) continue;
      value = (value - fs->second.offset) / fs->second.scale;
    }
    rows.push_back(std::move(out));
  }
  return corpus::FeatureTable(table.schema(), std::move(rows));
}

double ds_mstd(double x, double mu, double sigma) {
  if (sigma <= 0.0) {
    throw_numeric(ErrorCode::kZeroSigma,
                  "zero-variance reference feature in mstd score");
  }
  const double gap = std::abs(mu - x);
  return gap > sigma ? 1.0 - sigma / gap : 0.0;
}

double ds_mstd_nocap(double x, double mu, double sigma) {
  if (sigma <= 0.0) {
    throw_numeric(ErrorCode::kZeroSigma,
                  "zero-variance reference feature in mstd score");
  }
  return std::abs(mu - x) / sigma;
}

double ds_q123(double x, double q1, double q3) {
  const double width = q3 - q1;
  if (width <= 0.0) {
    throw_numeric(ErrorCode::kIndeterminateScore,
                  "identical first and third quartiles");
  }
  if (x > q3) return 2.0 * std::abs(q3 - x) / std::abs(width);
  if (x < q1) return -2.0 * std::abs(q1 - x) / std::abs(width);
  return 0.0;
}

double ds_ri(double x, double ri_lb, double ri_ub) {
  const double width = ri_ub - ri_lb;
  if (width <= 0.0) {
    throw_numeric(ErrorCode::kZeroWidthInterval,
                  "zero-width reference interval");
  }
  if (x > ri_ub) return 2.0 * std::abs(ri_ub - x) / width;
  if (x < ri_lb) return -2.0 * std::abs(ri_lb - x) / width;
  return 0.0;
}

double ds_mahalanobis(const std::vector<double>& x,
                      const std::vector<double>& median,
                      const std::vector<std::vector<double>>& covariance) {
  if (x.size() != median.size()) {
    throw_validation(ErrorCode::kDimensionMismatch,
                     "sample and median dimensions differ");
  }
  return refstats::mahalanobis_distances({x}, median, covariance)[0];
}

const char* to_string(Score score) {
  switch (score) {
    case Score::kMstd: return "mstd";
    case Score::kMstdNoCap: return "mstd_nocap";
    case Score::kQ123: return "q123";
    case Score::kRi: return "ri";
    case Score::kMahalanobis: return "mahalanobis";
    case Score::kRaw: return "raw";
  }
  return "raw";
}

Score score_from_string(const std::string& text) {
  if (text == "mstd") return Score::kMstd;
  if (text == "mstd_nocap") return Score::kMstdNoCap;
  if (text == "q123") return Score::kQ123;
  if (text == "ri") return Score::kRi;
  if (text == "mahalanobis") return Score::kMahalanobis;
  if (text == "raw") return Score::kRaw;
  throw_validation(ErrorCode::kBadArgument, "unknown score '" + text + "'");
}

const char* score_suffix(Score score) {
  switch (score) {
    case Score::kMstd: return ".dsmstd";
    case Score::kMstdNoCap: return ".dsmstdnc";
    case Score::kQ123: return ".dsq123";
    case Score::kRi: return ".dsri";
    case Score::kMahalanobis: return ".dsmaha";
    case Score::kRaw: return "";
  }
  return "";
}

ReferenceSummary summarize_reference(const corpus::FeatureTable& reference,
                                     const std::vector<std::string>& features) {
  ReferenceSummary summary;
  for (const auto& name : features) {
    const auto values = reference.column(name);
    if (values.size() < 2) {
      throw_validation(ErrorCode::kMissingFeature,
                       "feature '" + name + "' has < 2 reference values");
    }
    ReferenceSummary::FeatureSummary fs;
    fs.mu = refstats::mean(values);
    fs.sigma = refstats::stddev(values);
    std::vector<double> sorted(values);
    std::sort(sorted.begin(), sorted.end());
    fs.q1 = refstats::percentile(sorted, 25.0);
    fs.q2 = refstats::percentile(sorted, 50.0);
    fs.q3 = refstats::percentile(sorted, 75.0);
    fs.ri_lb = refstats::percentile(sorted, 2.5);
    fs.ri_ub = refstats::percentile(sorted, 97.5);
    summary.features[name] = fs;
  }

  // Multivariate pieces over rows carrying every feature.
  std::vector<std::vector<double>> block;
  std::vector<std::size_t> row_indices;
  reference.dense_block(features, &block, &row_indices);
  if (block.size() >= features.size() + 2) {
    summary.covariance_features = features;
    const std::size_t d = features.size();
    summary.median.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      std::vector<double> col(block.size());
      for (std::size_t i = 0; i < block.size(); ++i) col[i] = block[i][j];
      summary.median[j] = refstats::percentile(col, 50.0);
    }
    std::vector<double> col_mean(d, 0.0);
    for (const auto& row : block) {
      for (std::size_t j = 0; j < d; ++j) col_mean[j] += row[j];
    }
    for (std::size_t j = 0; j < d; ++j) {
      col_mean[j] /= static_cast<double>(block.size());
    }
    summary.covariance.assign(d, std::vector<double>(d, 0.0));
    for (const auto& row : block) {
      for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
          summary.covariance[i][j] +=
              (row[i] - col_mean[i]) * (row[j] - col_mean[j]);
        }
      }
    }
    const double denom = static_cast<double>(block.size() - 1);
    for (std::size_t i = 0; i < d; ++i) {
      for (std::size_t j = 0; j < d; ++j) summary.covariance[i][j] /= denom;
    }
  }
  return summary;
}

DeviationResult deviation_transform(const corpus::FeatureTable& table,
                                    const ReferenceSummary& summary,
                                    Score score) {
  DeviationResult result{table, {}};
  if (score == Score::kRaw) return result;

  if (score == Score::kMahalanobis) {
    if (summary.covariance_features.empty()) {
      throw_numeric(ErrorCode::kInsufficientSamples,
                    "reference summary lacks covariance for the multivariate score");
    }
    const std::string column = std::string("joint") + score_suffix(score);
    std::vector<corpus::SampleRecord> rows;
    rows.reserve(table.size());
    for (const auto& row : table.rows()) {
      corpus::SampleRecord out = row;
      out.features.clear();
      std::vector<double> x;
      x.reserve(summary.covariance_features.size());
      bool complete = true;
      for (const auto& name : summary.covariance_features) {
        const auto it = row.features.find(name);
        if (it == row.features.end()) {
          complete = false;
          break;
        }
        x.push_back(it->second);
      }
      if (complete) {
        out.features[column] =
            ds_mahalanobis(x, summary.median, summary.covariance);
      }
      rows.push_back(std::move(out));
    }
    result.table = corpus::FeatureTable({column}, std::move(rows));
    return result;
  }

  // Per-feature scores. Features whose score is indeterminate on the
  // reference statistics are dropped from the output with a warning.
  std::set<std::string> dropped;
  for (const auto& [name, fs] : summary.features) {
    switch (score) {
      case Score::kMstd:
      case Score::kMstdNoCap:
        if (fs.sigma <= 0.0) dropped.insert(name);
        break;
      case Score::kQ123:
        if (fs.q3 - fs.q1 <= 0.0) dropped.insert(name);
        break;
      case Score::kRi:
        if (fs.ri_ub - fs.ri_lb <= 0.0) dropped.insert(name);
        break;
      default:
        break;
    }
  }

  std::vector<std::string> schema;
  for (const auto& name : table.schema()) {
    if (!summary.features.count(name) || dropped.count(name)) continue;
    schema.push_back(name + score_suffix(score));
  }
  std::vector<corpus::SampleRecord> rows;
  rows.reserve(table.size());
  for (const auto& row : table.rows()) {
    corpus::SampleRecord out = row;
    out.features.clear();
    for (const auto& [name, value] : row.features) {
      const auto it = summary.features.find(name);
      if (it == summary.features.end() || dropped.count(name)) continue;
      const auto& fs = it->second;
      double scored = 0.0;
      switch (score) {
        case Score::kMstd: scored = ds_mstd(value, fs.mu, fs.sigma); break;
        case Score::kMstdNoCap:
          scored = ds_mstd_nocap(value, fs.mu, fs.sigma);
          break;
        case Score::kQ123: scored = ds_q123(value, fs.q1, fs.q3); break;
        case Score::kRi: scored = ds_ri(value, fs.ri_lb, fs.ri_ub); break;
        default: break;
      }
      out.features[name + score_suffix(score)] = scored;
    }
    rows.push_back(std::move(out));
  }
  result.table = corpus::FeatureTable(std::move(schema), std::move(rows));
  result.dropped_features.assign(dropped.begin(), dropped.end());
  return result;
}

}  // namespace refspeech::deviation
