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

#include "refstats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Dense>

namespace refspeech::refstats {

namespace {

double percentile_sorted(const std::vector<double>& sorted, double q) {
  const std::size_t n = sorted.size();
  if (n == 1) return sorted[0];
  const double rank = q / 100.0 * static_cast<double>(n - 1);
  const auto lo = static_cast<std::size_t>(std::floor(rank));
  const auto hi = std::min(lo + 1, n - 1);
  const double frac = rank - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double normal_sf(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

double percentile(std::vector<double> values, double q) {
  if (values.empty()) {
    throw_numeric(ErrorCode::kTooFewValues, "percentile of empty array");
  }
  std::sort(values.begin(), values.end());
  return percentile_sorted(values, q);
}

double mean(const std::vector<double>& values) {
  if (values.empty()) {
    throw_numeric(ErrorCode::kTooFewValues, "mean of empty array");
  }
  return std::accumulate(values.begin(), values.end(), 0.0) /
         static_cast<double>(values.size());
}

double stddev(const std::vector<double>& values) {
  if (values.size() < 2) return 0.0;
  const double m = mean(values);
  double ss = 0.0;
  for (const double v : values) ss += (v - m) * (v - m);
  return std::sqrt(ss / static_cast<double>(values.size() - 1));
}

double pearson_correlation(const std::vector<double>& a,
                           const std::vector<double>& b) {
  if (a.size() != b.size() || a.size() < 2) {
    throw_numeric(ErrorCode::kTooFewValues, "correlation needs paired arrays");
  }
  const double ma = mean(a);
  const double mb = mean(b);
  double num = 0.0, da = 0.0, db = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    num += (a[i] - ma) * (b[i] - mb);
    da += (a[i] - ma) * (a[i] - ma);
    db += (b[i] - mb) * (b[i] - mb);
  }
  if (da == 0.0 || db == 0.0) {
    throw_numeric(ErrorCode::kConstantFeature,
                  "correlation undefined for zero-variance input");
  }
  return num / std::sqrt(da * db);
}

ReferenceInterval estimate_ri(const std::vector<double>& values,
                              const RiOptions& options) {
  if (values.size() < 20) {
    throw_numeric(ErrorCode::kTooFewValues,
                  "reference interval needs >= 20 values, have " +
                      std::to_string(values.size()));
  }
  ReferenceInterval ri;
  ri.n = values.size();
  ri.low_n_warning = values.size() < 120;

  std::vector<double> sorted(values);
  std::sort(sorted.begin(), sorted.end());
  ri.lower = percentile_sorted(sorted, 2.5);
  ri.upper = percentile_sorted(sorted, 97.5);

  const std::size_t b_count = options.bootstrap_resamples;
  std::vector<double> boot_lower(b_count), boot_upper(b_count);
  const std::size_t n = values.size();
  // One derived RNG stream per resample: results do not depend on worker count.
  parallel_for(b_count, options.threads, [&](std::size_t b) {
    Rng rng(Rng::derive(options.seed, "ri-bootstrap", b));
    std::vector<double> resample(n);
    for (std::size_t i = 0; i < n; ++i) {
      resample[i] = values[rng.below(n)];
    }
    std::sort(resample.begin(), resample.end());
    boot_lower[b] = percentile_sorted(resample, 2.5);
    boot_upper[b] = percentile_sorted(resample, 97.5);
  });

  const double tail = (1.0 - options.ci_coverage) / 2.0 * 100.0;
  std::sort(boot_lower.begin(), boot_lower.end());
  std::sort(boot_upper.begin(), boot_upper.end());
  ri.ci_lower_lo = percentile_sorted(boot_lower, tail);
  ri.ci_lower_hi = percentile_sorted(boot_lower, 100.0 - tail);
  ri.ci_upper_lo = percentile_sorted(boot_upper, tail);
  ri.ci_upper_hi = percentile_sorted(boot_upper, 100.0 - tail);
  return ri;
}

MannWhitneyResult mann_whitney_u(const std::vector<double>& a,
                                 const std::vector<double>& b) {
  if (a.size() < 3 || b.size() < 3) {
    throw_numeric(ErrorCode::kTooFewValues,
                  "Mann-Whitney needs >= 3 values per group");
  }
  const std::size_t na = a.size();
  const std::size_t nb = b.size();
  const std::size_t n = na + nb;

  std::vector<std::pair<double, bool>> pooled;  // (value, is_a)
  pooled.reserve(n);
  for (const double v : a) pooled.emplace_back(v, true);
  for (const double v : b) pooled.emplace_back(v, false);
  std::sort(pooled.begin(), pooled.end(),
            [](const auto& x, const auto& y) { return x.first < y.first; });

  // Midranks plus the tie correction term sum(t^3 - t).
  double rank_sum_a = 0.0;
  double tie_term = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && pooled[j + 1].first == pooled[i].first) ++j;
    const double midrank = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    const double t = static_cast<double>(j - i + 1);
    if (t > 1.0) tie_term += t * t * t - t;
    for (std::size_t k = i; k <= j; ++k) {
      if (pooled[k].second) rank_sum_a += midrank;
    }
    i = j + 1;
  }

  const double u_a =
      rank_sum_a - static_cast<double>(na) * (static_cast<double>(na) + 1.0) / 2.0;
  const double u_b = static_cast<double>(na) * static_cast<double>(nb) - u_a;

  MannWhitneyResult result;
  result.u = std::min(u_a, u_b);

  const double mean_u = static_cast<double>(na) * static_cast<double>(nb) / 2.0;
  const double nn = static_cast<double>(n);
  const double variance = static_cast<double>(na) * static_cast<double>(nb) /
                          12.0 *
                          ((nn + 1.0) - tie_term / (nn * (nn - 1.0)));
  if (variance <= 0.0) {
    result.p_two_sided = 1.0;  // every observation tied
    return result;
  }
  const double numerator = std::max(0.0, std::abs(u_a - mean_u) - 0.5);
  const double z = numerator / std::sqrt(variance);
  result.p_two_sided = std::min(1.0, 2.0 * normal_sf(z));
  return result;
}

namespace {

Eigen::MatrixXd to_matrix(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const auto d = static_cast<Eigen::Index>(rows.empty() ? 0 : rows[0].size());
  Eigen::MatrixXd m(n, d);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      m(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
  }
  return m;
}

Eigen::MatrixXd invert_covariance(Eigen::MatrixXd cov) {
  const auto d = cov.rows();
  Eigen::FullPivLU<Eigen::MatrixXd> lu(cov);
  if (!lu.isInvertible()) {
    const double ridge = 1e-8 * cov.trace() / static_cast<double>(d);
    cov += ridge * Eigen::MatrixXd::Identity(d, d);
    lu.compute(cov);
    if (!lu.isInvertible()) {
      throw_numeric(ErrorCode::kSingularCovariance,
                    "covariance singular even after ridge");
    }
  }
  return lu.inverse();
}

}  // namespace

std::vector<double> mahalanobis_distances(
    const std::vector<std::vector<double>>& rows,
    const std::vector<double>& center,
    const std::vector<std::vector<double>>& covariance) {
  const std::size_t d = center.size();
  for (const auto& row : rows) {
    if (row.size() != d) {
      throw_validation(ErrorCode::kDimensionMismatch,
                       "row dimension does not match center");
    }
  }
  const Eigen::MatrixXd inv = invert_covariance(to_matrix(covariance));
  Eigen::VectorXd mu(static_cast<Eigen::Index>(d));
  for (std::size_t j = 0; j < d; ++j) mu(static_cast<Eigen::Index>(j)) = center[j];

  std::vector<double> distances;
  distances.reserve(rows.size());
  for (const auto& row : rows) {
    Eigen::VectorXd x(static_cast<Eigen::Index>(d));
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Eigen::Index>(j)) = row[j];
    const Eigen::VectorXd delta = x - mu;
    distances.push_back(std::sqrt(delta.dot(inv * delta)));
  }
  return distances;
}

OutlierReport mahalanobis_outliers(const corpus::FeatureTable& table,
                                   const std::vector<std::string>& features) {
  for (std::size_t i = 1; i < table.rows().size(); ++i) {
    if (table.rows()[i].task != table.rows()[0].task) {
      throw_validation(ErrorCode::kBadArgument,
                       "outlier scan runs on one task at a time");
    }
  }
  std::vector<std::vector<double>> block;
  std::vector<std::size_t> row_indices;
  table.dense_block(features, &block, &row_indices);
  const std::size_t d = features.size();
  if (block.size() < d + 2) {
    throw_numeric(ErrorCode::kInsufficientSamples,
                  "need >= " + std::to_string(d + 2) + " complete samples for " +
                      std::to_string(d) + " features, have " +
                      std::to_string(block.size()));
  }

  const Eigen::MatrixXd x = to_matrix(block);
  const Eigen::RowVectorXd mu = x.colwise().mean();
  const Eigen::MatrixXd centered = x.rowwise() - mu;
  const Eigen::MatrixXd cov =
      centered.transpose() * centered / static_cast<double>(x.rows() - 1);

  std::vector<double> center(d);
  std::vector<std::vector<double>> cov_rows(d, std::vector<double>(d));
  for (std::size_t i = 0; i < d; ++i) {
    center[i] = mu(static_cast<Eigen::Index>(i));
    for (std::size_t j = 0; j < d; ++j) {
      cov_rows[i][j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
    }
  }
  const std::vector<double> distances =
      mahalanobis_distances(block, center, cov_rows);

  OutlierReport report;
  report.features_used = features;
  report.cutoff = mean(distances) + 3.0 * stddev(distances);
  for (std::size_t k = 0; k < distances.size(); ++k) {
    const std::string& id = table.rows()[row_indices[k]].sample_id;
    report.distances[id] = distances[k];
    if (distances[k] > report.cutoff) report.excluded.insert(id);
  }
  return report;
}

namespace {

struct Dendrogram {
  // Cluster indices: 0..m-1 are singleton leaves; merge k creates cluster m+k.
  struct Merge {
    std::size_t left, right;
    double height;
  };
  std::size_t n_leaves = 0;
  std::vector<Merge> merges;
};

// Average-linkage agglomeration over a precomputed distance matrix.
Dendrogram agglomerate(const std::vector<std::vector<double>>& dist) {
  const std::size_t m = dist.size();
  Dendrogram tree;
  tree.n_leaves = m;

  struct Active {
    std::size_t id;
    std::vector<std::size_t> leaves;
  };
  std::vector<Active> active;
  for (std::size_t i = 0; i < m; ++i) active.push_back({i, {i}});

  auto linkage = [&](const Active& a, const Active& b) {
    double sum = 0.0;
    for (const std::size_t i : a.leaves) {
      for (const std::size_t j : b.leaves) sum += dist[i][j];
    }
    return sum / static_cast<double>(a.leaves.size() * b.leaves.size());
  };

  double last_height = 0.0;
  std::size_t next_id = m;
  while (active.size() > 1) {
    std::size_t best_a = 0, best_b = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < active.size(); ++a) {
      for (std::size_t b = a + 1; b < active.size(); ++b) {
        const double d = linkage(active[a], active[b]);
        if (d < best) {
          best = d;
          best_a = a;
          best_b = b;
        }
      }
    }
    last_height = std::max(last_height, best);
    tree.merges.push_back({active[best_a].id, active[best_b].id, last_height});
    Active merged;
    merged.id = next_id++;
    merged.leaves = active[best_a].leaves;
    merged.leaves.insert(merged.leaves.end(), active[best_b].leaves.begin(),
                         active[best_b].leaves.end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_b));
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(best_a));
    active.push_back(std::move(merged));
  }
  return tree;
}

std::vector<std::vector<std::size_t>> cut_dendrogram(const Dendrogram& tree,
                                                     double height) {
  // Union-find over leaves, applying merges with height <= cut.
  std::vector<std::size_t> parent(tree.n_leaves + tree.merges.size());
  std::iota(parent.begin(), parent.end(), 0);
  std::function<std::size_t(std::size_t)> find = [&](std::size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };
  std::vector<std::size_t> cluster_root(parent.size());
  std::iota(cluster_root.begin(), cluster_root.end(), 0);
  for (std::size_t k = 0; k < tree.merges.size(); ++k) {
    const auto& merge = tree.merges[k];
    const std::size_t merged_id = tree.n_leaves + k;
    if (merge.height <= height) {
      parent[find(cluster_root[merge.left])] = find(cluster_root[merge.right]);
    }
    cluster_root[merged_id] = cluster_root[merge.right];
  }
  std::map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t leaf = 0; leaf < tree.n_leaves; ++leaf) {
    groups[find(leaf)].push_back(leaf);
  }
  std::vector<std::vector<std::size_t>> clusters;
  clusters.reserve(groups.size());
  for (auto& [root, members] : groups) clusters.push_back(std::move(members));
  return clusters;
}

}  // namespace

ClusterModel cluster_features(const corpus::FeatureTable& table, double ct) {
  if (table.schema().size() < 2) {
    throw_validation(ErrorCode::kBadArgument, "clustering needs >= 2 features");
  }
  if (table.size() < 10) {
    throw_numeric(ErrorCode::kInsufficientSamples,
                  "clustering needs >= 10 samples");
  }
  ClusterModel model;
  model.correlation_threshold = ct;

  // Constant features cannot enter the correlation matrix; isolate them.
  std::vector<std::string> variable;
  for (const auto& name : table.schema()) {
    const auto values = table.column(name);
    if (values.size() >= 2 && stddev(values) > 0.0) {
      variable.push_back(name);
    } else {
      model.constant_features.push_back(name);
      model.clusters.push_back({name});
    }
  }

  if (ct >= 1.0) {
    for (const auto& name : variable) model.clusters.push_back({name});
  } else if (variable.size() == 1) {
    model.clusters.push_back({variable[0]});
  } else if (!variable.empty()) {
    const std::size_t m = variable.size();
    // Pairwise-complete correlations; pairs with < 3 shared rows get r = 0.
    std::vector<std::vector<double>> dist(m, std::vector<double>(m, 0.0));
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = i + 1; j < m; ++j) {
        std::vector<double> a, b;
        for (const auto& row : table.rows()) {
          const auto ia = row.features.find(variable[i]);
          const auto ib = row.features.find(variable[j]);
          if (ia != row.features.end() && ib != row.features.end()) {
            a.push_back(ia->second);
            b.push_back(ib->second);
          }
        }
        double r = 0.0;
        if (a.size() >= 3 && stddev(a) > 0.0 && stddev(b) > 0.0) {
          r = pearson_correlation(a, b);
        }
        dist[i][j] = dist[j][i] = 1.0 - std::abs(r);
      }
    }
    const Dendrogram tree = agglomerate(dist);
    for (const auto& cluster : cut_dendrogram(tree, 1.0 - ct)) {
      std::vector<std::string> names;
      names.reserve(cluster.size());
      for (const std::size_t leaf : cluster) names.push_back(variable[leaf]);
      std::sort(names.begin(), names.end());
      model.clusters.push_back(std::move(names));
    }
  }
  std::sort(model.clusters.begin(), model.clusters.end());
  return model;
}

ClusterModel select_prototypes(ClusterModel clusters,
                               const corpus::FeatureTable& reference,
                               const corpus::FeatureTable& controls) {
  auto sigma = [](const corpus::FeatureTable& table, const std::string& name) {
    if (!table.has_feature(name)) {
      throw_validation(ErrorCode::kMissingFeature,
                       "feature '" + name + "' absent from table");
    }
    const auto values = table.column(name);
    if (values.size() < 2) {
      throw_validation(ErrorCode::kMissingFeature,
                       "feature '" + name + "' has < 2 values");
    }
    return stddev(values);
  };
  clusters.prototypes.clear();
  for (const auto& cluster : clusters.clusters) {
    std::string best;
    double best_gap = std::numeric_limits<double>::infinity();
    for (const auto& name : cluster) {
      const double gap = std::abs(sigma(reference, name) - sigma(controls, name));
      if (gap < best_gap || (gap == best_gap && name < best)) {
        best_gap = gap;
        best = name;
      }
    }
    clusters.prototypes.push_back(best);
  }
  return clusters;
}

double distance_to_interval(double x, double lower, double upper) {
  const double width = upper - lower;
  if (width <= 0.0) {
    return x == lower ? 0.0 : std::abs(x - lower);
  }
  if (x > upper) return (x - upper) / width;
  if (x < lower) return (lower - x) / width;
  return 0.0;
}

RiDistanceReport ri_distance_report(
    const corpus::FeatureTable& table,
    const std::map<std::string, ReferenceInterval>& intervals) {
  RiDistanceReport report;
  std::vector<double> control_outside, patient_outside;
  std::vector<double> control_distance, patient_distance;
  for (const auto& row : table.rows()) {
    RiDistanceRow out;
    out.sample_id = row.sample_id;
    out.label = row.label;
    double total = 0.0;
    std::size_t considered = 0;
    for (const auto& [feature, ri] : intervals) {
      const auto it = row.features.find(feature);
      if (it == row.features.end()) continue;
      ++considered;
      const double d = distance_to_interval(it->second, ri.lower, ri.upper);
      total += d;
      if (d > 0.0) ++out.n_outside;
    }
    out.mean_distance = considered == 0 ? 0.0 : total / static_cast<double>(considered);
    if (row.label == corpus::Label::kControl) {
      control_outside.push_back(out.n_outside);
      control_distance.push_back(out.mean_distance);
    } else if (row.label == corpus::Label::kPatient) {
      patient_outside.push_back(out.n_outside);
      patient_distance.push_back(out.mean_distance);
    }
    report.rows.push_back(std::move(out));
  }
  if (control_outside.size() >= 3 && patient_outside.size() >= 3) {
    report.has_group_comparison = true;
    report.n_outside_test = mann_whitney_u(control_outside, patient_outside);
    report.distance_test = mann_whitney_u(control_distance, patient_distance);
  }
  return report;
}

}  // namespace refspeech::refstats
