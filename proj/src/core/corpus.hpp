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
#include <optional>
#include <string>
#include <vector>

#include "common.hpp"

namespace refspeech::corpus {

enum class Task { kSustainedVowel, kPictureDescription };
enum class Gender { kFemale, kMale };
enum class Label { kControl, kPatient, kUnlabeled };

const char* to_string(Task task);
const char* to_string(Gender gender);
const char* to_string(Label label);
Task task_from_string(const std::string& text);
Gender gender_from_string(const std::string& text);
Label label_from_string(const std::string& text);

// One audio sample (or transcript) with its metadata and extracted features.
// A feature absent from the map was not extracted; NaN/inf are never stored.
struct SampleRecord {
  std::string sample_id;
  std::string speaker_id;
  std::string dataset_id;
  Task task = Task::kSustainedVowel;
  Gender gender = Gender::kFemale;
  std::optional<int> age;
  Label label = Label::kUnlabeled;
  bool excluded = false;
  std::map<std::string, double> features;
};

// Column-ordered table of samples; the interchange object between all stages.
// Immutable after construction.
class FeatureTable {
 public:
  FeatureTable() = default;
  FeatureTable(std::vector<std::string> schema, std::vector<SampleRecord> rows);

  const std::vector<std::string>& schema() const { return schema_; }
  const std::vector<SampleRecord>& rows() const { return rows_; }
  std::size_t size() const { return rows_.size(); }
  bool has_feature(const std::string& name) const;

  // Values of one feature over rows where it is present, in row order.
  std::vector<double> column(const std::string& name) const;

  FeatureTable filter(const std::function<bool(const SampleRecord&)>& keep) const;

  // Rows carrying every feature in `names`, as a dense row-major matrix.
  // Returns the original row indices alongside.
  void dense_block(const std::vector<std::string>& names,
                   std::vector<std::vector<double>>* matrix,
                   std::vector<std::size_t>* row_indices) const;

 private:
  void validate() const;

  std::vector<std::string> schema_;
  std::vector<SampleRecord> rows_;
};

enum class TableFormat { kCsv, kJsonLines };

FeatureTable load_feature_table(const std::string& path, TableFormat format);
void save_feature_table(const FeatureTable& table, const std::string& path,
                        TableFormat format);
FeatureTable parse_feature_table_csv(const std::string& text,
                                     const std::string& origin);
std::string feature_table_to_csv(const FeatureTable& table);
FeatureTable parse_feature_table_jsonl(const std::string& text,
                                       const std::string& origin);
std::string feature_table_to_jsonl(const FeatureTable& table);

enum class FoldMode { kCvWithDevFold, kCvForTuningPlusHeldoutTest };

const char* to_string(FoldMode mode);
FoldMode fold_mode_from_string(const std::string& text);

// Speaker-disjoint cross-validation assignment. All samples of one speaker
// share one fold; folds balance (label, gender) strata greedily.
struct FoldPlan {
  int n_folds = 0;
  std::map<std::string, int> assignment;  // speaker_id -> fold index
  FoldMode mode = FoldMode::kCvWithDevFold;
  std::uint64_t seed = 0;

  int fold_of(const std::string& speaker_id) const;
  std::string to_json() const;
  static FoldPlan from_json(const std::string& text);
};

FoldPlan make_folds(const FeatureTable& table, int n_folds, std::uint64_t seed,
                    FoldMode mode = FoldMode::kCvWithDevFold);

}  // namespace refspeech::corpus
