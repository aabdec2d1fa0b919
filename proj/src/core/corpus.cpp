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

#include "corpus.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace refspeech::corpus {

namespace {

// Metadata columns, fixed order. Everything after them is a feature column.
constexpr std::array<const char*, 7> kMetaColumns = {
    "sample_id", "speaker_id", "dataset_id", "task",
    "gender",    "age",        "label"};
constexpr const char* kExcludedColumn = "excluded";

// Feature groups used to enforce the per-task admissible subset. Vowel-task
// rows carry only voice-quality and vocal-tract features; names outside the
// known groups are task-agnostic.
const std::set<std::string>& rhythm_or_content_features() {
  static const std::set<std::string> names = {
      // rhythm
      "speech_rate", "articulation_rate", "avg_syllable_duration",
      "mean_pause_duration", "mean_speech_duration", "silence_rate",
      "silence_to_speech_ratio", "mean_silence_count",
      // content
      "ttr", "brunet_index", "honore_statistic", "content_density",
      "idea_density", "discourse_marker_rate", "polarity", "repetition_ratio",
      "first_person_ratio"};
  return names;
}

// Deviation-score tables suffix names with ".dsri" etc; group by the stem.
std::string feature_stem(const std::string& name) {
  const auto dot = name.rfind('.');
  return dot == std::string::npos ? name : name.substr(0, dot);
}

}  // namespace

const char* to_string(Task task) {
  return task == Task::kSustainedVowel ? "sustained_vowel"
                                       : "picture_description";
}

const char* to_string(Gender gender) {
  return gender == Gender::kFemale ? "F" : "M";
}

const char* to_string(Label label) {
  switch (label) {
    case Label::kControl: return "control";
    case Label::kPatient: return "patient";
    case Label::kUnlabeled: return "unlabeled";
  }
  return "unlabeled";
}

Task task_from_string(const std::string& text) {
  if (text == "sustained_vowel") return Task::kSustainedVowel;
  if (text == "picture_description") return Task::kPictureDescription;
  throw_validation(ErrorCode::kBadArgument, "unknown task '" + text + "'");
}

Gender gender_from_string(const std::string& text) {
  if (text == "F") return Gender::kFemale;
  if (text == "M") return Gender::kMale;
  throw_validation(ErrorCode::kBadArgument, "unknown gender '" + text + "'");
}

Label label_from_string(const std::string& text) {
  if (text == "control") return Label::kControl;
  if (text == "patient") return Label::kPatient;
  if (text == "unlabeled" || text.empty()) return Label::kUnlabeled;
  throw_validation(ErrorCode::kBadArgument, "unknown label '" + text + "'");
}

FeatureTable::FeatureTable(std::vector<std::string> schema,
                           std::vector<SampleRecord> rows)
    : schema_(std::move(schema)), rows_(std::move(rows)) {
  validate();
}

void FeatureTable::validate() const {
  std::unordered_set<std::string> schema_set;
  for (const auto& name : schema_) {
    if (!schema_set.insert(name).second) {
      throw_validation(ErrorCode::kBadArgument,
                       "duplicate feature in schema: " + name);
    }
  }
  std::unordered_set<std::string> ids;
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    const auto& row = rows_[i];
    if (!ids.insert(row.sample_id).second) {
      throw_validation(ErrorCode::kDuplicateSampleId,
                       "sample_id '" + row.sample_id + "' appears twice");
    }
    for (const auto& [name, value] : row.features) {
      if (!schema_set.count(name)) {
        throw_validation(ErrorCode::kBadArgument,
                         "row '" + row.sample_id + "' carries feature '" +
                             name + "' not in schema");
      }
      if (!std::isfinite(value)) {
        throw_validation(ErrorCode::kMalformedNumber,
                         "row '" + row.sample_id + "', feature '" + name +
                             "': non-finite value");
      }
      if (row.task == Task::kSustainedVowel &&
          rhythm_or_content_features().count(feature_stem(name))) {
        throw_validation(ErrorCode::kBadArgument,
                         "vowel-task row '" + row.sample_id +
                             "' carries non-vowel feature '" + name + "'");
      }
    }
  }
}

bool FeatureTable::has_feature(const std::string& name) const {
  return std::find(schema_.begin(), schema_.end(), name) != schema_.end();
}

std::vector<double> FeatureTable::column(const std::string& name) const {
  std::vector<double> values;
  values.reserve(rows_.size());
  for (const auto& row : rows_) {
    const auto it = row.features.find(name);
    if (it != row.features.end()) values.push_back(it->second);
  }
  return values;
}

FeatureTable FeatureTable::filter(
    const std::function<bool(const SampleRecord&)>& keep) const {
  std::vector<SampleRecord> kept;
  for (const auto& row : rows_) {
    if (keep(row)) kept.push_back(row);
  }
  return FeatureTable(schema_, std::move(kept));
}

void FeatureTable::dense_block(const std::vector<std::string>& names,
                               std::vector<std::vector<double>>* matrix,
                               std::vector<std::size_t>* row_indices) const {
  matrix->clear();
  row_indices->clear();
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    std::vector<double> values;
    values.reserve(names.size());
    bool complete = true;
    for (const auto& name : names) {
      const auto it = rows_[i].features.find(name);
      if (it == rows_[i].features.end()) {
        complete = false;
        break;
      }
      values.push_back(it->second);
    }
    if (complete) {
      matrix->push_back(std::move(values));
      row_indices->push_back(i);
    }
  }
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line,
                                        std::size_t line_no) {
  std::vector<std::string> fields;
  std::string field;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
    } else if (c == '"' && field.empty()) {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(field));
      field.clear();
    } else {
      field += c;
    }
  }
  if (quoted) {
    throw_data(ErrorCode::kBadArgument,
               "line " + std::to_string(line_no) + ": unterminated quote");
  }
  fields.push_back(std::move(field));
  return fields;
}

std::string csv_escape(const std::string& field) {
  if (field.find_first_of(",\"\n") == std::string::npos) return field;
  std::string out = "\"";
  for (const char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

bool parse_bool_field(const std::string& text) {
  if (text == "true" || text == "1") return true;
  if (text == "false" || text == "0" || text.empty()) return false;
  throw_validation(ErrorCode::kBadArgument,
                   "bad boolean value '" + text + "'");
}

SampleRecord record_from_fields(
    const std::unordered_map<std::string, std::size_t>& index,
    const std::vector<std::string>& feature_names, int excluded_col,
    const std::vector<std::string>& fields, std::size_t row_no) {
  auto field = [&](const char* name) -> const std::string& {
    return fields[index.at(name)];
  };
  SampleRecord record;
  record.sample_id = field("sample_id");
  record.speaker_id = field("speaker_id");
  record.dataset_id = field("dataset_id");
  record.task = task_from_string(field("task"));
  record.gender = gender_from_string(field("gender"));
  record.label = label_from_string(field("label"));
  const std::string& age_text = field("age");
  if (!age_text.empty()) {
    bool ok = false;
    const double age = parse_double_strict(age_text, &ok);
    if (!ok || age != std::floor(age) || age < 0) {
      throw_validation(ErrorCode::kMalformedNumber,
                       "row " + std::to_string(row_no) +
                           ", column 'age': value '" + age_text + "'");
    }
    record.age = static_cast<int>(age);
  }
  if (excluded_col >= 0) {
    record.excluded = parse_bool_field(fields[excluded_col]);
  }
  for (const auto& name : feature_names) {
    const std::string& cell = fields[index.at(name.c_str())];
    if (cell.empty()) continue;
    bool ok = false;
    const double value = parse_double_strict(cell, &ok);
    if (!ok) {
      throw_validation(ErrorCode::kMalformedNumber,
                       "row " + std::to_string(row_no) + ", column '" + name +
                           "': value '" + cell + "'");
    }
    record.features[name] = value;
  }
  return record;
}

}  // namespace

FeatureTable parse_feature_table_csv(const std::string& text,
                                     const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) {
    throw_data(ErrorCode::kBadArgument, origin + ": empty file");
  }
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const std::vector<std::string> header = split_csv_line(line, 1);
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (!index.emplace(header[i], i).second) {
      throw_validation(ErrorCode::kBadArgument,
                       origin + ": duplicate column '" + header[i] + "'");
    }
  }
  for (const char* meta : kMetaColumns) {
    if (!index.count(meta)) {
      throw_validation(ErrorCode::kMissingColumn, std::string(meta));
    }
  }
  int excluded_col = -1;
  std::vector<std::string> feature_names;
  for (const auto& name : header) {
    if (std::find(kMetaColumns.begin(), kMetaColumns.end(), name) !=
        kMetaColumns.end()) {
      continue;
    }
    if (name == kExcludedColumn) {
      excluded_col = static_cast<int>(index.at(name));
      continue;
    }
    feature_names.push_back(name);
  }

  std::vector<SampleRecord> rows;
  std::size_t line_no = 1;
  std::size_t row_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    ++row_no;
    const auto fields = split_csv_line(line, line_no);
    if (fields.size() != header.size()) {
      throw_validation(ErrorCode::kBadArgument,
                       origin + ": row " + std::to_string(row_no) + " has " +
                           std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(header.size()));
    }
    rows.push_back(
        record_from_fields(index, feature_names, excluded_col, fields, row_no));
  }
  return FeatureTable(std::move(feature_names), std::move(rows));
}

std::string feature_table_to_csv(const FeatureTable& table) {
  std::ostringstream out;
  for (std::size_t i = 0; i < kMetaColumns.size(); ++i) {
    if (i) out << ',';
    out << kMetaColumns[i];
  }
  out << ',' << kExcludedColumn;
  for (const auto& name : table.schema()) out << ',' << csv_escape(name);
  out << '\n';
  for (const auto& row : table.rows()) {
    out << csv_escape(row.sample_id) << ',' << csv_escape(row.speaker_id) << ','
        << csv_escape(row.dataset_id) << ',' << to_string(row.task) << ','
        << to_string(row.gender) << ',';
    if (row.age) out << *row.age;
    out << ',' << to_string(row.label) << ','
        << (row.excluded ? "true" : "false");
    for (const auto& name : table.schema()) {
      out << ',';
      const auto it = row.features.find(name);
      if (it != row.features.end()) out << format_double(it->second);
    }
    out << '\n';
  }
  return out.str();
}

FeatureTable parse_feature_table_jsonl(const std::string& text,
                                       const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::vector<SampleRecord> rows;
  std::vector<std::string> schema;
  std::unordered_set<std::string> seen;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw_data(ErrorCode::kBadArgument,
                 origin + " line " + std::to_string(line_no) + ": " + e.what());
    }
    for (const char* meta : kMetaColumns) {
      if (meta == std::string("age")) continue;
      if (!obj.contains(meta)) {
        throw_validation(ErrorCode::kMissingColumn,
                         std::string(meta) + " (line " +
                             std::to_string(line_no) + ")");
      }
    }
    SampleRecord record;
    record.sample_id = obj.at("sample_id").get<std::string>();
    record.speaker_id = obj.at("speaker_id").get<std::string>();
    record.dataset_id = obj.at("dataset_id").get<std::string>();
    record.task = task_from_string(obj.at("task").get<std::string>());
    record.gender = gender_from_string(obj.at("gender").get<std::string>());
    record.label = label_from_string(obj.at("label").get<std::string>());
    if (obj.contains("age") && !obj.at("age").is_null()) {
      record.age = obj.at("age").get<int>();
    }
    if (obj.contains("excluded")) {
      record.excluded = obj.at("excluded").get<bool>();
    }
    if (obj.contains("features")) {
      for (const auto& [name, value] : obj.at("features").items()) {
        if (!value.is_number()) {
          throw_validation(ErrorCode::kMalformedNumber,
                           "row " + std::to_string(line_no) + ", feature '" +
                               name + "': not a finite number");
        }
        const double v = value.get<double>();
        if (!std::isfinite(v)) {
          throw_validation(ErrorCode::kMalformedNumber,
                           "row " + std::to_string(line_no) + ", feature '" +
                               name + "': non-finite");
        }
        record.features[name] = v;
        if (seen.insert(name).second) schema.push_back(name);
      }
    }
    rows.push_back(std::move(record));
  }
  std::sort(schema.begin(), schema.end());
  return FeatureTable(std::move(schema), std::move(rows));
}

std::string feature_table_to_jsonl(const FeatureTable& table) {
  std::ostringstream out;
  for (const auto& row : table.rows()) {
    nlohmann::json obj;
    obj["sample_id"] = row.sample_id;
    obj["speaker_id"] = row.speaker_id;
    obj["dataset_id"] = row.dataset_id;
    obj["task"] = to_string(row.task);
    obj["gender"] = to_string(row.gender);
    if (row.age) {
      obj["age"] = *row.age;
    } else {
      obj["age"] = nullptr;
    }
    obj["label"] = to_string(row.label);
    obj["excluded"] = row.excluded;
    nlohmann::json features = nlohmann::json::object();
    for (const auto& name : table.schema()) {
      const auto it = row.features.find(name);
      if (it != row.features.end()) features[name] = it->second;
    }
    obj["features"] = std::move(features);
    out << obj.dump() << '\n';
  }
  return out.str();
}

FeatureTable load_feature_table(const std::string& path, TableFormat format) {
  const std::string text = read_file(path);
  return format == TableFormat::kCsv ? parse_feature_table_csv(text, path)
                                     : parse_feature_table_jsonl(text, path);
}

void save_feature_table(const FeatureTable& table, const std::string& path,
                        TableFormat format) {
  write_file_atomic(path, format == TableFormat::kCsv
                              ? feature_table_to_csv(table)
                              : feature_table_to_jsonl(table));
}

const char* to_string(FoldMode mode) {
  return mode == FoldMode::kCvWithDevFold ? "cv_with_dev_fold"
                                          : "cv_for_tuning_plus_heldout_test";
}

FoldMode fold_mode_from_string(const std::string& text) {
  if (text == "cv_with_dev_fold") return FoldMode::kCvWithDevFold;
  if (text == "cv_for_tuning_plus_heldout_test") {
    return FoldMode::kCvForTuningPlusHeldoutTest;
  }
  throw_validation(ErrorCode::kBadArgument, "unknown fold mode '" + text + "'");
}

int FoldPlan::fold_of(const std::string& speaker_id) const {
  const auto it = assignment.find(speaker_id);
  if (it == assignment.end()) {
    throw_validation(ErrorCode::kFoldPlanMismatch,
                     "speaker '" + speaker_id + "' not in fold plan");
  }
  return it->second;
}

std::string FoldPlan::to_json() const {
  nlohmann::json obj;
  obj["n_folds"] = n_folds;
  obj["assignment"] = assignment;
  obj["mode"] = to_string(mode);
  obj["seed"] = seed;
  return obj.dump(2) + "\n";
}

FoldPlan FoldPlan::from_json(const std::string& text) {
  const auto obj = nlohmann::json::parse(text);
  FoldPlan plan;
  plan.n_folds = obj.at("n_folds").get<int>();
  plan.assignment =
      obj.at("assignment").get<std::map<std::string, int>>();
  plan.mode = fold_mode_from_string(obj.at("mode").get<std::string>());
  plan.seed = obj.at("seed").get<std::uint64_t>();
  return plan;
}

namespace {

struct SpeakerInfo {
  std::string id;
  Label label = Label::kUnlabeled;
  Gender gender = Gender::kFemale;
  std::optional<int> age;
  std::uint64_t tiebreak = 0;
};

}  // namespace

FoldPlan make_folds(const FeatureTable& table, int n_folds, std::uint64_t seed,
                    FoldMode mode) {
  if (n_folds < 2) {
    throw_validation(ErrorCode::kBadArgument, "n_folds must be >= 2");
  }
  std::map<std::string, SpeakerInfo> speakers;
  for (const auto& row : table.rows()) {
    auto [it, inserted] = speakers.try_emplace(row.speaker_id);
    SpeakerInfo& info = it->second;
    if (inserted) {
      info.id = row.speaker_id;
      info.label = row.label;
      info.gender = row.gender;
      info.age = row.age;
    } else {
      if (info.label != row.label || info.gender != row.gender) {
        throw_validation(ErrorCode::kBadArgument,
                         "speaker '" + row.speaker_id +
                             "' has inconsistent label/gender across samples");
      }
      if (!info.age) info.age = row.age;
    }
  }

  int n_control = 0;
  int n_patient = 0;
  for (auto& [id, info] : speakers) {
    info.tiebreak = Rng::derive(seed, "folds:" + id);
    if (info.label == Label::kControl) ++n_control;
    if (info.label == Label::kPatient) ++n_patient;
  }
  if (n_control < n_folds || n_patient < n_folds) {
    throw_validation(ErrorCode::kTooFewSpeakers,
                     "need >= " + std::to_string(n_folds) +
                         " speakers per class, have " +
                         std::to_string(n_control) + " control / " +
                         std::to_string(n_patient) + " patient");
  }

  // Strata processed in fixed order; speakers within each stratum sorted by
  // age (descending, missing last) so sequential assignment spreads ages.
  const std::array<std::pair<Label, Gender>, 6> strata = {{
      {Label::kControl, Gender::kFemale},
      {Label::kControl, Gender::kMale},
      {Label::kPatient, Gender::kFemale},
      {Label::kPatient, Gender::kMale},
      {Label::kUnlabeled, Gender::kFemale},
      {Label::kUnlabeled, Gender::kMale},
  }};

  std::vector<int> total_count(n_folds, 0);
  std::map<Label, std::vector<int>> label_count;
  for (const Label l : {Label::kControl, Label::kPatient, Label::kUnlabeled}) {
    label_count[l] = std::vector<int>(n_folds, 0);
  }

  FoldPlan plan;
  plan.n_folds = n_folds;
  plan.mode = mode;
  plan.seed = seed;

  for (const auto& [label, gender] : strata) {
    std::vector<const SpeakerInfo*> members;
    for (const auto& [id, info] : speakers) {
      if (info.label == label && info.gender == gender) {
        members.push_back(&info);
      }
    }
    std::sort(members.begin(), members.end(),
              [](const SpeakerInfo* a, const SpeakerInfo* b) {
                const bool a_has = a->age.has_value();
                const bool b_has = b->age.has_value();
                if (a_has != b_has) return a_has;
                if (a_has && *a->age != *b->age) return *a->age > *b->age;
                if (a->tiebreak != b->tiebreak) return a->tiebreak < b->tiebreak;
                return a->id < b->id;
              });
    std::vector<int> stratum_count(n_folds, 0);
    for (const SpeakerInfo* speaker : members) {
      int best = 0;
      auto key = [&](int fold) {
        return std::tuple(stratum_count[fold], label_count[label][fold],
                          total_count[fold], fold);
      };
      for (int fold = 1; fold < n_folds; ++fold) {
        if (key(fold) < key(best)) best = fold;
      }
      plan.assignment[speaker->id] = best;
      ++stratum_count[best];
      ++label_count[label][best];
      ++total_count[best];
    }
  }
  return plan;
}

}  // namespace refspeech::corpus
