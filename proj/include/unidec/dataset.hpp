/*
 * Copyright 2026 The UniDEC Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// Multi-label datasets with textual features on both sides, plus the hashing
// featurizer that turns text into sparse token-count vectors.

#ifndef UNIDEC_DATASET_HPP_
#define UNIDEC_DATASET_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "unidec/common.hpp"

namespace unidec {

struct SparseEntry {
  std::uint32_t index;
  double value;
  bool operator==(const SparseEntry&) const = default;
};

// Sorted by index, no duplicate indices, no zero values.
using SparseVector = std::vector<SparseEntry>;

// Lowercase + split on non-alphanumerics, then a stable 64-bit string hash
// (FNV-1a) reduced mod `dim`.
class Vocabulary {
 public:
  static constexpr std::size_t kDefaultDim = std::size_t{1} << 15;

  explicit Vocabulary(std::size_t dim = kDefaultDim);

  std::size_t dim() const noexcept { return dim_; }

  static std::vector<std::string> Tokenize(std::string_view text);
  static std::uint64_t Hash(std::string_view token);
  std::uint32_t TokenId(std::string_view token) const;

  // Token occurrence counts after hashing. Empty text gives an empty vector.
  SparseVector Featurize(std::string_view text) const;

 private:
  std::size_t dim_;
};

class Dataset {
 public:
  Dataset() = default;
  // Builds and validates; label frequencies are derived from `positives`.
  Dataset(std::vector<std::string> instance_texts, std::vector<std::string> label_texts,
          std::vector<LabelSet> positives, std::size_t num_labels);

  std::size_t num_instances() const noexcept { return positives_.size(); }
  std::size_t num_labels() const noexcept { return num_labels_; }

  const std::vector<std::string>& instance_texts() const noexcept { return instance_texts_; }
  const std::vector<std::string>& label_texts() const noexcept { return label_texts_; }
  const LabelSet& positives(std::size_t i) const { return positives_[i]; }
  const std::vector<LabelSet>& all_positives() const noexcept { return positives_; }
  const std::vector<std::uint32_t>& label_frequencies() const noexcept { return label_freq_; }

  bool IsPositive(std::size_t i, LabelId l) const;
  std::size_t total_positives() const;

  // Number of instances loaded with an empty relevance row.
  std::size_t warnings() const noexcept { return warnings_; }
  void set_warnings(std::size_t w) { warnings_ = w; }

  // Throws Error(kFormat) when any invariant is violated.
  void Validate() const;

 private:
  std::vector<std::string> instance_texts_;
  std::vector<std::string> label_texts_;
  std::vector<LabelSet> positives_;
  std::vector<std::uint32_t> label_freq_;
  std::size_t num_labels_ = 0;
  std::size_t warnings_ = 0;
};

enum class DatasetFormat { kXmcSparse, kJsonl };

DatasetFormat ParseDatasetFormat(std::string_view name);

struct DatasetPaths {
  // xmc-sparse: the relevance matrix ("N L" header, one row per instance).
  // jsonl: one {"text": ..., "labels": [...]} object per line.
  std::string queries;
  // One label text per line; the line count defines L for jsonl.
  std::string labels;
  // xmc-sparse only: one instance text per line. Optional; texts are empty
  // when omitted.
  std::string query_texts;
};

Dataset LoadDataset(const DatasetPaths& paths, DatasetFormat format);

// Stream-level parsers used by LoadDataset; `source` names the input in errors.
struct RelevanceMatrix {
  std::size_t num_labels = 0;
  std::vector<LabelSet> rows;
  std::size_t empty_rows = 0;
};
RelevanceMatrix ParseXmcSparse(std::istream& in, const std::string& source);
std::vector<std::string> ParseLabelTexts(std::istream& in, const std::string& source);

// Writes the relevance matrix in xmc-sparse form ("N L" header).
void WriteXmcSparse(const Dataset& dataset, std::ostream& out);
void WriteTextLines(const std::vector<std::string>& lines, std::ostream& out);

struct SynthOptions {
  std::size_t num_instances = 512;
  std::size_t num_labels = 128;
  std::uint64_t seed = 0;
  std::size_t min_positives = 1;
  std::size_t max_positives = 3;
  std::size_t noise_tokens = 2;
  // When false, instance texts are pure noise and carry no label signal.
  bool informative = true;
};

// Each label owns a signature token; informative instances mention the
// signature tokens of all their positives.
Dataset SynthDataset(const SynthOptions& options);

std::string SignatureToken(LabelId label);

}  // namespace unidec

#endif  // UNIDEC_DATASET_HPP_
