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

#include "unidec/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "json.hpp"

namespace unidec {

namespace {

std::string LineError(const std::string& what, const std::string& source, std::size_t line) {
  return what + ", line " + std::to_string(line) + " (" + source + ")";
}

std::string_view Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

bool ParseUnsigned(std::string_view s, std::uint64_t& out) {
  s = Trim(s);
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

std::ifstream OpenInput(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kIo, "cannot open '" + path + "'");
  return in;
}

void NormalizeLabelSet(LabelSet& set) {
  std::sort(set.begin(), set.end());
  set.erase(std::unique(set.begin(), set.end()), set.end());
}

}  // namespace

// ---------------------------------------------------------------- Vocabulary

Vocabulary::Vocabulary(std::size_t dim) : dim_(dim) {
  if (dim == 0) Fail(ErrorCode::kConfig, "vocabulary dimension must be > 0");
}

std::vector<std::string> Vocabulary::Tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isalnum(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::uint64_t Vocabulary::Hash(std::string_view token) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : token) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint32_t Vocabulary::TokenId(std::string_view token) const {
  return static_cast<std::uint32_t>(Hash(token) % dim_);
}

SparseVector Vocabulary::Featurize(std::string_view text) const {
  std::map<std::uint32_t, double> counts;
  for (const auto& tok : Tokenize(text)) counts[TokenId(tok)] += 1.0;
  SparseVector out;
  out.reserve(counts.size());
  for (const auto& [idx, c] : counts) out.push_back({idx, c});
  return out;
}

// ------------------------------------------------------------------- Dataset

Dataset::Dataset(std::vector<std::string> instance_texts, std::vector<std::string> label_texts,
                 std::vector<LabelSet> positives, std::size_t num_labels)
    : instance_texts_(std::move(instance_texts)),
      label_texts_(std::move(label_texts)),
      positives_(std::move(positives)),
      label_freq_(num_labels, 0),
      num_labels_(num_labels) {
  for (const auto& row : positives_) {
    for (LabelId l : row) {
      if (l >= num_labels_) {
        Fail(ErrorCode::kFormat, "label id " + std::to_string(l) + " out of range (L=" +
                                     std::to_string(num_labels_) + ")");
      }
      ++label_freq_[l];
    }
  }
  Validate();
}

bool Dataset::IsPositive(std::size_t i, LabelId l) const {
  const auto& row = positives_[i];
  return std::binary_search(row.begin(), row.end(), l);
}

std::size_t Dataset::total_positives() const {
  std::size_t total = 0;
  for (const auto& row : positives_) total += row.size();
  return total;
}

void Dataset::Validate() const {
  if (instance_texts_.size() != positives_.size()) {
    Fail(ErrorCode::kFormat, "instance text count " + std::to_string(instance_texts_.size()) +
                                 " != N " + std::to_string(positives_.size()));
  }
  if (label_texts_.size() != num_labels_) {
    Fail(ErrorCode::kFormat, "label text count " + std::to_string(label_texts_.size()) +
                                 " != L " + std::to_string(num_labels_));
  }
  std::vector<std::uint32_t> freq(num_labels_, 0);
  for (std::size_t i = 0; i < positives_.size(); ++i) {
    const auto& row = positives_[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (row[j] >= num_labels_) {
        Fail(ErrorCode::kFormat, "label id out of range in row " + std::to_string(i));
      }
      if (j > 0 && row[j - 1] >= row[j]) {
        Fail(ErrorCode::kFormat, "row " + std::to_string(i) + " is not sorted/unique");
      }
      ++freq[row[j]];
    }
  }
  if (freq != label_freq_) Fail(ErrorCode::kInternal, "label frequencies out of sync");
  for (std::size_t l = 0; l < label_texts_.size(); ++l) {
    if (Trim(label_texts_[l]).empty()) {
      Fail(ErrorCode::kFormat, "empty label text for label " + std::to_string(l));
    }
  }
}

// ------------------------------------------------------------------- Loading

DatasetFormat ParseDatasetFormat(std::string_view name) {
  if (name == "xmc-sparse") return DatasetFormat::kXmcSparse;
  if (name == "jsonl") return DatasetFormat::kJsonl;
  Fail(ErrorCode::kConfig, "unknown dataset format '" + std::string(name) + "'");
}

RelevanceMatrix ParseXmcSparse(std::istream& in, const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) Fail(ErrorCode::kFormat, LineError("missing header", source, 1));

  // Header is "N L", or the repository-style "N D L" (feature count ignored).
  std::vector<std::uint64_t> header;
  {
    std::istringstream hs(line);
    std::string field;
    while (hs >> field) {
      std::uint64_t v;
      if (!ParseUnsigned(field, v)) Fail(ErrorCode::kFormat, LineError("malformed header", source, 1));
      header.push_back(v);
    }
  }
  if (header.size() != 2 && header.size() != 3) {
    Fail(ErrorCode::kFormat, LineError("malformed header", source, 1));
  }
  const std::size_t n = header.front();
  RelevanceMatrix m;
  m.num_labels = header.back();
  m.rows.reserve(n);

  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (m.rows.size() == n) {
      if (Trim(line).empty()) continue;
      Fail(ErrorCode::kFormat, LineError("more rows than header declares", source, line_no));
    }
    LabelSet row;
    std::string_view body = Trim(line);
    const auto ws = body.find_first_of(" \t");
    std::string_view labels = body.substr(0, ws);
    if (labels.find(':') != std::string_view::npos) labels = {};
    while (!labels.empty()) {
      const auto comma = labels.find(',');
      std::string_view item = labels.substr(0, comma);
      std::uint64_t id;
      if (!ParseUnsigned(item, id)) {
        Fail(ErrorCode::kFormat, LineError("malformed label id", source, line_no));
      }
      if (id >= m.num_labels) {
        Fail(ErrorCode::kFormat, LineError("label id out of range", source, line_no));
      }
      row.push_back(static_cast<LabelId>(id));
      labels = comma == std::string_view::npos ? std::string_view{} : labels.substr(comma + 1);
    }
    NormalizeLabelSet(row);
    if (row.empty()) ++m.empty_rows;
    m.rows.push_back(std::move(row));
  }
  if (m.rows.size() != n) {
    Fail(ErrorCode::kFormat, "header declares " + std::to_string(n) + " rows but body has " +
                                 std::to_string(m.rows.size()) + " (" + source + ")");
  }
  return m;
}

std::vector<std::string> ParseLabelTexts(std::istream& in, const std::string& source) {
  std::vector<std::string> texts;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (Trim(line).empty()) Fail(ErrorCode::kFormat, LineError("empty label text", source, line_no));
    texts.push_back(line);
  }
  return texts;
}

namespace {

std::vector<std::string> ReadLines(const std::string& path) {
  auto in = OpenInput(path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

Dataset LoadJsonl(const DatasetPaths& paths, std::vector<std::string> label_texts) {
  auto in = OpenInput(paths.queries);
  const std::size_t num_labels = label_texts.size();
  std::vector<std::string> texts;
  std::vector<LabelSet> rows;
  std::size_t empty_rows = 0;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    nlohmann::json obj;
    try {
      obj = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception&) {
      Fail(ErrorCode::kFormat, LineError("malformed JSON", paths.queries, line_no));
    }
    if (!obj.is_object() || !obj.contains("text") || !obj["text"].is_string() ||
        !obj.contains("labels") || !obj["labels"].is_array()) {
      Fail(ErrorCode::kFormat, LineError("expected {\"text\": str, \"labels\": [int]}",
                                         paths.queries, line_no));
    }
    LabelSet row;
    for (const auto& v : obj["labels"]) {
      if (!v.is_number_unsigned()) {
        Fail(ErrorCode::kFormat, LineError("malformed label id", paths.queries, line_no));
      }
      const auto id = v.get<std::uint64_t>();
      if (id >= num_labels) {
        Fail(ErrorCode::kFormat, LineError("label id out of range", paths.queries, line_no));
      }
      row.push_back(static_cast<LabelId>(id));
    }
    NormalizeLabelSet(row);
    if (row.empty()) ++empty_rows;
    texts.push_back(obj["text"].get<std::string>());
    rows.push_back(std::move(row));
  }
  Dataset ds(std::move(texts), std::move(label_texts), std::move(rows), num_labels);
  ds.set_warnings(empty_rows);
  return ds;
}

}  // namespace

Dataset LoadDataset(const DatasetPaths& paths, DatasetFormat format) {
  std::vector<std::string> label_texts;
  {
    auto in = OpenInput(paths.labels);
    label_texts = ParseLabelTexts(in, paths.labels);
  }
  if (format == DatasetFormat::kJsonl) return LoadJsonl(paths, std::move(label_texts));

  auto in = OpenInput(paths.queries);
  RelevanceMatrix m = ParseXmcSparse(in, paths.queries);
  if (label_texts.size() != m.num_labels) {
    Fail(ErrorCode::kFormat, "label text file has " + std::to_string(label_texts.size()) +
                                 " lines but header declares L=" + std::to_string(m.num_labels));
  }
  std::vector<std::string> texts;
  if (paths.query_texts.empty()) {
    texts.assign(m.rows.size(), std::string());
  } else {
    texts = ReadLines(paths.query_texts);
    if (texts.size() != m.rows.size()) {
      Fail(ErrorCode::kFormat, "query text file has " + std::to_string(texts.size()) +
                                   " lines but N=" + std::to_string(m.rows.size()));
    }
  }
  Dataset ds(std::move(texts), std::move(label_texts), std::move(m.rows), m.num_labels);
  ds.set_warnings(m.empty_rows);
  return ds;
}

void WriteXmcSparse(const Dataset& dataset, std::ostream& out) {
  out << dataset.num_instances() << ' ' << dataset.num_labels() << '\n';
  for (const auto& row : dataset.all_positives()) {
    for (std::size_t j = 0; j < row.size(); ++j) out << (j ? "," : "") << row[j];
    out << '\n';
  }
}

void WriteTextLines(const std::vector<std::string>& lines, std::ostream& out) {
  for (const auto& l : lines) out << l << '\n';
}

// ----------------------------------------------------------------- Synthetic

std::string SignatureToken(LabelId label) { return "sig" + std::to_string(label); }

Dataset SynthDataset(const SynthOptions& opt) {
  if (opt.num_instances == 0 || opt.num_labels == 0) {
    Fail(ErrorCode::kConfig, "synthetic dataset needs N, L >= 1");
  }
  if (opt.min_positives > opt.max_positives) {
    Fail(ErrorCode::kConfig, "synthetic positives range is empty");
  }
  constexpr std::size_t kNoiseVocab = 64;
  Rng rng(opt.seed);

  std::vector<std::string> label_texts(opt.num_labels);
  for (LabelId l = 0; l < opt.num_labels; ++l) label_texts[l] = "label " + SignatureToken(l);

  std::vector<std::uint32_t> all_labels(opt.num_labels);
  for (LabelId l = 0; l < opt.num_labels; ++l) all_labels[l] = l;

  std::vector<std::string> texts(opt.num_instances);
  std::vector<LabelSet> rows(opt.num_instances);
  const std::size_t hi = std::min(opt.max_positives, opt.num_labels);
  const std::size_t lo = std::min(opt.min_positives, hi);
  for (std::size_t i = 0; i < opt.num_instances; ++i) {
    const std::size_t count = lo + rng.Below(hi - lo + 1);
    rows[i] = SampleWithoutReplacement(all_labels, count, rng);
    std::string text;
    if (opt.informative) {
      for (LabelId l : rows[i]) text += SignatureToken(l) + " ";
    }
    const std::size_t noise = opt.informative ? opt.noise_tokens : opt.noise_tokens + 2;
    for (std::size_t t = 0; t < noise; ++t) text += "noise" + std::to_string(rng.Below(kNoiseVocab)) + " ";
    if (!text.empty()) text.pop_back();
    texts[i] = std::move(text);
  }
  return Dataset(std::move(texts), std::move(label_texts), std::move(rows), opt.num_labels);
}

}  // namespace unidec
