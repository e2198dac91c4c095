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

// Run configuration: a flat set of known keys with documented defaults,
// filled from a key=value file and then from command-line overrides.

#ifndef UNIDEC_CONFIG_HPP_
#define UNIDEC_CONFIG_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "unidec/batcher.hpp"
#include "unidec/dataset.hpp"
#include "unidec/inference.hpp"
#include "unidec/trainer.hpp"

namespace unidec {

struct ConfigKey {
  const char* name;
  const char* type;  // "string", "int", "float", "bool", "list" (comma-separated ints)
  const char* default_value;
  const char* help;
};

std::span<const ConfigKey> ConfigKeys();

class RunConfig {
 public:
  RunConfig();

  // Throws Error(kConfig) for unknown keys or values that fail to parse for
  // the key's type.
  void Set(std::string_view key, std::string_view value);
  const std::string& Get(std::string_view key) const;
  bool IsExplicit(std::string_view key) const;

  // Lines are "key = value"; '#' starts a comment; blank lines ignored.
  void LoadStream(std::istream& in, const std::string& source);
  void LoadFile(const std::string& path);

  std::string GetString(std::string_view key) const { return Get(key); }
  std::int64_t GetInt(std::string_view key) const;
  std::size_t GetSize(std::string_view key) const;
  double GetDouble(std::string_view key) const;
  bool GetBool(std::string_view key) const;
  std::vector<std::size_t> GetSizeList(std::string_view key) const;
  // Throws Error(kConfig) naming the key when it is empty.
  std::string Require(std::string_view key) const;

  TrainConfig ToTrainConfig() const;
  std::vector<IndexMode> EvalModes() const;

  const std::map<std::string, std::string, std::less<>>& values() const { return values_; }

 private:
  std::map<std::string, std::string, std::less<>> values_;
  std::map<std::string, bool, std::less<>> explicit_;
};

// Loads the dataset selected by `format`: xmc-sparse or jsonl from the
// queries/labels/query_texts keys, or a synthetic dataset from synth_* keys.
Dataset LoadConfiguredDataset(const RunConfig& config);

// Same labels file, eval_queries / eval_query_texts split. Returns false when
// no eval split is configured.
bool LoadConfiguredEvalDataset(const RunConfig& config, Dataset& out);

}  // namespace unidec

#endif  // UNIDEC_CONFIG_HPP_
