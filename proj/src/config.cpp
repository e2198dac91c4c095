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

#include "unidec/config.hpp"

#include <array>
#include <cctype>
#include <charconv>
#include <fstream>
#include <istream>

namespace unidec {

namespace {

constexpr std::array kKeys = {
    // data
    ConfigKey{"format", "string", "xmc-sparse", "dataset format: xmc-sparse | jsonl | synth"},
    ConfigKey{"queries", "string", "", "relevance file (xmc-sparse) or instance JSONL (jsonl)"},
    ConfigKey{"labels", "string", "", "label text file, one label per line"},
    ConfigKey{"query_texts", "string", "", "instance text file for xmc-sparse, one per line"},
    ConfigKey{"eval_queries", "string", "", "optional evaluation split (same format and labels)"},
    ConfigKey{"eval_query_texts", "string", "", "instance texts of the evaluation split"},
    ConfigKey{"propensity_queries", "string", "", "training relevance file feeding the propensity model in eval"},
    ConfigKey{"synth_instances", "int", "512", "synthetic dataset: number of instances"},
    ConfigKey{"synth_labels", "int", "128", "synthetic dataset: number of labels"},
    ConfigKey{"synth_min_pos", "int", "1", "synthetic dataset: min positives per instance"},
    ConfigKey{"synth_max_pos", "int", "3", "synthetic dataset: max positives per instance"},
    ConfigKey{"synth_noise", "int", "2", "synthetic dataset: noise tokens per instance"},
    // model
    ConfigKey{"vocab_dim", "int", "32768", "feature hashing dimension"},
    ConfigKey{"encoder_dim", "int", "64", "shared encoder width"},
    ConfigKey{"head_dim", "int", "32", "projection width of each head"},
    ConfigKey{"dropout", "float", "0.1", "dropout rate in both heads"},
    ConfigKey{"init_classifiers", "bool", "true", "warm-start classifier rows from label DE embeddings"},
    // training
    ConfigKey{"epochs", "int", "150", "training epochs"},
    ConfigKey{"refresh_interval", "int", "5", "epochs between re-clustering / hard-negative refresh"},
    ConfigKey{"batch_size", "int", "64", "queries per batch"},
    ConfigKey{"beta", "int", "3", "sampled positives per query"},
    ConfigKey{"eta", "int", "6", "sampled hard negatives per query"},
    ConfigKey{"beta_clf", "int", "0", "extra positives per query for the classifier pool"},
    ConfigKey{"cache_size", "int", "0", "hard negatives kept per query (0 = eta * refresh_interval)"},
    ConfigKey{"negatives_search", "string", "exact", "hard-negative search: exact | approximate"},
    ConfigKey{"temperature", "float", "0.05", "softmax temperature"},
    ConfigKey{"clf_temperature", "float", "0", "classifier temperature (0 = temperature)"},
    ConfigKey{"lambda", "float", "0.5", "weight of the DE loss against the classifier loss"},
    ConfigKey{"lambda_de", "float", "0.5", "q2l weight inside the DE loss"},
    ConfigKey{"lambda_clf", "float", "0.5", "q2l weight inside the classifier loss"},
    ConfigKey{"reduction", "string", "pal_n", "multi-label reduction: pal_n | pal"},
    ConfigKey{"batch_reduction", "string", "mean", "reduction over anchors: mean | sum"},
    ConfigKey{"lr_encoder", "float", "1e-4", "learning rate of the encoder embeddings"},
    ConfigKey{"lr_heads", "float", "2e-4", "learning rate of the projection heads"},
    ConfigKey{"lr_classifier", "float", "1e-3", "learning rate of the classifier rows"},
    ConfigKey{"clip_norm", "float", "0", "global gradient-norm clip (0 = off)"},
    ConfigKey{"seed", "int", "0", "seed for every random stream"},
    ConfigKey{"eval_every", "int", "0", "evaluate every N epochs (0 = never)"},
    ConfigKey{"log_timing", "bool", "false", "include wall-clock seconds in the training log"},
    ConfigKey{"dump_negatives", "bool", "false", "write output_dir/hard_negatives.bin at every refresh"},
    // outputs / inference / evaluation
    ConfigKey{"output_dir", "string", ".", "directory for model.bin, model.json and train_log.jsonl"},
    ConfigKey{"checkpoint", "string", "", "model checkpoint to load (predict, simulate-batches)"},
    ConfigKey{"mode", "string", "concat", "inference mode: de | clf | concat"},
    ConfigKey{"k", "int", "5", "predictions per query"},
    ConfigKey{"predictions", "string", "", "prediction TSV path (output of predict, input of eval)"},
    ConfigKey{"metrics_out", "string", "", "metrics JSON path (empty = stdout)"},
    ConfigKey{"k_list", "list", "1,3,5", "k values for P@k / PSP@k"},
    ConfigKey{"prop_a", "float", "0.55", "propensity model parameter A"},
    ConfigKey{"prop_b", "float", "1.5", "propensity model parameter B"},
    ConfigKey{"sim_betas", "list", "1,2,3", "beta values swept by simulate-batches"},
    ConfigKey{"sim_etas", "list", "0", "eta values swept by simulate-batches"},
    ConfigKey{"batches_out", "string", "", "simulate-batches CSV path (empty = stdout)"},
};

const ConfigKey* FindKey(std::string_view name) {
  for (const auto& k : kKeys) {
    if (name == k.name) return &k;
  }
  return nullptr;
}

std::string Trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return std::string(s);
}

std::string KeyError(std::string_view key, const std::string& what) {
  return "config key '" + std::string(key) + "': " + what;
}

bool ParseInt(std::string_view s, std::int64_t& out) {
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return !s.empty() && ec == std::errc() && ptr == s.data() + s.size();
}

bool ParseDouble(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t used = 0;
    out = std::stod(s, &used);
    return used == s.size();
  } catch (const std::exception&) {
    return false;
  }
}

bool ParseBool(std::string_view s, bool& out) {
  if (s == "true" || s == "1" || s == "yes" || s == "on") {
    out = true;
    return true;
  }
  if (s == "false" || s == "0" || s == "no" || s == "off") {
    out = false;
    return true;
  }
  return false;
}

bool ParseList(std::string_view s, std::vector<std::size_t>& out) {
  out.clear();
  while (!s.empty()) {
    const auto comma = s.find(',');
    std::int64_t v;
    if (!ParseInt(Trim(s.substr(0, comma)), v) || v < 0) return false;
    out.push_back(static_cast<std::size_t>(v));
    s = comma == std::string_view::npos ? std::string_view{} : s.substr(comma + 1);
  }
  return !out.empty();
}

void CheckType(const ConfigKey& key, const std::string& value) {
  const std::string_view type = key.type;
  bool ok = true;
  if (type == "int") {
    std::int64_t v;
    ok = ParseInt(value, v);
  } else if (type == "float") {
    double v;
    ok = ParseDouble(value, v);
  } else if (type == "bool") {
    bool v;
    ok = ParseBool(value, v);
  } else if (type == "list") {
    std::vector<std::size_t> v;
    ok = ParseList(value, v);
  }
  if (!ok) Fail(ErrorCode::kConfig, KeyError(key.name, "cannot parse '" + value + "' as " + key.type));
}

}  // namespace

std::span<const ConfigKey> ConfigKeys() { return kKeys; }

RunConfig::RunConfig() {
  for (const auto& k : kKeys) values_[k.name] = k.default_value;
}

void RunConfig::Set(std::string_view key, std::string_view value) {
  const ConfigKey* k = FindKey(key);
  if (k == nullptr) Fail(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
  std::string v = Trim(value);
  CheckType(*k, v);
  values_[k->name] = std::move(v);
  explicit_[k->name] = true;
}

const std::string& RunConfig::Get(std::string_view key) const {
  const auto it = values_.find(key);
  if (it == values_.end()) Fail(ErrorCode::kConfig, "unknown config key '" + std::string(key) + "'");
  return it->second;
}

bool RunConfig::IsExplicit(std::string_view key) const { return explicit_.count(key) > 0; }

void RunConfig::LoadStream(std::istream& in, const std::string& source) {
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    const std::string body = Trim(line);
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      Fail(ErrorCode::kConfig, "expected key = value, line " + std::to_string(line_no) + " (" + source + ")");
    }
    Set(Trim(body.substr(0, eq)), body.substr(eq + 1));
  }
}

void RunConfig::LoadFile(const std::string& path) {
  std::ifstream in(path);
  if (!in) Fail(ErrorCode::kConfig, "cannot open config file '" + path + "'");
  LoadStream(in, path);
}

std::int64_t RunConfig::GetInt(std::string_view key) const {
  std::int64_t v;
  if (!ParseInt(Get(key), v)) Fail(ErrorCode::kConfig, KeyError(key, "not an integer"));
  return v;
}

std::size_t RunConfig::GetSize(std::string_view key) const {
  const std::int64_t v = GetInt(key);
  if (v < 0) Fail(ErrorCode::kConfig, KeyError(key, "must be >= 0"));
  return static_cast<std::size_t>(v);
}

double RunConfig::GetDouble(std::string_view key) const {
  double v;
  if (!ParseDouble(Get(key), v)) Fail(ErrorCode::kConfig, KeyError(key, "not a number"));
  return v;
}

bool RunConfig::GetBool(std::string_view key) const {
  bool v;
  if (!ParseBool(Get(key), v)) Fail(ErrorCode::kConfig, KeyError(key, "not a boolean"));
  return v;
}

std::vector<std::size_t> RunConfig::GetSizeList(std::string_view key) const {
  std::vector<std::size_t> v;
  if (!ParseList(Get(key), v)) Fail(ErrorCode::kConfig, KeyError(key, "not a list of integers"));
  return v;
}

std::string RunConfig::Require(std::string_view key) const {
  const std::string& v = Get(key);
  if (v.empty()) Fail(ErrorCode::kConfig, "missing required config key '" + std::string(key) + "'");
  return v;
}

TrainConfig RunConfig::ToTrainConfig() const {
  TrainConfig c;
  c.epochs = GetSize("epochs");
  c.refresh_interval = GetSize("refresh_interval");
  c.batch_size = GetSize("batch_size");
  c.beta = GetSize("beta");
  c.eta = GetSize("eta");
  c.beta_clf = GetSize("beta_clf");
  c.cache_size = GetSize("cache_size");
  c.negative_search = ParseSearchExactness(Get("negatives_search"));
  c.loss.temperature = GetDouble("temperature");
  c.loss.clf_temperature = GetDouble("clf_temperature");
  c.loss.lambda = GetDouble("lambda");
  c.loss.lambda_de = GetDouble("lambda_de");
  c.loss.lambda_clf = GetDouble("lambda_clf");
  c.loss.reduction = ParseReduction(Get("reduction"));
  c.loss.batch_reduction = ParseBatchReduction(Get("batch_reduction"));
  c.adam.lr_encoder = GetDouble("lr_encoder");
  c.adam.lr_heads = GetDouble("lr_heads");
  c.adam.lr_classifier = GetDouble("lr_classifier");
  c.adam.clip_norm = GetDouble("clip_norm");
  c.dims.vocab = GetSize("vocab_dim");
  c.dims.encoder = GetSize("encoder_dim");
  c.dims.head = GetSize("head_dim");
  c.dropout = GetDouble("dropout");
  c.init_classifiers_from_labels = GetBool("init_classifiers");
  c.seed = static_cast<std::uint64_t>(GetInt("seed"));
  c.eval_every = GetSize("eval_every");
  c.eval_ks = GetSizeList("k_list");
  c.propensity_a = GetDouble("prop_a");
  c.propensity_b = GetDouble("prop_b");
  c.Validate();
  return c;
}

std::vector<IndexMode> RunConfig::EvalModes() const {
  return {IndexMode::kDe, IndexMode::kClf, IndexMode::kConcat};
}

Dataset LoadConfiguredDataset(const RunConfig& config) {
  const std::string format = config.Get("format");
  if (format == "synth") {
    SynthOptions o;
    o.num_instances = config.GetSize("synth_instances");
    o.num_labels = config.GetSize("synth_labels");
    o.min_positives = config.GetSize("synth_min_pos");
    o.max_positives = config.GetSize("synth_max_pos");
    o.noise_tokens = config.GetSize("synth_noise");
    o.seed = static_cast<std::uint64_t>(config.GetInt("seed"));
    return SynthDataset(o);
  }
  const DatasetFormat f = ParseDatasetFormat(format);
  DatasetPaths paths;
  paths.queries = config.Require("queries");
  paths.labels = config.Require("labels");
  paths.query_texts = config.Get("query_texts");
  return LoadDataset(paths, f);
}

bool LoadConfiguredEvalDataset(const RunConfig& config, Dataset& out) {
  if (config.Get("eval_queries").empty()) return false;
  const std::string format = config.Get("format");
  if (format == "synth") Fail(ErrorCode::kConfig, "eval_queries cannot be combined with format=synth");
  DatasetPaths paths;
  paths.queries = config.Get("eval_queries");
  paths.labels = config.Require("labels");
  paths.query_texts = config.Get("eval_query_texts");
  out = LoadDataset(paths, ParseDatasetFormat(format));
  return true;
}

}  // namespace unidec
