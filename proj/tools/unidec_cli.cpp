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

// unidec: train / predict / eval / simulate-batches. Talks to the library
// through the C interface only.
//
// Exit codes: 0 success, 1 runtime abort, 2 usage or configuration error.

#include <cstdio>
#include <fstream>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "unidec/unidec.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

// Thrown out of command bodies; carries the exit code.
struct CommandError {
  int exit_code;
};

int ExitCodeFor(unidec_status s) {
  switch (s) {
    case UNIDEC_OK: return kExitOk;
    case UNIDEC_ERR_INVALID_ARGUMENT:
    case UNIDEC_ERR_CONFIG: return kExitUsage;
    default: return kExitRuntime;
  }
}

void Check(unidec_status s, const char* what) {
  if (s == UNIDEC_OK) return;
  std::fprintf(stderr, "unidec: %s: %s (%s)\n", what, unidec_last_error(), unidec_status_string(s));
  throw CommandError{ExitCodeFor(s)};
}

template <typename T, void (*Destroy)(T*)>
struct Deleter {
  void operator()(T* p) const { Destroy(p); }
};
using ConfigPtr = std::unique_ptr<unidec_config, Deleter<unidec_config, unidec_config_destroy>>;
using DatasetPtr = std::unique_ptr<unidec_dataset, Deleter<unidec_dataset, unidec_dataset_destroy>>;
using ModelPtr = std::unique_ptr<unidec_model, Deleter<unidec_model, unidec_model_destroy>>;
using PredsPtr = std::unique_ptr<unidec_predictions, Deleter<unidec_predictions, unidec_predictions_destroy>>;

struct StringDeleter {
  void operator()(char* p) const { unidec_string_free(p); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

// Flags shared by every subcommand: --config plus one --<key> per config key.
struct CommandArgs {
  std::string config_file;
  std::map<std::string, std::optional<std::string>> overrides;
};

void AddConfigFlags(CLI::App* cmd, CommandArgs& args) {
  cmd->add_option("--config", args.config_file, "key = value config file (command-line flags take precedence)");
  const size_t n = unidec_config_key_count();
  for (size_t i = 0; i < n; ++i) {
    const std::string name = unidec_config_key_name(i);
    std::string help = std::string(unidec_config_key_help(i)) + " [" + unidec_config_key_type(i) +
                       ", default: '" + unidec_config_key_default(i) + "']";
    args.overrides[name];
    cmd->add_option("--" + name, args.overrides[name], help);
  }
}

std::string Value(const unidec_config* cfg, const char* key) {
  const char* v = nullptr;
  Check(unidec_config_get(cfg, key, &v), "config");
  return v;
}

ConfigPtr BuildConfig(const CommandArgs& args) {
  unidec_config* raw = nullptr;
  Check(unidec_config_create(&raw), "config");
  ConfigPtr cfg(raw);
  if (!args.config_file.empty()) Check(unidec_config_load_file(cfg.get(), args.config_file.c_str()), "config");
  for (const auto& [key, value] : args.overrides) {
    if (value) Check(unidec_config_set(cfg.get(), key.c_str(), value->c_str()), "config");
  }
  return cfg;
}

DatasetPtr LoadTrain(const unidec_config* cfg) {
  unidec_dataset* raw = nullptr;
  Check(unidec_dataset_load(cfg, &raw), "dataset");
  DatasetPtr ds(raw);
  if (size_t w = unidec_dataset_num_warnings(ds.get())) {
    std::fprintf(stderr, "unidec: warning: %zu instance(s) have no positive labels\n", w);
  }
  return ds;
}

// predict / eval run on the eval split when one is configured.
DatasetPtr LoadTarget(const unidec_config* cfg) {
  unidec_dataset* raw = nullptr;
  Check(unidec_dataset_load_eval(cfg, &raw), "eval dataset");
  if (raw != nullptr) return DatasetPtr(raw);
  return LoadTrain(cfg);
}

ModelPtr LoadModel(const unidec_config* cfg) {
  const std::string path = Value(cfg, "checkpoint");
  if (path.empty()) {
    std::fprintf(stderr, "unidec: missing required config key 'checkpoint'\n");
    throw CommandError{kExitUsage};
  }
  unidec_model* raw = nullptr;
  Check(unidec_model_load(path.c_str(), &raw), "checkpoint");
  return ModelPtr(raw);
}

void WriteTextOutput(const std::string& path, const char* text) {
  if (path.empty()) {
    std::fputs(text, stdout);
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::fprintf(stderr, "unidec: cannot write '%s'\n", path.c_str());
    throw CommandError{kExitRuntime};
  }
}

int CmdTrain(const CommandArgs& args) {
  ConfigPtr cfg = BuildConfig(args);
  DatasetPtr train = LoadTrain(cfg.get());
  unidec_dataset* eval_raw = nullptr;
  Check(unidec_dataset_load_eval(cfg.get(), &eval_raw), "eval dataset");
  DatasetPtr eval(eval_raw);
  unidec_model* model_raw = nullptr;
  Check(unidec_train(cfg.get(), train.get(), eval.get(), &model_raw), "train");
  ModelPtr model(model_raw);
  std::fprintf(stderr, "unidec: trained on %zu instances, %zu labels; artifacts in %s\n",
               unidec_dataset_num_instances(train.get()), unidec_dataset_num_labels(train.get()),
               Value(cfg.get(), "output_dir").c_str());
  return kExitOk;
}

int CmdPredict(const CommandArgs& args) {
  ConfigPtr cfg = BuildConfig(args);
  ModelPtr model = LoadModel(cfg.get());
  DatasetPtr ds = LoadTarget(cfg.get());
  Check(unidec_model_check(model.get(), cfg.get(), ds.get()), "checkpoint");
  unidec_predictions* raw = nullptr;
  Check(unidec_predict(model.get(), ds.get(), cfg.get(), &raw), "predict");
  PredsPtr preds(raw);
  const std::string out = Value(cfg.get(), "predictions");
  Check(unidec_predictions_write_tsv(preds.get(), out.empty() ? "/dev/stdout" : out.c_str()), "predictions");
  return kExitOk;
}

int CmdEval(const CommandArgs& args) {
  ConfigPtr cfg = BuildConfig(args);
  const std::string path = Value(cfg.get(), "predictions");
  if (path.empty()) {
    std::fprintf(stderr, "unidec: missing required config key 'predictions'\n");
    return kExitUsage;
  }
  DatasetPtr truth = LoadTarget(cfg.get());
  DatasetPtr prop;
  const std::string prop_path = Value(cfg.get(), "propensity_queries");
  if (!prop_path.empty()) {
    // Same format and labels, training relevance file swapped in.
    unidec_config* raw = nullptr;
    Check(unidec_config_create(&raw), "config");
    ConfigPtr pc(raw);
    for (const char* key : {"format", "labels"}) Check(unidec_config_set(pc.get(), key, Value(cfg.get(), key).c_str()), "config");
    Check(unidec_config_set(pc.get(), "queries", prop_path.c_str()), "config");
    prop = LoadTrain(pc.get());
  }
  unidec_predictions* raw = nullptr;
  Check(unidec_predictions_read_tsv(path.c_str(), unidec_dataset_num_instances(truth.get()), &raw), "predictions");
  PredsPtr preds(raw);
  char* json = nullptr;
  Check(unidec_evaluate(preds.get(), truth.get(), prop.get(), cfg.get(), &json), "eval");
  OwnedString owned(json);
  WriteTextOutput(Value(cfg.get(), "metrics_out"), json);
  return kExitOk;
}

int CmdSimulateBatches(const CommandArgs& args) {
  ConfigPtr cfg = BuildConfig(args);
  DatasetPtr ds = LoadTrain(cfg.get());
  ModelPtr model;
  if (!Value(cfg.get(), "checkpoint").empty()) {
    model = LoadModel(cfg.get());
    Check(unidec_model_check(model.get(), cfg.get(), ds.get()), "checkpoint");
  }
  char* csv = nullptr;
  Check(unidec_simulate_batches(model.get(), ds.get(), cfg.get(), &csv), "simulate-batches");
  OwnedString owned(csv);
  WriteTextOutput(Value(cfg.get(), "batches_out"), csv);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"unidec: dual-encoder + classifier training for extreme multi-label classification"};
  app.set_version_flag("--version", std::string(unidec_version()));
  app.require_subcommand(1);

  CommandArgs train_args, predict_args, eval_args, sim_args;
  CLI::App* train = app.add_subcommand("train", "train a model; writes model.bin, model.json, train_log.jsonl");
  CLI::App* predict = app.add_subcommand("predict", "top-k predictions TSV (query_id, rank, label_id, score)");
  CLI::App* eval = app.add_subcommand("eval", "P@k and PSP@k of a predictions TSV as JSON");
  CLI::App* sim = app.add_subcommand("simulate-batches", "CSV of in-batch positive statistics");
  AddConfigFlags(train, train_args);
  AddConfigFlags(predict, predict_args);
  AddConfigFlags(eval, eval_args);
  AddConfigFlags(sim, sim_args);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (train->parsed()) return CmdTrain(train_args);
    if (predict->parsed()) return CmdPredict(predict_args);
    if (eval->parsed()) return CmdEval(eval_args);
    if (sim->parsed()) return CmdSimulateBatches(sim_args);
  } catch (const CommandError& e) {
    return e.exit_code;
  }
  return kExitUsage;
}
