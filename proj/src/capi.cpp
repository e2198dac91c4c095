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

#include "unidec/unidec.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <sstream>
#include <string>

#include "json.hpp"
#include "unidec/config.hpp"
#include "unidec/trainer.hpp"

struct unidec_config {
  unidec::RunConfig cfg;
};
struct unidec_dataset {
  unidec::Dataset ds;
};
struct unidec_model {
  unidec::ModelParams params;
};
struct unidec_predictions {
  std::vector<unidec::Ranking> rankings;
};

namespace {

thread_local std::string g_last_error;

unidec_status SetError(unidec_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `fn`, mapping exceptions to status codes.
template <typename Fn>
unidec_status Guard(Fn&& fn) {
  try {
    fn();
    return UNIDEC_OK;
  } catch (const unidec::Error& e) {
    return SetError(static_cast<unidec_status>(e.code()), e.what());
  } catch (const std::bad_alloc&) {
    return SetError(UNIDEC_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return SetError(UNIDEC_ERR_INTERNAL, e.what());
  }
}

#define UNIDEC_REQUIRE(ptr)                                                              \
  do {                                                                                   \
    if ((ptr) == nullptr) return SetError(UNIDEC_ERR_INVALID_ARGUMENT, #ptr " is NULL"); \
  } while (0)

char* CopyString(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::string Sidecar(const unidec::ModelParams& params, const unidec::RunConfig* config) {
  nlohmann::ordered_json j;
  j["format"] = "UNIDECMP";
  j["version"] = 1;
  j["vocab_dim"] = params.dims.vocab;
  j["encoder_dim"] = params.dims.encoder;
  j["head_dim"] = params.dims.head;
  j["num_labels"] = params.dims.labels;
  j["dropout"] = params.dropout_rate;
  if (config != nullptr) {
    nlohmann::ordered_json hp;
    for (const auto& [k, v] : config->values()) hp[k] = v;
    j["config"] = hp;
  }
  return j.dump(2) + "\n";
}

void SaveWithSidecar(const unidec::ModelParams& params, const unidec::RunConfig* config,
                     const std::string& path) {
  unidec::SaveCheckpoint(params, path);
  std::filesystem::path side(path);
  side.replace_extension(".json");
  std::ofstream out(side, std::ios::binary);
  out << Sidecar(params, config);
  if (!out) unidec::Fail(unidec::ErrorCode::kIo, "cannot write '" + side.string() + "'");
}

std::ofstream OpenOut(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) unidec::Fail(unidec::ErrorCode::kIo, "cannot open '" + path.string() + "' for writing");
  return out;
}

}  // namespace

extern "C" {

const char* unidec_version(void) { return "1.0.0"; }

const char* unidec_status_string(unidec_status status) {
  switch (status) {
    case UNIDEC_OK: return "ok";
    case UNIDEC_ERR_INVALID_ARGUMENT: return "invalid argument";
    case UNIDEC_ERR_CONFIG: return "configuration error";
    case UNIDEC_ERR_IO: return "i/o error";
    case UNIDEC_ERR_FORMAT: return "format error";
    case UNIDEC_ERR_NUMERIC: return "numeric error";
    case UNIDEC_ERR_DEGENERATE: return "degenerate embedding";
    case UNIDEC_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* unidec_last_error(void) { return g_last_error.c_str(); }

void unidec_string_free(char* s) { std::free(s); }

size_t unidec_config_key_count(void) { return unidec::ConfigKeys().size(); }

const char* unidec_config_key_name(size_t index) {
  const auto keys = unidec::ConfigKeys();
  return index < keys.size() ? keys[index].name : nullptr;
}

const char* unidec_config_key_type(size_t index) {
  const auto keys = unidec::ConfigKeys();
  return index < keys.size() ? keys[index].type : nullptr;
}

const char* unidec_config_key_default(size_t index) {
  const auto keys = unidec::ConfigKeys();
  return index < keys.size() ? keys[index].default_value : nullptr;
}

const char* unidec_config_key_help(size_t index) {
  const auto keys = unidec::ConfigKeys();
  return index < keys.size() ? keys[index].help : nullptr;
}

unidec_status unidec_config_create(unidec_config** out) {
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] { *out = new unidec_config(); });
}

void unidec_config_destroy(unidec_config* config) { delete config; }

unidec_status unidec_config_set(unidec_config* config, const char* key, const char* value) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(key);
  UNIDEC_REQUIRE(value);
  return Guard([&] { config->cfg.Set(key, value); });
}

unidec_status unidec_config_get(const unidec_config* config, const char* key, const char** value) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(key);
  UNIDEC_REQUIRE(value);
  return Guard([&] { *value = config->cfg.Get(key).c_str(); });
}

unidec_status unidec_config_load_file(unidec_config* config, const char* path) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(path);
  return Guard([&] { config->cfg.LoadFile(path); });
}

unidec_status unidec_dataset_load(const unidec_config* config, unidec_dataset** out) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] { *out = new unidec_dataset{unidec::LoadConfiguredDataset(config->cfg)}; });
}

unidec_status unidec_dataset_load_eval(const unidec_config* config, unidec_dataset** out) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] {
    unidec::Dataset ds;
    if (unidec::LoadConfiguredEvalDataset(config->cfg, ds)) *out = new unidec_dataset{std::move(ds)};
  });
}

void unidec_dataset_destroy(unidec_dataset* dataset) { delete dataset; }

size_t unidec_dataset_num_instances(const unidec_dataset* dataset) {
  return dataset ? dataset->ds.num_instances() : 0;
}

size_t unidec_dataset_num_labels(const unidec_dataset* dataset) { return dataset ? dataset->ds.num_labels() : 0; }

size_t unidec_dataset_num_warnings(const unidec_dataset* dataset) { return dataset ? dataset->ds.warnings() : 0; }

unidec_status unidec_train(const unidec_config* config, const unidec_dataset* train, const unidec_dataset* eval,
                           unidec_model** out) {
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(train);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] {
    const unidec::RunConfig& rc = config->cfg;
    const unidec::TrainConfig tc = rc.ToTrainConfig();
    const std::filesystem::path dir = rc.Get("output_dir");
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) unidec::Fail(unidec::ErrorCode::kIo, "cannot create output_dir '" + dir.string() + "': " + ec.message());

    const bool timing = rc.GetBool("log_timing");
    const bool dump = rc.GetBool("dump_negatives");
    std::ofstream log = OpenOut(dir / "train_log.jsonl");
    const std::string model_path = (dir / "model.bin").string();

    unidec::TrainHooks hooks;
    hooks.on_epoch = [&](const unidec::EpochRecord& r) {
      log << unidec::EpochRecordJson(r, timing) << '\n';
      log.flush();
      if (!log) unidec::Fail(unidec::ErrorCode::kIo, "cannot write training log");
    };
    hooks.on_checkpoint = [&](const unidec::ModelParams& p, std::size_t) { SaveWithSidecar(p, &rc, model_path); };
    if (dump) {
      hooks.on_refresh = [&](const unidec::BatchPlan&, const unidec::HardNegativeCache& cache) {
        std::ofstream f = OpenOut(dir / "hard_negatives.bin");
        unidec::WriteCacheDump(cache, f);
      };
    }
    unidec::TrainResult result = unidec::Train(train->ds, tc, hooks, eval ? &eval->ds : nullptr);
    *out = new unidec_model{std::move(result.params)};
  });
}

unidec_status unidec_model_save(const unidec_model* model, const unidec_config* config, const char* path) {
  UNIDEC_REQUIRE(model);
  UNIDEC_REQUIRE(path);
  return Guard([&] { SaveWithSidecar(model->params, config ? &config->cfg : nullptr, path); });
}

unidec_status unidec_model_load(const char* path, unidec_model** out) {
  UNIDEC_REQUIRE(path);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] { *out = new unidec_model{unidec::LoadCheckpoint(path)}; });
}

void unidec_model_destroy(unidec_model* model) { delete model; }

unidec_status unidec_model_dims(const unidec_model* model, size_t* vocab, size_t* encoder, size_t* head,
                                size_t* labels) {
  UNIDEC_REQUIRE(model);
  const unidec::ModelDims& d = model->params.dims;
  if (vocab) *vocab = d.vocab;
  if (encoder) *encoder = d.encoder;
  if (head) *head = d.head;
  if (labels) *labels = d.labels;
  return UNIDEC_OK;
}

unidec_status unidec_model_check(const unidec_model* model, const unidec_config* config,
                                 const unidec_dataset* dataset) {
  UNIDEC_REQUIRE(model);
  UNIDEC_REQUIRE(config);
  return Guard([&] {
    const unidec::ModelDims& d = model->params.dims;
    const std::pair<const char*, std::size_t> checks[] = {
        {"vocab_dim", d.vocab}, {"encoder_dim", d.encoder}, {"head_dim", d.head}};
    for (const auto& [key, have] : checks) {
      if (!config->cfg.IsExplicit(key)) continue;
      const std::size_t want = config->cfg.GetSize(key);
      if (want != have) {
        unidec::Fail(unidec::ErrorCode::kConfig, std::string("checkpoint ") + key + " = " + std::to_string(have) +
                                                     " but config sets " + std::to_string(want));
      }
    }
    if (dataset && dataset->ds.num_labels() != d.labels) {
      unidec::Fail(unidec::ErrorCode::kConfig, "checkpoint has " + std::to_string(d.labels) +
                                                   " labels but the dataset has " +
                                                   std::to_string(dataset->ds.num_labels()));
    }
  });
}

unidec_status unidec_predict(const unidec_model* model, const unidec_dataset* dataset, const unidec_config* config,
                             unidec_predictions** out) {
  UNIDEC_REQUIRE(model);
  UNIDEC_REQUIRE(dataset);
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] {
    const unidec::RunConfig& rc = config->cfg;
    const unidec::IndexMode mode = unidec::ParseIndexMode(rc.Get("mode"));
    const std::size_t k = rc.GetSize("k");
    const auto index = unidec::BuildIndex(model->params, dataset->ds, mode);
    *out = new unidec_predictions{unidec::Predict(index, model->params, dataset->ds.instance_texts(), k)};
  });
}

void unidec_predictions_destroy(unidec_predictions* predictions) { delete predictions; }

size_t unidec_predictions_num_queries(const unidec_predictions* predictions) {
  return predictions ? predictions->rankings.size() : 0;
}

size_t unidec_predictions_depth(const unidec_predictions* predictions, size_t query) {
  if (!predictions || query >= predictions->rankings.size()) return 0;
  return predictions->rankings[query].size();
}

unidec_status unidec_predictions_get(const unidec_predictions* predictions, size_t query, size_t rank,
                                     uint32_t* label, double* score) {
  UNIDEC_REQUIRE(predictions);
  if (query >= predictions->rankings.size() || rank >= predictions->rankings[query].size()) {
    return SetError(UNIDEC_ERR_INVALID_ARGUMENT, "prediction index out of range");
  }
  const auto& s = predictions->rankings[query][rank];
  if (label) *label = s.id;
  if (score) *score = s.score;
  return UNIDEC_OK;
}

unidec_status unidec_predictions_write_tsv(const unidec_predictions* predictions, const char* path) {
  UNIDEC_REQUIRE(predictions);
  UNIDEC_REQUIRE(path);
  return Guard([&] {
    std::ofstream out = OpenOut(path);
    unidec::WritePredictionsTsv(predictions->rankings, out);
    if (!out) unidec::Fail(unidec::ErrorCode::kIo, std::string("cannot write '") + path + "'");
  });
}

unidec_status unidec_predictions_read_tsv(const char* path, size_t num_queries, unidec_predictions** out) {
  UNIDEC_REQUIRE(path);
  UNIDEC_REQUIRE(out);
  *out = nullptr;
  return Guard([&] {
    std::ifstream in(path, std::ios::binary);
    if (!in) unidec::Fail(unidec::ErrorCode::kIo, std::string("cannot open '") + path + "'");
    *out = new unidec_predictions{unidec::ReadPredictionsTsv(in, num_queries)};
  });
}

unidec_status unidec_evaluate(const unidec_predictions* predictions, const unidec_dataset* truth,
                              const unidec_dataset* propensity_source, const unidec_config* config,
                              char** json_out) {
  UNIDEC_REQUIRE(predictions);
  UNIDEC_REQUIRE(truth);
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(json_out);
  *json_out = nullptr;
  return Guard([&] {
    const unidec::RunConfig& rc = config->cfg;
    const unidec::Dataset& prop = propensity_source ? propensity_source->ds : truth->ds;
    if (prop.num_labels() != truth->ds.num_labels()) {
      unidec::Fail(unidec::ErrorCode::kConfig, "propensity dataset label count differs from the truth dataset");
    }
    if (predictions->rankings.size() != truth->ds.num_instances()) {
      unidec::Fail(unidec::ErrorCode::kFormat, "predictions cover " + std::to_string(predictions->rankings.size()) +
                                                   " queries but the dataset has " +
                                                   std::to_string(truth->ds.num_instances()));
    }
    for (const auto& ranking : predictions->rankings) {
      for (const auto& s : ranking) {
        if (s.id >= truth->ds.num_labels()) {
          unidec::Fail(unidec::ErrorCode::kFormat, "predicted label id " + std::to_string(s.id) + " out of range");
        }
      }
    }
    const auto props = unidec::Propensities(prop.label_frequencies(), prop.num_instances(), rc.GetDouble("prop_a"),
                                            rc.GetDouble("prop_b"));
    const auto report =
        unidec::Evaluate(predictions->rankings, truth->ds.all_positives(), props, rc.GetSizeList("k_list"));
    *json_out = CopyString(report.ToJson() + "\n");
  });
}

unidec_status unidec_simulate_batches(const unidec_model* model, const unidec_dataset* dataset,
                                      const unidec_config* config, char** csv_out) {
  UNIDEC_REQUIRE(dataset);
  UNIDEC_REQUIRE(config);
  UNIDEC_REQUIRE(csv_out);
  *csv_out = nullptr;
  return Guard([&] {
    const unidec::RunConfig& rc = config->cfg;
    const unidec::Dataset& ds = dataset->ds;
    if (ds.num_instances() == 0) unidec::Fail(unidec::ErrorCode::kConfig, "dataset has no instances");
    unidec::ModelParams fresh;
    const unidec::ModelParams* params = model ? &model->params : nullptr;
    if (params == nullptr) {
      unidec::ModelDims dims{rc.GetSize("vocab_dim"), rc.GetSize("encoder_dim"), rc.GetSize("head_dim"),
                             ds.num_labels()};
      fresh = unidec::ModelParams::Init(dims, rc.GetDouble("dropout"), static_cast<std::uint64_t>(rc.GetInt("seed")));
      params = &fresh;
    } else if (params->dims.labels != ds.num_labels()) {
      unidec::Fail(unidec::ErrorCode::kConfig, "checkpoint label count differs from the dataset");
    }
    const unidec::Matrix q = unidec::EmbedTexts(*params, ds.instance_texts(), unidec::Head::kDe);
    const unidec::Matrix l = unidec::EmbedTexts(*params, ds.label_texts(), unidec::Head::kDe);
    const std::size_t batch_size = rc.GetSize("batch_size");
    if (batch_size == 0) unidec::Fail(unidec::ErrorCode::kConfig, "config key 'batch_size': must be >= 1");

    std::ostringstream out;
    unidec::WriteBatchStatsHeader(out);
    for (std::size_t beta : rc.GetSizeList("sim_betas")) {
      for (std::size_t eta : rc.GetSizeList("sim_etas")) {
        if (beta == 0) unidec::Fail(unidec::ErrorCode::kConfig, "config key 'sim_betas': values must be >= 1");
        unidec::BatchStatsOptions o;
        o.beta = beta;
        o.eta = eta;
        o.num_batches = (ds.num_instances() + batch_size - 1) / batch_size;
        o.cache_size = rc.GetSize("cache_size") ? rc.GetSize("cache_size") : eta * rc.GetSize("refresh_interval");
        o.seed = static_cast<std::uint64_t>(rc.GetInt("seed"));
        unidec::WriteBatchStatsRow(unidec::ComputeBatchStats(ds, q, l, o), out);
      }
    }
    *csv_out = CopyString(out.str());
  });
}

}  // extern "C"
