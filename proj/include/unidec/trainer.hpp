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

// Unified dual-encoder + classifier training loop.
//
// Every `refresh_interval` epochs (starting at epoch 0) the DE embeddings of
// all queries and labels are recomputed, queries are re-clustered into
// batches and the hard-negative cache is refreshed. Each batch is then
// collated, both heads are run on its queries and the DE head on its pool
// labels, and one Adam step is taken on
//   L = lambda * L_D + (1 - lambda) * L_C.

#ifndef UNIDEC_TRAINER_HPP_
#define UNIDEC_TRAINER_HPP_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "unidec/batcher.hpp"
#include "unidec/dataset.hpp"
#include "unidec/encoder.hpp"
#include "unidec/inference.hpp"
#include "unidec/losses.hpp"
#include "unidec/metrics.hpp"
#include "unidec/negatives.hpp"

namespace unidec {

struct TrainConfig {
  std::size_t epochs = 150;
  std::size_t refresh_interval = 5;
  std::size_t batch_size = 64;
  std::size_t beta = 3;
  std::size_t eta = 6;
  std::size_t beta_clf = 0;
  std::size_t cache_size = 0;  // 0 means eta * refresh_interval
  SearchExactness negative_search = SearchExactness::kExact;
  LossConfig loss;
  AdamConfig adam;
  ModelDims dims;  // labels is taken from the dataset
  double dropout = 0.1;
  bool init_classifiers_from_labels = true;
  std::uint64_t seed = 0;
  std::size_t eval_every = 0;  // 0 disables in-training evaluation
  std::vector<std::size_t> eval_ks = {1, 3, 5};
  std::vector<IndexMode> eval_modes = {IndexMode::kDe, IndexMode::kClf, IndexMode::kConcat};
  double propensity_a = 0.55;
  double propensity_b = 1.5;

  std::size_t EffectiveCacheSize() const { return cache_size ? cache_size : eta * refresh_interval; }
  // Throws Error(kConfig).
  void Validate() const;
};

struct LossBreakdown {
  double de_q2l = 0.0;
  double de_l2q = 0.0;
  double clf_q2l = 0.0;
  double clf_l2q = 0.0;
  double de = 0.0;
  double clf = 0.0;
  double total = 0.0;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;  // mean over the epoch's batches
  std::size_t batches = 0;
  bool refreshed = false;
  double seconds = 0.0;
  // "<mode>/P@k", "<mode>/PSP@k" when evaluation ran this epoch.
  std::map<std::string, double> metrics;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
};

// One JSON object per line; timing is only included when requested so that
// logs of identical runs are byte-identical.
std::string EpochRecordJson(const EpochRecord& record, bool include_timing);

struct BatchResult {
  LossBreakdown loss;
  Gradients grads;
};

// Forward + unified loss + backward for one collated batch. Dropout masks
// come from per-(epoch, batch, item) streams so that a call with the same
// arguments replays bit-identically.
BatchResult ComputeBatchLoss(const ModelParams& params, const std::vector<SparseVector>& query_features,
                             const std::vector<SparseVector>& label_features, const CollatedBatch& batch,
                             const LossConfig& loss, std::uint64_t seed, std::int64_t epoch,
                             std::size_t batch_index, Mode mode = Mode::kTrain);

struct TrainHooks {
  std::function<void(const EpochRecord&)> on_epoch;
  // Called after every refresh_interval-th epoch and after the last epoch.
  std::function<void(const ModelParams&, std::size_t epochs_done)> on_checkpoint;
  std::function<void(const BatchPlan&, const HardNegativeCache&)> on_refresh;
};

struct TrainResult {
  ModelParams params;
  TrainReport report;
};

TrainResult Train(const Dataset& dataset, const TrainConfig& config, const TrainHooks& hooks = {},
                  const Dataset* eval_dataset = nullptr);

// P@k and PSP@k of `params` on `eval_dataset` for each mode; propensities come
// from `train_dataset` label frequencies.
std::map<std::string, double> EvaluateModel(const ModelParams& params, const Dataset& eval_dataset,
                                            const Dataset& train_dataset, const std::vector<std::size_t>& ks,
                                            const std::vector<IndexMode>& modes, double propensity_a = 0.55,
                                            double propensity_b = 1.5);

}  // namespace unidec

#endif  // UNIDEC_TRAINER_HPP_
