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

#include "unidec/trainer.hpp"

#include <chrono>
#include <cmath>

#include "json.hpp"

namespace unidec {

namespace {

constexpr std::uint64_t kQueryDropoutStream = 4;
constexpr std::uint64_t kLabelDropoutStream = 5;

void CopyRow(std::span<const double> src, std::span<double> dst) {
  std::copy(src.begin(), src.end(), dst.begin());
}

std::vector<double> ScaledRow(std::span<const double> row, double factor) {
  std::vector<double> out(row.begin(), row.end());
  for (double& v : out) v *= factor;
  return out;
}

bool Finite(const LossBreakdown& l) {
  for (double v : {l.de_q2l, l.de_l2q, l.clf_q2l, l.clf_l2q, l.de, l.clf, l.total}) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

}  // namespace

void TrainConfig::Validate() const {
  if (epochs < 1) Fail(ErrorCode::kConfig, "epochs must be >= 1");
  if (refresh_interval < 1) Fail(ErrorCode::kConfig, "refresh_interval must be >= 1");
  if (batch_size < 1) Fail(ErrorCode::kConfig, "batch_size must be >= 1");
  if (beta < 1) Fail(ErrorCode::kConfig, "beta must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) Fail(ErrorCode::kConfig, "dropout must lie in [0, 1)");
  if (dims.vocab == 0 || dims.encoder == 0 || dims.head == 0) {
    Fail(ErrorCode::kConfig, "model dimensions must be positive");
  }
  for (double lr : {adam.lr_encoder, adam.lr_heads, adam.lr_classifier}) {
    if (!(lr >= 0.0)) Fail(ErrorCode::kConfig, "learning rates must be >= 0");
  }
  for (std::size_t k : eval_ks) {
    if (k == 0) Fail(ErrorCode::kConfig, "evaluation k must be >= 1");
  }
  loss.Validate();
}

std::string EpochRecordJson(const EpochRecord& r, bool include_timing) {
  nlohmann::ordered_json j;
  j["epoch"] = r.epoch;
  j["batches"] = r.batches;
  j["refreshed"] = r.refreshed;
  j["de_q2l"] = r.loss.de_q2l;
  j["de_l2q"] = r.loss.de_l2q;
  j["clf_q2l"] = r.loss.clf_q2l;
  j["clf_l2q"] = r.loss.clf_l2q;
  j["de"] = r.loss.de;
  j["clf"] = r.loss.clf;
  j["total"] = r.loss.total;
  if (include_timing) j["seconds"] = r.seconds;
  if (!r.metrics.empty()) {
    nlohmann::ordered_json m;
    for (const auto& [k, v] : r.metrics) m[k] = v;
    j["metrics"] = m;
  }
  return j.dump();
}

BatchResult ComputeBatchLoss(const ModelParams& params, const std::vector<SparseVector>& query_features,
                             const std::vector<SparseVector>& label_features, const CollatedBatch& batch,
                             const LossConfig& cfg, std::uint64_t seed, std::int64_t epoch,
                             std::size_t batch_index, Mode mode) {
  const std::size_t d = params.dims.head;
  const std::size_t nq = batch.queries.size();
  const std::size_t nl = batch.de.labels.size();
  const auto e = static_cast<std::uint64_t>(epoch);

  ForwardTrace trace;
  trace.items.reserve(nq + nl);
  for (QueryId q : batch.queries) {
    Rng rng = Rng::Stream(seed, {e, batch_index, q, kQueryDropoutStream});
    trace.items.push_back(ForwardItem(params, query_features.at(q), mode, true, &rng));
  }
  for (LabelId l : batch.de.labels) {
    Rng rng = Rng::Stream(seed, {e, batch_index, l, kLabelDropoutStream});
    trace.items.push_back(ForwardItem(params, label_features.at(l), mode, false, &rng));
  }

  Matrix query_de(nq, d), query_clf(nq, d), label_de(nl, d), psi(batch.clf.labels.size(), d);
  for (std::size_t i = 0; i < nq; ++i) {
    CopyRow(trace.items[i].de.output, query_de.row(i));
    CopyRow(trace.items[i].clf->output, query_clf.row(i));
  }
  for (std::size_t j = 0; j < nl; ++j) CopyRow(trace.items[nq + j].de.output, label_de.row(j));
  for (std::size_t j = 0; j < batch.clf.labels.size(); ++j) {
    CopyRow(params.classifiers.row(batch.clf.labels[j]), psi.row(j));
  }

  const SymmetricLoss de = DeLoss(query_de, label_de, IndexPool(batch.queries, batch.de), cfg);
  const SymmetricLoss clf = ClfLoss(query_clf, psi, IndexPool(batch.queries, batch.clf), cfg);

  BatchResult out;
  out.loss.de_q2l = de.q2l;
  out.loss.de_l2q = de.l2q;
  out.loss.clf_q2l = clf.q2l;
  out.loss.clf_l2q = clf.l2q;
  out.loss.de = de.value;
  out.loss.clf = clf.value;
  out.loss.total = TotalLoss(de.value, clf.value, cfg.lambda);

  const double w_de = cfg.lambda;
  const double w_clf = 1.0 - cfg.lambda;
  HeadGradients upstream;
  upstream.de.resize(nq + nl);
  upstream.clf.resize(nq + nl);
  for (std::size_t i = 0; i < nq; ++i) {
    upstream.de[i] = ScaledRow(de.query_grad.row(i), w_de);
    upstream.clf[i] = ScaledRow(clf.query_grad.row(i), w_clf);
  }
  for (std::size_t j = 0; j < nl; ++j) upstream.de[nq + j] = ScaledRow(de.label_grad.row(j), w_de);
  for (std::size_t j = 0; j < batch.clf.labels.size(); ++j) {
    upstream.classifier_rows[batch.clf.labels[j]] = ScaledRow(clf.label_grad.row(j), w_clf);
  }
  out.grads = Gradients::Zeros(params.dims);
  Backward(params, trace, upstream, out.grads);
  return out;
}

std::map<std::string, double> EvaluateModel(const ModelParams& params, const Dataset& eval_dataset,
                                            const Dataset& train_dataset, const std::vector<std::size_t>& ks,
                                            const std::vector<IndexMode>& modes, double propensity_a,
                                            double propensity_b) {
  std::size_t max_k = 1;
  for (std::size_t k : ks) max_k = std::max(max_k, k);
  const auto props = Propensities(train_dataset.label_frequencies(), train_dataset.num_instances(),
                                  propensity_a, propensity_b);
  std::map<std::string, double> out;
  for (IndexMode mode : modes) {
    const LabelIndex index = BuildIndex(params, eval_dataset, mode);
    const auto preds = Predict(index, params, eval_dataset.instance_texts(), max_k);
    const MetricsReport report = Evaluate(preds, eval_dataset.all_positives(), props, ks);
    for (const auto& [name, value] : report.AsMap()) out[std::string(IndexModeName(mode)) + "/" + name] = value;
  }
  return out;
}

TrainResult Train(const Dataset& dataset, const TrainConfig& config, const TrainHooks& hooks,
                  const Dataset* eval_dataset) {
  config.Validate();
  if (dataset.num_instances() == 0 || dataset.num_labels() == 0) {
    Fail(ErrorCode::kConfig, "cannot train on an empty dataset");
  }
  ModelDims dims = config.dims;
  dims.labels = dataset.num_labels();

  TrainResult result;
  ModelParams& params = result.params;
  params = ModelParams::Init(dims, config.dropout, config.seed);
  if (config.init_classifiers_from_labels) {
    params.classifiers = EmbedTexts(params, dataset.label_texts(), Head::kDe);
  }
  OptimizerState state = OptimizerState::ForParams(params);

  const Vocabulary vocab(dims.vocab);
  std::vector<SparseVector> query_features(dataset.num_instances());
  std::vector<SparseVector> label_features(dataset.num_labels());
  for (std::size_t i = 0; i < query_features.size(); ++i) {
    query_features[i] = vocab.Featurize(dataset.instance_texts()[i]);
  }
  for (std::size_t l = 0; l < label_features.size(); ++l) {
    label_features[l] = vocab.Featurize(dataset.label_texts()[l]);
  }

  const std::size_t num_batches = (dataset.num_instances() + config.batch_size - 1) / config.batch_size;
  BatchPlan plan;
  HardNegativeCache cache;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    EpochRecord record;
    record.epoch = epoch;
    const auto e = static_cast<std::int64_t>(epoch);

    if (epoch % config.refresh_interval == 0) {
      const Matrix query_emb = EmbedTexts(params, dataset.instance_texts(), Head::kDe);
      const Matrix label_emb = EmbedTexts(params, dataset.label_texts(), Head::kDe);
      plan = ClusterQueries(query_emb, num_batches, config.seed, e);
      RefreshOptions ro;
      ro.cache_size = config.eta > 0 ? config.EffectiveCacheSize() : 0;
      ro.exactness = config.negative_search;
      ro.seed = config.seed;
      ro.epoch = e;
      cache = RefreshCache(query_emb, label_emb, dataset, ro);
      record.refreshed = true;
      if (hooks.on_refresh) hooks.on_refresh(plan, cache);
    }

    for (std::size_t b = 0; b < plan.batches.size(); ++b) {
      CollateOptions co;
      co.beta = config.beta;
      co.eta = config.eta;
      co.beta_clf = config.beta_clf;
      co.seed = config.seed;
      co.epoch = e;
      co.batch_index = b;
      const CollatedBatch batch = CollateBatch(plan.batches[b], dataset, cache, co);
      BatchResult step = ComputeBatchLoss(params, query_features, label_features, batch, config.loss,
                                          config.seed, e, b, Mode::kTrain);
      if (!Finite(step.loss)) {
        Fail(ErrorCode::kNumeric, "non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                      std::to_string(b));
      }
      try {
        OptimizerStep(params, step.grads, state, config.adam);
      } catch (const Error& err) {
        Fail(err.code(), std::string(err.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                             std::to_string(b) + ")");
      }
      LossBreakdown& acc = record.loss;
      acc.de_q2l += step.loss.de_q2l;
      acc.de_l2q += step.loss.de_l2q;
      acc.clf_q2l += step.loss.clf_q2l;
      acc.clf_l2q += step.loss.clf_l2q;
      acc.de += step.loss.de;
      acc.clf += step.loss.clf;
      acc.total += step.loss.total;
      ++record.batches;
    }
    if (record.batches > 0) {
      const double inv = 1.0 / static_cast<double>(record.batches);
      LossBreakdown& acc = record.loss;
      for (double* v : {&acc.de_q2l, &acc.de_l2q, &acc.clf_q2l, &acc.clf_l2q, &acc.de, &acc.clf, &acc.total}) {
        *v *= inv;
      }
    }

    const bool last = epoch + 1 == config.epochs;
    if (config.eval_every > 0 && ((epoch + 1) % config.eval_every == 0 || last)) {
      const Dataset& eval = eval_dataset ? *eval_dataset : dataset;
      record.metrics = EvaluateModel(params, eval, dataset, config.eval_ks, config.eval_modes,
                                     config.propensity_a, config.propensity_b);
    }
    record.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.report.epochs.push_back(record);
    if (hooks.on_epoch) hooks.on_epoch(record);
    if (hooks.on_checkpoint && ((epoch + 1) % config.refresh_interval == 0 || last)) {
      hooks.on_checkpoint(params, epoch + 1);
    }
  }
  return result;
}

}  // namespace unidec
