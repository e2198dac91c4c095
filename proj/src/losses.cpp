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

#include "unidec/losses.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace unidec {

Reduction ParseReduction(std::string_view name) {
  if (name == "pal_n") return Reduction::kPalN;
  if (name == "pal") return Reduction::kPal;
  Fail(ErrorCode::kConfig, "unknown reduction '" + std::string(name) + "' (pal_n|pal)");
}

BatchReduction ParseBatchReduction(std::string_view name) {
  if (name == "mean") return BatchReduction::kMean;
  if (name == "sum") return BatchReduction::kSum;
  Fail(ErrorCode::kConfig, "unknown batch reduction '" + std::string(name) + "' (mean|sum)");
}

void LossConfig::Validate() const {
  if (!(temperature > 0.0)) Fail(ErrorCode::kConfig, "temperature must be > 0");
  if (clf_temperature < 0.0) Fail(ErrorCode::kConfig, "clf_temperature must be >= 0");
  for (double w : {lambda, lambda_de, lambda_clf}) {
    if (!(w >= 0.0 && w <= 1.0)) Fail(ErrorCode::kConfig, "mixing weights must lie in [0, 1]");
  }
  if (triplet_margin < 0.0) Fail(ErrorCode::kConfig, "triplet margin must be >= 0");
}

LossResult PslLoss(const Matrix& anchors, const Matrix& targets, const PositiveIndex& positives,
                   double temperature, Reduction reduction, BatchReduction batch_reduction) {
  if (!(temperature > 0.0)) Fail(ErrorCode::kConfig, "temperature must be > 0");
  if (positives.size() != anchors.rows()) {
    Fail(ErrorCode::kInvalidArgument, "positive index must have one entry per anchor");
  }
  if (anchors.cols() != targets.cols() && anchors.rows() > 0 && targets.rows() > 0) {
    Fail(ErrorCode::kInvalidArgument, "anchor and target widths differ");
  }
  LossResult res;
  res.anchor_grad = Matrix(anchors.rows(), anchors.cols());
  res.target_grad = Matrix(targets.rows(), targets.cols());
  for (const auto& p : positives) {
    if (!p.empty()) ++res.active_anchors;
  }
  if (res.active_anchors == 0) return res;

  const double batch_scale =
      batch_reduction == BatchReduction::kMean ? 1.0 / static_cast<double>(res.active_anchors) : 1.0;
  const std::size_t nt = targets.rows();
  std::vector<double> logits(nt), dlogits(nt);

  for (std::size_t a = 0; a < anchors.rows(); ++a) {
    const auto& pos = positives[a];
    if (pos.empty()) continue;
    const auto anchor = anchors.row(a);
    double max_logit = -INFINITY;
    for (std::size_t t = 0; t < nt; ++t) {
      logits[t] = Dot(anchor, targets.row(t)) / temperature;
      max_logit = std::max(max_logit, logits[t]);
    }
    double sum = 0.0;
    for (std::size_t t = 0; t < nt; ++t) sum += std::exp(logits[t] - max_logit);
    const double lse = max_logit + std::log(sum);

    const double weight = reduction == Reduction::kPalN ? 1.0 / static_cast<double>(pos.size()) : 1.0;
    double anchor_loss = 0.0;
    for (std::uint32_t p : pos) {
      if (p >= nt) Fail(ErrorCode::kInvalidArgument, "positive index out of range");
      anchor_loss += lse - logits[p];
    }
    res.value += batch_scale * weight * anchor_loss;

    // d/dlogit_t = scale * weight * (|P| softmax_t - [t in P])
    const double g = batch_scale * weight;
    const auto npos = static_cast<double>(pos.size());
    for (std::size_t t = 0; t < nt; ++t) dlogits[t] = g * npos * std::exp(logits[t] - lse);
    for (std::uint32_t p : pos) dlogits[p] -= g;

    auto ga = res.anchor_grad.row(a);
    for (std::size_t t = 0; t < nt; ++t) {
      const double d = dlogits[t] / temperature;
      if (d == 0.0) continue;
      const auto target = targets.row(t);
      auto gt = res.target_grad.row(t);
      for (std::size_t k = 0; k < ga.size(); ++k) {
        ga[k] += d * target[k];
        gt[k] += d * anchor[k];
      }
    }
  }
  return res;
}

PoolIndex IndexPool(const std::vector<QueryId>& queries, const LabelPool& pool) {
  PoolIndex index;
  index.query_to_label.resize(pool.query_positives.size());
  for (std::size_t qi = 0; qi < pool.query_positives.size(); ++qi) {
    for (LabelId l : pool.query_positives[qi]) {
      const auto it = std::lower_bound(pool.labels.begin(), pool.labels.end(), l);
      index.query_to_label[qi].push_back(static_cast<std::uint32_t>(it - pool.labels.begin()));
    }
  }
  std::vector<std::pair<QueryId, std::uint32_t>> order(queries.size());
  for (std::uint32_t qi = 0; qi < queries.size(); ++qi) order[qi] = {queries[qi], qi};
  std::sort(order.begin(), order.end());
  index.label_to_query.resize(pool.label_positives.size());
  for (std::size_t li = 0; li < pool.label_positives.size(); ++li) {
    auto& dst = index.label_to_query[li];
    for (QueryId q : pool.label_positives[li]) {
      const auto it = std::lower_bound(order.begin(), order.end(), std::make_pair(q, std::uint32_t{0}));
      if (it == order.end() || it->first != q) Fail(ErrorCode::kInvalidArgument, "P^L names a query outside the batch");
      dst.push_back(it->second);
    }
    std::sort(dst.begin(), dst.end());
  }
  return index;
}

SymmetricLoss SymmetricPsl(const Matrix& queries, const Matrix& labels, const PoolIndex& index,
                           double mix, double temperature, Reduction reduction,
                           BatchReduction batch_reduction) {
  const LossResult q2l = PslLoss(queries, labels, index.query_to_label, temperature, reduction, batch_reduction);
  const LossResult l2q = PslLoss(labels, queries, index.label_to_query, temperature, reduction, batch_reduction);
  SymmetricLoss out;
  out.q2l = q2l.value;
  out.l2q = l2q.value;
  out.value = mix * q2l.value + (1.0 - mix) * l2q.value;
  out.query_grad = Matrix(queries.rows(), queries.cols());
  out.label_grad = Matrix(labels.rows(), labels.cols());
  auto& qg = out.query_grad.data();
  auto& lg = out.label_grad.data();
  for (std::size_t k = 0; k < qg.size(); ++k) {
    qg[k] = mix * q2l.anchor_grad.data()[k] + (1.0 - mix) * l2q.target_grad.data()[k];
  }
  for (std::size_t k = 0; k < lg.size(); ++k) {
    lg[k] = mix * q2l.target_grad.data()[k] + (1.0 - mix) * l2q.anchor_grad.data()[k];
  }
  return out;
}

SymmetricLoss DeLoss(const Matrix& query_de, const Matrix& label_de, const PoolIndex& index,
                     const LossConfig& cfg) {
  return SymmetricPsl(query_de, label_de, index, cfg.lambda_de, cfg.temperature, cfg.reduction,
                      cfg.batch_reduction);
}

SymmetricLoss ClfLoss(const Matrix& query_clf, const Matrix& classifier_rows, const PoolIndex& index,
                      const LossConfig& cfg) {
  return SymmetricPsl(query_clf, classifier_rows, index, cfg.lambda_clf, cfg.ClassifierTemperature(),
                      cfg.reduction, cfg.batch_reduction);
}

double TotalLoss(double de, double clf, double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) Fail(ErrorCode::kConfig, "lambda must lie in [0, 1]");
  return lambda * de + (1.0 - lambda) * clf;
}

double TripletLoss(std::span<const double> anchor, const Matrix& positives, const Matrix& negatives,
                   double margin) {
  if (margin < 0.0) Fail(ErrorCode::kConfig, "triplet margin must be >= 0");
  std::vector<double> neg_scores(negatives.rows());
  for (std::size_t n = 0; n < negatives.rows(); ++n) neg_scores[n] = Dot(anchor, negatives.row(n));
  double total = 0.0;
  for (std::size_t p = 0; p < positives.rows(); ++p) {
    const double sp = Dot(anchor, positives.row(p));
    for (double sn : neg_scores) total += std::max(0.0, sn - sp + margin);
  }
  return total;
}

double OvaBceLoss(std::span<const double> scores, std::span<const int> targets) {
  if (scores.size() != targets.size()) Fail(ErrorCode::kInvalidArgument, "scores/targets length mismatch");
  double total = 0.0;
  for (std::size_t l = 0; l < scores.size(); ++l) {
    const int y = targets[l];
    if (y != 0 && y != 1) Fail(ErrorCode::kInvalidArgument, "OvA targets must be 0 or 1");
    const double s = scores[l];
    // -[y log σ(s) + (1-y) log(1-σ(s))] = max(s,0) - y s + log1p(e^-|s|)
    total += std::max(s, 0.0) - y * s + std::log1p(std::exp(-std::abs(s)));
  }
  return total;
}

}  // namespace unidec
