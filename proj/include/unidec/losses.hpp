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

// Training objectives. Every multi-class loss here has the same shape: each
// anchor row is scored against every target row, a temperature-scaled softmax
// runs over the targets, and the negative log-likelihood of the anchor's
// positive targets is averaged (pal_n) or summed (pal).

#ifndef UNIDEC_LOSSES_HPP_
#define UNIDEC_LOSSES_HPP_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "unidec/batcher.hpp"
#include "unidec/common.hpp"

namespace unidec {

enum class Reduction { kPalN, kPal };
enum class BatchReduction { kMean, kSum };

Reduction ParseReduction(std::string_view name);
BatchReduction ParseBatchReduction(std::string_view name);

struct LossConfig {
  double temperature = 0.05;
  double clf_temperature = 0.0;  // 0 shares `temperature`
  double lambda = 0.5;           // DE vs classifier
  double lambda_de = 0.5;        // q2l vs l2q inside the DE loss
  double lambda_clf = 0.5;       // q2l vs l2q inside the classifier loss
  Reduction reduction = Reduction::kPalN;
  BatchReduction batch_reduction = BatchReduction::kMean;
  double triplet_margin = 0.3;

  double ClassifierTemperature() const { return clf_temperature > 0.0 ? clf_temperature : temperature; }
  // Throws Error(kConfig).
  void Validate() const;
};

// Positive target indices per anchor (sorted). Anchors with no positives
// contribute neither loss nor gradient.
using PositiveIndex = std::vector<std::vector<std::uint32_t>>;

struct LossResult {
  double value = 0.0;
  Matrix anchor_grad;  // same shape as anchors
  Matrix target_grad;  // same shape as targets
  std::size_t active_anchors = 0;
};

// Shared PSL kernel. With kMean the value is the mean over active anchors.
LossResult PslLoss(const Matrix& anchors, const Matrix& targets, const PositiveIndex& positives,
                   double temperature, Reduction reduction,
                   BatchReduction batch_reduction = BatchReduction::kMean);

// Query-to-label: anchors are queries, the softmax runs over the label pool.
inline LossResult PslQ2L(const Matrix& queries, const Matrix& labels, const PositiveIndex& pb,
                         double temperature, Reduction reduction,
                         BatchReduction batch_reduction = BatchReduction::kMean) {
  return PslLoss(queries, labels, pb, temperature, reduction, batch_reduction);
}

// Label-to-query: anchors are pool labels, the softmax runs over batch queries.
inline LossResult PslL2Q(const Matrix& labels, const Matrix& queries, const PositiveIndex& pl,
                         double temperature, Reduction reduction,
                         BatchReduction batch_reduction = BatchReduction::kMean) {
  return PslLoss(labels, queries, pl, temperature, reduction, batch_reduction);
}

// Positions of P^B (into pool.labels) and P^L (into `queries`).
struct PoolIndex {
  PositiveIndex query_to_label;
  PositiveIndex label_to_query;
};
PoolIndex IndexPool(const std::vector<QueryId>& queries, const LabelPool& pool);

struct SymmetricLoss {
  double q2l = 0.0;
  double l2q = 0.0;
  double value = 0.0;   // mix * q2l + (1 - mix) * l2q
  Matrix query_grad;    // d value / d query rows
  Matrix label_grad;    // d value / d label rows
};

// mix * L_q2l + (1 - mix) * L_l2q over one batch.
SymmetricLoss SymmetricPsl(const Matrix& queries, const Matrix& labels, const PoolIndex& index,
                           double mix, double temperature, Reduction reduction,
                           BatchReduction batch_reduction);

// DE loss: unit query and label embeddings, mixed with lambda_de.
SymmetricLoss DeLoss(const Matrix& query_de, const Matrix& label_de, const PoolIndex& index,
                     const LossConfig& cfg);

// Classifier loss: unnormalized classifier-head outputs against classifier
// rows of the pool, mixed with lambda_clf.
SymmetricLoss ClfLoss(const Matrix& query_clf, const Matrix& classifier_rows, const PoolIndex& index,
                      const LossConfig& cfg);

// lambda * de + (1 - lambda) * clf
double TotalLoss(double de, double clf, double lambda);

// Sum over (p, n) pairs of max(0, <a, n> - <a, p> + margin).
double TripletLoss(std::span<const double> anchor, const Matrix& positives, const Matrix& negatives,
                   double margin);

// Sum over labels of binary cross-entropy on sigmoid(score).
double OvaBceLoss(std::span<const double> scores, std::span<const int> targets);

}  // namespace unidec

#endif  // UNIDEC_LOSSES_HPP_
