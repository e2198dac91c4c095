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

// Negative-mining-aware batching: similar queries are clustered into the
// same batch so that their sampled labels act as hard in-batch negatives for
// each other, and each batch's label pool is collated with exact bookkeeping
// of which pool labels are positives of which queries.

#ifndef UNIDEC_BATCHER_HPP_
#define UNIDEC_BATCHER_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <vector>

#include "unidec/common.hpp"
#include "unidec/dataset.hpp"
#include "unidec/negatives.hpp"

namespace unidec {

struct BatchPlan {
  std::vector<std::vector<QueryId>> batches;  // each sorted ascending
  std::int64_t epoch = -1;
};

// Recursive balanced spherical 2-means over unit-norm rows. Produces
// min(num_batches, N) batches whose sizes differ by at most one.
BatchPlan ClusterQueries(const Matrix& embeddings, std::size_t num_batches, std::uint64_t seed,
                         std::int64_t epoch = 0);

// Uniform sample of min(beta, |positives|) labels without replacement.
LabelSet SamplePositives(const LabelSet& positives, std::size_t beta, Rng& rng);

// A label pool together with its positive incidence in both directions.
struct LabelPool {
  LabelSet labels;                           // sorted, unique
  std::vector<LabelSet> query_positives;     // P^B: per batch query, P_i ∩ pool
  std::vector<std::vector<QueryId>> label_positives;  // P^L: per pool label, queries having it
};

// Incidence of `pool` against the full ground truth of `queries`.
LabelPool BuildPool(const std::vector<QueryId>& queries, LabelSet pool, const Dataset& dataset);

struct CollatedBatch {
  std::vector<QueryId> queries;
  std::vector<LabelSet> sampled_positives;       // per query, ⊆ P_i, size <= beta
  std::vector<LabelSet> sampled_negatives;       // per query, disjoint from P_i, size <= eta
  std::vector<LabelSet> extra_clf_positives;     // per query, classifier-only extras
  LabelPool de;   // pool shared by both heads
  LabelPool clf;  // de pool plus classifier extras (equal to `de` when none)
};

struct CollateOptions {
  std::size_t beta = 3;
  std::size_t eta = 6;
  std::size_t beta_clf = 0;
  std::uint64_t seed = 0;
  std::int64_t epoch = 0;
  std::size_t batch_index = 0;
};

// Draws P̂_i, Ĥ_i and classifier extras from per-(epoch, batch, query)
// random streams, then assembles the pools.
CollatedBatch CollateBatch(const std::vector<QueryId>& queries, const Dataset& dataset,
                           const HardNegativeCache& cache, const CollateOptions& options);

// Pool assembly from explicit samples.
CollatedBatch AssembleBatch(const std::vector<QueryId>& queries, std::vector<LabelSet> sampled_positives,
                            std::vector<LabelSet> sampled_negatives,
                            std::vector<LabelSet> extra_clf_positives, const Dataset& dataset);

struct BatchSummary {
  std::size_t batch_size = 0;
  double mean_pb = 0.0;
  std::size_t pool_size = 0;
  // Positives in P^B_i that the query did not sample itself, summed over queries.
  std::size_t overlap = 0;
};

struct BatchStats {
  std::size_t beta = 0;
  std::size_t eta = 0;
  std::size_t target_batch_size = 0;
  std::vector<BatchSummary> batches;
  double mean_pb = 0.0;
  double p50_pb = 0.0;
  double p95_pb = 0.0;
  double mean_pool = 0.0;
};

struct BatchStatsOptions {
  std::size_t beta = 3;
  std::size_t eta = 0;
  std::size_t num_batches = 1;
  std::size_t cache_size = 0;  // 0 means eta * 5
  std::uint64_t seed = 0;
};

// One clustering + collation pass over the whole dataset. Percentiles are
// nearest-rank over all queries' |P^B_i|.
BatchStats ComputeBatchStats(const Dataset& dataset, const Matrix& query_embeddings,
                             const Matrix& label_embeddings, const BatchStatsOptions& options);

// "beta,eta,batch_size,mean_pb,p50_pb,p95_pb,mean_pool"
void WriteBatchStatsHeader(std::ostream& out);
void WriteBatchStatsRow(const BatchStats& stats, std::ostream& out);

}  // namespace unidec

#endif  // UNIDEC_BATCHER_HPP_
