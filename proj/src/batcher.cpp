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

#include "unidec/batcher.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>

namespace unidec {

namespace {

constexpr int kLloydIterations = 10;

// Stream tags for the per-query samplers.
constexpr std::uint64_t kPositiveStream = 1;
constexpr std::uint64_t kNegativeStream = 2;
constexpr std::uint64_t kExtraStream = 3;

std::vector<double> NormalizedMean(const Matrix& emb, const std::vector<QueryId>& ids,
                                   std::size_t begin, std::size_t end) {
  std::vector<double> c(emb.cols(), 0.0);
  for (std::size_t j = begin; j < end; ++j) {
    const auto row = emb.row(ids[j]);
    for (std::size_t k = 0; k < c.size(); ++k) c[k] += row[k];
  }
  const double n = Norm(c);
  if (n > 0.0) {
    for (double& v : c) v /= n;
  }
  return c;
}

class BalancedSplitter {
 public:
  BalancedSplitter(const Matrix& emb, Rng& rng) : emb_(emb), rng_(rng) {}

  void Split(std::vector<QueryId> ids, std::size_t k, std::vector<std::vector<QueryId>>& out) {
    if (k <= 1 || ids.size() <= 1) {
      std::sort(ids.begin(), ids.end());
      out.push_back(std::move(ids));
      return;
    }
    // Children receive ceil(k/2) and floor(k/2) batches; sizes are chosen so
    // that every leaf ends up with floor(n/k) or ceil(n/k) points.
    const std::size_t n = ids.size();
    const std::size_t k1 = (k + 1) / 2;
    const std::size_t q = n / k, r = n % k;
    const std::size_t n1 = k1 * q + std::min(r, k1);

    TwoMeans(ids, n1);
    std::vector<QueryId> left(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n1));
    std::vector<QueryId> right(ids.begin() + static_cast<std::ptrdiff_t>(n1), ids.end());
    Split(std::move(left), k1, out);
    Split(std::move(right), k - k1, out);
  }

 private:
  // Reorders `ids` so the first `n1` form one cluster.
  void TwoMeans(std::vector<QueryId>& ids, std::size_t n1) {
    const QueryId first = ids[rng_.Below(ids.size())];
    QueryId far = ids.front();
    double far_score = INFINITY;
    for (QueryId id : ids) {
      const double s = Dot(emb_.row(first), emb_.row(id));
      if (s < far_score || (s == far_score && id < far)) {
        far_score = s;
        far = id;
      }
    }
    std::vector<double> c1(emb_.row(first).begin(), emb_.row(first).end());
    std::vector<double> c2(emb_.row(far).begin(), emb_.row(far).end());

    std::vector<std::pair<double, QueryId>> margin(ids.size());
    for (int it = 0; it < kLloydIterations; ++it) {
      for (std::size_t j = 0; j < ids.size(); ++j) {
        const auto x = emb_.row(ids[j]);
        margin[j] = {Dot(x, c1) - Dot(x, c2), ids[j]};
      }
      std::sort(margin.begin(), margin.end(), [](const auto& a, const auto& b) {
        return a.first > b.first || (a.first == b.first && a.second < b.second);
      });
      for (std::size_t j = 0; j < ids.size(); ++j) ids[j] = margin[j].second;
      auto m1 = NormalizedMean(emb_, ids, 0, n1);
      auto m2 = NormalizedMean(emb_, ids, n1, ids.size());
      if (Norm(m1) > 0.0) c1 = std::move(m1);
      if (Norm(m2) > 0.0) c2 = std::move(m2);
    }
  }

  const Matrix& emb_;
  Rng& rng_;
};

LabelSet SetUnion(const LabelSet& a, const LabelSet& b) {
  LabelSet out;
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

LabelSet SetDifference(const LabelSet& a, const LabelSet& b) {
  LabelSet out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return out;
}

double NearestRank(std::vector<double> values, double pct) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  auto rank = static_cast<std::size_t>(std::ceil(pct / 100.0 * static_cast<double>(values.size())));
  rank = std::clamp<std::size_t>(rank, 1, values.size());
  return values[rank - 1];
}

}  // namespace

BatchPlan ClusterQueries(const Matrix& embeddings, std::size_t num_batches, std::uint64_t seed,
                         std::int64_t epoch) {
  BatchPlan plan;
  plan.epoch = epoch;
  const std::size_t n = embeddings.rows();
  if (n == 0) return plan;
  num_batches = std::clamp<std::size_t>(num_batches, 1, n);

  std::vector<QueryId> ids(n);
  for (QueryId i = 0; i < n; ++i) ids[i] = i;
  if (num_batches == n) {
    for (QueryId i = 0; i < n; ++i) plan.batches.push_back({i});
    return plan;
  }
  Rng rng = Rng::Stream(seed, {static_cast<std::uint64_t>(epoch), 0xc1u});
  BalancedSplitter(embeddings, rng).Split(std::move(ids), num_batches, plan.batches);
  return plan;
}

LabelSet SamplePositives(const LabelSet& positives, std::size_t beta, Rng& rng) {
  return SampleWithoutReplacement(positives, beta, rng);
}

LabelPool BuildPool(const std::vector<QueryId>& queries, LabelSet pool, const Dataset& dataset) {
  LabelPool out;
  out.labels = std::move(pool);
  out.query_positives.resize(queries.size());
  out.label_positives.resize(out.labels.size());
  for (std::size_t qi = 0; qi < queries.size(); ++qi) {
    const LabelSet& truth = dataset.positives(queries[qi]);
    std::set_intersection(truth.begin(), truth.end(), out.labels.begin(), out.labels.end(),
                          std::back_inserter(out.query_positives[qi]));
    for (LabelId l : out.query_positives[qi]) {
      const auto pos = std::lower_bound(out.labels.begin(), out.labels.end(), l) - out.labels.begin();
      out.label_positives[static_cast<std::size_t>(pos)].push_back(queries[qi]);
    }
  }
  return out;
}

CollatedBatch AssembleBatch(const std::vector<QueryId>& queries, std::vector<LabelSet> sampled_positives,
                            std::vector<LabelSet> sampled_negatives,
                            std::vector<LabelSet> extra_clf_positives, const Dataset& dataset) {
  const std::size_t m = queries.size();
  if (sampled_positives.size() != m || sampled_negatives.size() != m) {
    Fail(ErrorCode::kInvalidArgument, "per-query sample lists must match the batch size");
  }
  if (extra_clf_positives.empty()) extra_clf_positives.resize(m);
  if (extra_clf_positives.size() != m) {
    Fail(ErrorCode::kInvalidArgument, "classifier extras must match the batch size");
  }
  CollatedBatch batch;
  batch.queries = queries;
  LabelSet pool;
  LabelSet clf_pool;
  for (std::size_t qi = 0; qi < m; ++qi) {
    pool = SetUnion(pool, SetUnion(sampled_positives[qi], sampled_negatives[qi]));
    clf_pool = SetUnion(clf_pool, extra_clf_positives[qi]);
  }
  clf_pool = SetUnion(clf_pool, pool);
  const bool has_extras = clf_pool.size() != pool.size();
  batch.de = BuildPool(queries, std::move(pool), dataset);
  batch.clf = has_extras ? BuildPool(queries, std::move(clf_pool), dataset) : batch.de;
  batch.sampled_positives = std::move(sampled_positives);
  batch.sampled_negatives = std::move(sampled_negatives);
  batch.extra_clf_positives = std::move(extra_clf_positives);
  return batch;
}

CollatedBatch CollateBatch(const std::vector<QueryId>& queries, const Dataset& dataset,
                           const HardNegativeCache& cache, const CollateOptions& options) {
  if (options.beta == 0) Fail(ErrorCode::kConfig, "beta must be >= 1");
  if (options.eta > 0 && cache.lists.size() != dataset.num_instances()) {
    Fail(ErrorCode::kInvalidArgument, "hard-negative cache is not populated for this dataset");
  }
  const std::size_t m = queries.size();
  std::vector<LabelSet> pos(m), neg(m), extra(m);
  const auto epoch = static_cast<std::uint64_t>(options.epoch);
  for (std::size_t qi = 0; qi < m; ++qi) {
    const QueryId q = queries[qi];
    const LabelSet& truth = dataset.positives(q);
    Rng pos_rng = Rng::Stream(options.seed, {epoch, options.batch_index, q, kPositiveStream});
    pos[qi] = SamplePositives(truth, options.beta, pos_rng);
    if (options.eta > 0) {
      Rng neg_rng = Rng::Stream(options.seed, {epoch, options.batch_index, q, kNegativeStream});
      // Sample from H_i - P_i; the cache already excludes positives but a
      // loaded or stale cache might not.
      LabelSet candidates(cache.lists[q].begin(), cache.lists[q].end());
      std::sort(candidates.begin(), candidates.end());
      candidates = SetDifference(candidates, truth);
      neg[qi] = SampleWithoutReplacement(candidates, options.eta, neg_rng);
    }
    if (options.beta_clf > 0) {
      Rng extra_rng = Rng::Stream(options.seed, {epoch, options.batch_index, q, kExtraStream});
      extra[qi] = SampleWithoutReplacement(SetDifference(truth, pos[qi]), options.beta_clf, extra_rng);
    }
  }
  return AssembleBatch(queries, std::move(pos), std::move(neg), std::move(extra), dataset);
}

BatchStats ComputeBatchStats(const Dataset& dataset, const Matrix& query_embeddings,
                             const Matrix& label_embeddings, const BatchStatsOptions& options) {
  BatchStats stats;
  stats.beta = options.beta;
  stats.eta = options.eta;
  const std::size_t n = dataset.num_instances();
  const std::size_t nb = std::clamp<std::size_t>(options.num_batches, 1, std::max<std::size_t>(n, 1));
  stats.target_batch_size = (n + nb - 1) / nb;

  HardNegativeCache cache;
  if (options.eta > 0) {
    RefreshOptions ro;
    ro.cache_size = options.cache_size ? options.cache_size : options.eta * 5;
    ro.seed = options.seed;
    cache = RefreshCache(query_embeddings, label_embeddings, dataset, ro);
  }
  const BatchPlan plan = ClusterQueries(query_embeddings, nb, options.seed, 0);

  std::vector<double> pb_sizes;
  pb_sizes.reserve(n);
  double pool_total = 0.0;
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    CollateOptions co;
    co.beta = options.beta;
    co.eta = options.eta;
    co.seed = options.seed;
    co.batch_index = b;
    const CollatedBatch batch = CollateBatch(plan.batches[b], dataset, cache, co);
    BatchSummary s;
    s.batch_size = batch.queries.size();
    s.pool_size = batch.de.labels.size();
    double pb_total = 0.0;
    for (std::size_t qi = 0; qi < batch.queries.size(); ++qi) {
      const auto pb = static_cast<double>(batch.de.query_positives[qi].size());
      pb_total += pb;
      pb_sizes.push_back(pb);
      s.overlap += batch.de.query_positives[qi].size() - batch.sampled_positives[qi].size();
    }
    s.mean_pb = s.batch_size ? pb_total / static_cast<double>(s.batch_size) : 0.0;
    pool_total += static_cast<double>(s.pool_size);
    stats.batches.push_back(s);
  }
  double sum = 0.0;
  for (double v : pb_sizes) sum += v;
  stats.mean_pb = pb_sizes.empty() ? 0.0 : sum / static_cast<double>(pb_sizes.size());
  stats.p50_pb = NearestRank(pb_sizes, 50.0);
  stats.p95_pb = NearestRank(pb_sizes, 95.0);
  stats.mean_pool = stats.batches.empty() ? 0.0 : pool_total / static_cast<double>(stats.batches.size());
  return stats;
}

void WriteBatchStatsHeader(std::ostream& out) {
  out << "beta,eta,batch_size,mean_pb,p50_pb,p95_pb,mean_pool\n";
}

void WriteBatchStatsRow(const BatchStats& s, std::ostream& out) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "%zu,%zu,%zu,%.6f,%.6f,%.6f,%.6f\n", s.beta, s.eta,
                s.target_batch_size, s.mean_pb, s.p50_pb, s.p95_pb, s.mean_pool);
  out << buf;
}

}  // namespace unidec
