#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "unidec/batcher.hpp"

using namespace unidec;

namespace {

Matrix Circle(const std::vector<double>& degrees) {
  Matrix m(degrees.size(), 2);
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    const double r = degrees[i] * std::numbers::pi / 180.0;
    m(i, 0) = std::cos(r);
    m(i, 1) = std::sin(r);
  }
  return m;
}

void CheckPartition(const BatchPlan& plan, std::size_t n, std::size_t expected_batches) {
  REQUIRE(plan.batches.size() == expected_batches);
  std::vector<int> seen(n, 0);
  std::size_t lo = n, hi = 0;
  for (const auto& b : plan.batches) {
    CHECK(std::is_sorted(b.begin(), b.end()));
    lo = std::min(lo, b.size());
    hi = std::max(hi, b.size());
    for (QueryId q : b) ++seen[q];
  }
  for (int s : seen) CHECK(s == 1);
  CHECK(hi - lo <= 1);
}

Dataset Named(std::vector<LabelSet> rows, std::size_t num_labels) {
  std::vector<std::string> texts(rows.size(), "q");
  std::vector<std::string> labels(num_labels);
  for (std::size_t l = 0; l < num_labels; ++l) labels[l] = "l" + std::to_string(l);
  return Dataset(texts, labels, std::move(rows), num_labels);
}

void CheckAgainstOracle(const CollatedBatch& b, const Dataset& ds) {
  const auto truth = ds.all_positives();
  std::vector<std::vector<std::uint32_t>> sampled, extra;
  for (std::size_t k = 0; k < b.queries.size(); ++k) {
    std::vector<std::uint32_t> s = b.sampled_positives[k];
    s.insert(s.end(), b.sampled_negatives[k].begin(), b.sampled_negatives[k].end());
    sampled.push_back(s);
    extra.emplace_back();
  }
  const auto de = oracle::Collate(b.queries, truth, sampled, extra);
  CHECK(std::vector<std::uint32_t>(de.pool.begin(), de.pool.end()) == b.de.labels);
  for (std::size_t k = 0; k < b.queries.size(); ++k) {
    CHECK(std::vector<std::uint32_t>(de.pb[k].begin(), de.pb[k].end()) == b.de.query_positives[k]);
  }
  for (std::size_t j = 0; j < b.de.labels.size(); ++j) {
    const auto& want = de.pl.at(b.de.labels[j]);
    CHECK(std::vector<std::uint32_t>(want.begin(), want.end()) == b.de.label_positives[j]);
  }
  // Classifier pool: the DE pool plus extras.
  const auto clf = oracle::Collate(b.queries, truth, sampled, b.extra_clf_positives);
  CHECK(std::vector<std::uint32_t>(clf.pool.begin(), clf.pool.end()) == b.clf.labels);
  for (std::size_t k = 0; k < b.queries.size(); ++k) {
    CHECK(std::vector<std::uint32_t>(clf.pb[k].begin(), clf.pb[k].end()) == b.clf.query_positives[k]);
  }
}

}  // namespace

TEST_CASE("clustering limiting cases") {
  std::mt19937_64 gen(1);
  Matrix emb = testutil::RandomMatrix(9, 3, gen);
  testutil::NormalizeRows(emb);
  BatchPlan singles = ClusterQueries(emb, 9, 0);
  CheckPartition(singles, 9, 9);
  for (const auto& b : singles.batches) CHECK(b.size() == 1);
  BatchPlan all = ClusterQueries(emb, 1, 0);
  CheckPartition(all, 9, 1);
  CheckPartition(ClusterQueries(emb, 50, 0), 9, 9);  // more batches than points
}

TEST_CASE("clustering groups nearby points on the circle") {
  // Brute force over balanced 2-partitions: {0,1} | {2,3} maximizes the
  // within-cluster cosine sum.
  const Matrix emb = Circle({0.0, 1.0, 180.0, 181.0});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    BatchPlan plan = ClusterQueries(emb, 2, seed);
    REQUIRE(plan.batches.size() == 2);
    auto a = plan.batches[0], b = plan.batches[1];
    if (a.front() != 0) std::swap(a, b);
    CHECK(a == std::vector<QueryId>{0, 1});
    CHECK(b == std::vector<QueryId>{2, 3});
  }
  // Shuffled input order gives the same grouping.
  const Matrix mixed = Circle({180.0, 0.0, 181.0, 1.0});
  BatchPlan plan = ClusterQueries(mixed, 2, 3);
  auto a = plan.batches[0], b = plan.batches[1];
  if (a.front() != 0) std::swap(a, b);
  CHECK(a == std::vector<QueryId>{0, 2});
  CHECK(b == std::vector<QueryId>{1, 3});
}

TEST_CASE("clustering partitions and balances for many shapes") {
  std::mt19937_64 gen(5);
  for (std::size_t n : {1u, 2u, 7u, 31u, 64u, 100u}) {
    Matrix emb = testutil::RandomMatrix(n, 4, gen);
    testutil::NormalizeRows(emb);
    for (std::size_t nb : {1u, 2u, 3u, 5u, 8u, 13u}) {
      CAPTURE(n);
      CAPTURE(nb);
      const BatchPlan plan = ClusterQueries(emb, nb, 7, 2);
      CheckPartition(plan, n, std::min(nb, n));
      CHECK(plan.epoch == 2);
      CHECK(plan.batches == ClusterQueries(emb, nb, 7, 2).batches);
    }
  }
}

TEST_CASE("clustering separates well-separated blobs") {
  // Four tight blobs around orthogonal directions, 8 points each.
  std::mt19937_64 gen(9);
  std::normal_distribution<double> noise(0.0, 0.02);
  Matrix emb(32, 4);
  for (std::size_t i = 0; i < 32; ++i) {
    for (std::size_t c = 0; c < 4; ++c) emb(i, c) = (c == (i * 7 % 32) / 8 ? 1.0 : 0.0) + noise(gen);
  }
  testutil::NormalizeRows(emb);
  const BatchPlan plan = ClusterQueries(emb, 4, 1);
  for (const auto& b : plan.batches) {
    REQUIRE(b.size() == 8);
    const std::size_t blob = (b[0] * 7 % 32) / 8;
    for (QueryId q : b) CHECK((q * 7 % 32) / 8 == blob);
  }
}

TEST_CASE("positive sampling cardinality") {
  Rng rng(1);
  CHECK(SamplePositives({3, 8}, 3, rng) == LabelSet{3, 8});
  const LabelSet ten{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  for (int t = 0; t < 100; ++t) {
    const LabelSet s = SamplePositives(ten, 3, rng);
    CHECK(s.size() == 3);
    CHECK(std::is_sorted(s.begin(), s.end()));
    CHECK(std::adjacent_find(s.begin(), s.end()) == s.end());
    for (LabelId l : s) CHECK(l < 10);
  }
  CHECK(SamplePositives({}, 3, rng).empty());
  // Larger beta never gives fewer positives for the same stream.
  for (std::size_t beta = 1; beta < 12; ++beta) {
    Rng a = Rng::Stream(4, {1}), b = Rng::Stream(4, {1});
    CHECK(SamplePositives(ten, beta, a).size() <= SamplePositives(ten, beta + 1, b).size());
  }
}

TEST_CASE("positive sampling inclusion frequency is uniform") {
  // Each of 4 labels is included with probability 2/4.
  Rng rng(2024);
  const LabelSet p{10, 11, 12, 13};
  std::map<LabelId, int> counts;
  const int draws = 100000;
  for (int t = 0; t < draws; ++t) {
    for (LabelId l : SamplePositives(p, 2, rng)) ++counts[l];
  }
  for (LabelId l : p) CHECK(std::abs(counts[l] / static_cast<double>(draws) - 0.5) < 0.01);
}

TEST_CASE("collation example with a hard negative that is another query's positive") {
  // a=0, b=1, c=2, d=3, e=4
  const Dataset ds = Named({{0, 1, 2}, {1, 3}}, 5);
  const CollatedBatch b = AssembleBatch({0, 1}, {{0}, {1}}, {{3}, {4}}, {{}, {}}, ds);
  CHECK(b.de.labels == LabelSet{0, 1, 3, 4});
  CHECK(b.de.query_positives[0] == LabelSet{0, 1});
  CHECK(b.de.query_positives[1] == LabelSet{1, 3});
  CHECK(b.de.label_positives[1] == std::vector<QueryId>{0, 1});  // b
  CHECK(b.de.label_positives[3].empty());                       // e
  CHECK(b.clf.labels == b.de.labels);
}

TEST_CASE("collation degenerate cases") {
  const Dataset ds = Named({{2, 5, 6}, {5}}, 8);
  HardNegativeCache empty;
  CollateOptions o;
  o.beta = 5;
  o.eta = 0;
  const CollatedBatch one = CollateBatch({0}, ds, empty, o);
  CHECK(one.de.labels == LabelSet{2, 5, 6});
  CHECK(one.de.query_positives[0] == LabelSet{2, 5, 6});

  // Both queries sample label 5; it appears once.
  const CollatedBatch dup = AssembleBatch({0, 1}, {{5}, {5}}, {{}, {}}, {{}, {}}, ds);
  CHECK(dup.de.labels == LabelSet{5});
  CHECK(dup.de.label_positives[0] == std::vector<QueryId>{0, 1});
}

TEST_CASE("collation matches the set-definition oracle on random data") {
  std::mt19937_64 gen(77);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + gen() % 10, L = 3 + gen() % 15;
    SynthOptions so{.num_instances = n, .num_labels = L, .seed = gen(), .min_positives = 0, .max_positives = 5};
    const Dataset ds = SynthDataset(so);
    HardNegativeCache cache;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<LabelId> h;
      for (LabelId l = 0; l < L; ++l) {
        if (!ds.IsPositive(i, l) && gen() % 2) h.push_back(l);
      }
      cache.lists.push_back(h);
    }
    std::vector<QueryId> q;
    for (QueryId i = 0; i < n; ++i) {
      if (gen() % 3) q.push_back(i);
    }
    if (q.empty()) q.push_back(0);
    CollateOptions o{.beta = 1 + gen() % 3, .eta = gen() % 3, .beta_clf = gen() % 3, .seed = gen(), .epoch = 1,
                     .batch_index = 2};
    const CollatedBatch b = CollateBatch(q, ds, cache, o);
    for (std::size_t k = 0; k < q.size(); ++k) {
      const LabelSet& truth = ds.positives(q[k]);
      CHECK(b.sampled_positives[k].size() == std::min(o.beta, truth.size()));
      CHECK(std::includes(truth.begin(), truth.end(), b.sampled_positives[k].begin(), b.sampled_positives[k].end()));
      CHECK(b.sampled_negatives[k].size() <= o.eta);
      for (LabelId l : b.sampled_negatives[k]) CHECK(!ds.IsPositive(q[k], l));
      for (LabelId l : b.extra_clf_positives[k]) {
        CHECK(ds.IsPositive(q[k], l));
        CHECK(!std::binary_search(b.sampled_positives[k].begin(), b.sampled_positives[k].end(), l));
      }
      CHECK(b.extra_clf_positives[k].size() <= o.beta_clf);
    }
    CheckAgainstOracle(b, ds);
    // Same options replay identically.
    const CollatedBatch again = CollateBatch(q, ds, cache, o);
    CHECK(again.de.labels == b.de.labels);
    CHECK(again.clf.labels == b.clf.labels);
  }
}

TEST_CASE("classifier extras enlarge only the classifier pool") {
  const Dataset ds = Named({{0, 1, 2, 3, 4}}, 6);
  HardNegativeCache empty;
  CollateOptions o{.beta = 1, .eta = 0, .beta_clf = 2, .seed = 3};
  const CollatedBatch b = CollateBatch({0}, ds, empty, o);
  CHECK(b.de.labels.size() == 1);
  CHECK(b.extra_clf_positives[0].size() == 2);
  CHECK(b.clf.labels.size() == 3);
  CHECK(b.clf.query_positives[0] == b.clf.labels);
  CheckAgainstOracle(b, ds);

  o.beta_clf = 0;
  const CollatedBatch plain = CollateBatch({0}, ds, empty, o);
  CHECK(plain.clf.labels == plain.de.labels);
}

TEST_CASE("batch statistics recount") {
  // Every query owns label 0 plus one private label.
  const std::size_t n = 24;
  std::vector<LabelSet> rows;
  for (LabelId i = 0; i < n; ++i) rows.push_back({0, i + 1});
  const Dataset ds = Named(rows, n + 1);
  std::mt19937_64 gen(4);
  Matrix q = testutil::RandomMatrix(n, 3, gen), l = testutil::RandomMatrix(n + 1, 3, gen);
  testutil::NormalizeRows(q);
  testutil::NormalizeRows(l);

  BatchStatsOptions o{.beta = 1, .eta = 0, .num_batches = 4, .cache_size = 0, .seed = 9};
  const BatchStats s = ComputeBatchStats(ds, q, l, o);
  // Recount from the collated batches: |P^B_i| = 1 + [label 0 is in the
  // pool and was not i's own sample] ... all by direct set recount.
  const BatchPlan plan = ClusterQueries(q, 4, 9, 0);
  double total = 0.0, pool = 0.0;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < plan.batches.size(); ++b) {
    CollateOptions co{.beta = 1, .eta = 0, .seed = 9, .batch_index = b};
    const CollatedBatch cb = CollateBatch(plan.batches[b], ds, {}, co);
    const bool shared = std::binary_search(cb.de.labels.begin(), cb.de.labels.end(), 0u);
    for (std::size_t k = 0; k < cb.queries.size(); ++k) {
      const LabelId own = cb.sampled_positives[k][0];
      std::set<LabelId> pb{own};
      if (shared) pb.insert(0);
      total += static_cast<double>(pb.size());
      hits += pb.size() - 1;
    }
    pool += static_cast<double>(cb.de.labels.size());
  }
  CHECK(s.mean_pb == doctest::Approx(total / n).epsilon(1e-15));
  CHECK(s.mean_pb == doctest::Approx(1.0 + static_cast<double>(hits) / n).epsilon(1e-15));
  CHECK(s.mean_pool == doctest::Approx(pool / 4).epsilon(1e-15));
  CHECK(s.target_batch_size == 6);

  // Large beta, no negatives: |P^B_i| = |P_i|.
  o.beta = 10;
  CHECK(ComputeBatchStats(ds, q, l, o).mean_pb == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("batch statistics CSV") {
  std::ostringstream out;
  WriteBatchStatsHeader(out);
  BatchStats s;
  s.beta = 3;
  s.eta = 0;
  s.target_batch_size = 64;
  s.mean_pb = 13.6;
  s.p50_pb = 12;
  s.p95_pb = 30;
  s.mean_pool = 150.25;
  WriteBatchStatsRow(s, out);
  CHECK(out.str() == "beta,eta,batch_size,mean_pb,p50_pb,p95_pb,mean_pool\n"
                     "3,0,64,13.600000,12.000000,30.000000,150.250000\n");
}
