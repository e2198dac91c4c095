#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>

#include "oracles.hpp"
#include "test_util.hpp"
#include "unidec/inference.hpp"

using namespace unidec;

namespace {

ModelParams SmallModel(std::size_t labels, std::uint64_t seed) {
  return ModelParams::Init({.vocab = 512, .encoder = 12, .head = 6, .labels = labels}, 0.1, seed);
}

double RowNorm(const Matrix& m, std::size_t r) { return std::sqrt(Dot(m.row(r), m.row(r))); }

}  // namespace

TEST_CASE("index rows have the expected norms") {
  const Dataset ds = SynthDataset({.num_instances = 10, .num_labels = 20, .seed = 4});
  const ModelParams p = SmallModel(20, 1);
  const LabelIndex de = BuildIndex(p, ds, IndexMode::kDe);
  const LabelIndex clf = BuildIndex(p, ds, IndexMode::kClf);
  const LabelIndex cat = BuildIndex(p, ds, IndexMode::kConcat);
  REQUIRE(de.rows.rows() == 20);
  CHECK(de.rows.cols() == 6);
  CHECK(cat.rows.cols() == 12);
  for (std::size_t l = 0; l < 20; ++l) {
    CHECK(std::abs(RowNorm(de.rows, l) - 1.0) < 1e-12);
    CHECK(std::abs(RowNorm(clf.rows, l) - 1.0) < 1e-12);
    CHECK(std::abs(RowNorm(cat.rows, l) - std::sqrt(2.0)) < 1e-6);
  }
  const Matrix q = EmbedQueries(p, ds.instance_texts(), IndexMode::kConcat);
  for (std::size_t i = 0; i < q.rows(); ++i) CHECK(std::abs(RowNorm(q, i) - std::sqrt(2.0)) < 1e-6);
}

TEST_CASE("concat score is the sum of de and clf scores") {
  const Dataset ds = SynthDataset({.num_instances = 15, .num_labels = 25, .seed = 7});
  const ModelParams p = SmallModel(25, 3);
  const auto& texts = ds.instance_texts();
  const auto de = Predict(BuildIndex(p, ds, IndexMode::kDe), p, texts, 25);
  const auto clf = Predict(BuildIndex(p, ds, IndexMode::kClf), p, texts, 25);
  const auto cat = Predict(BuildIndex(p, ds, IndexMode::kConcat), p, texts, 25);
  for (std::size_t i = 0; i < texts.size(); ++i) {
    std::vector<double> sd(25), sc(25);
    for (const auto& s : de[i]) sd[s.id] = s.score;
    for (const auto& s : clf[i]) sc[s.id] = s.score;
    REQUIRE(cat[i].size() == 25);
    for (const auto& s : cat[i]) CHECK(std::abs(s.score - (sd[s.id] + sc[s.id])) < 1e-10);
  }
}

TEST_CASE("a query identical to a label text retrieves it with score 1") {
  const Dataset ds({"alpha beta"}, {"alpha beta", "gamma delta"}, {{0}}, 2);
  const ModelParams p = SmallModel(2, 9);
  const auto r = Predict(BuildIndex(p, ds, IndexMode::kDe), p, ds.instance_texts(), 1);
  REQUIRE(r.size() == 1);
  REQUIRE(r[0].size() == 1);
  CHECK(r[0][0].id == 0);
  CHECK(r[0][0].score == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("exact search matches a brute-force scan") {
  const Dataset ds = SynthDataset({.num_instances = 20, .num_labels = 30, .seed = 11});
  const ModelParams p = SmallModel(30, 5);
  for (IndexMode mode : {IndexMode::kDe, IndexMode::kClf, IndexMode::kConcat}) {
    const LabelIndex idx = BuildIndex(p, ds, mode);
    const Matrix q = EmbedQueries(p, ds.instance_texts(), mode);
    const auto got = Predict(idx, p, ds.instance_texts(), 7);
    for (std::size_t i = 0; i < q.rows(); ++i) {
      const auto want = oracle::TopK(idx.rows, {q.row(i).begin(), q.row(i).end()}, 7);
      REQUIRE(got[i].size() == want.size());
      for (std::size_t r = 0; r < want.size(); ++r) {
        CHECK(got[i][r].id == want[r].first);
        CHECK(std::abs(got[i][r].score - want[r].second) < 1e-12);
      }
    }
  }
}

TEST_CASE("k larger than L is clamped and k = 0 is rejected") {
  const Dataset ds = SynthDataset({.num_instances = 4, .num_labels = 6, .seed = 1});
  const ModelParams p = SmallModel(6, 2);
  const LabelIndex idx = BuildIndex(p, ds, IndexMode::kConcat);
  for (const auto& r : Predict(idx, p, ds.instance_texts(), 100)) CHECK(r.size() == 6);
  try {
    Predict(idx, p, ds.instance_texts(), 0);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kConfig);
  }
}

TEST_CASE("zero classifier rows are reported") {
  const Dataset ds = SynthDataset({.num_instances = 4, .num_labels = 6, .seed = 1});
  ModelParams p = SmallModel(6, 2);
  for (double& v : p.classifiers.row(4)) v = 0.0;
  for (double& v : p.classifiers.row(1)) v = 0.0;
  CHECK_NOTHROW(BuildIndex(p, ds, IndexMode::kDe));
  for (IndexMode mode : {IndexMode::kClf, IndexMode::kConcat}) {
    try {
      BuildIndex(p, ds, mode);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kDegenerate);
      const std::string msg = e.what();
      CHECK(msg.find('1') != std::string::npos);
      CHECK(msg.find('4') != std::string::npos);
    }
  }
}

TEST_CASE("label count mismatch is rejected") {
  const Dataset ds = SynthDataset({.num_instances = 4, .num_labels = 6, .seed = 1});
  const ModelParams p = SmallModel(7, 2);
  CHECK_THROWS_AS(BuildIndex(p, ds, IndexMode::kDe), Error);
}

TEST_CASE("prediction TSV round trip") {
  const std::vector<Ranking> preds = {{{3, 0.5}, {1, 0.25}}, {}, {{0, -1e-300}, {7, -2.5}, {2, -3.0}}};
  std::stringstream s;
  WritePredictionsTsv(preds, s);
  const std::string text = s.str();
  CHECK(text.substr(0, 13) == "0\t1\t3\t0.5\n0\t2");
  std::istringstream in(text);
  CHECK(ReadPredictionsTsv(in, 3) == preds);
  std::istringstream in2(text);
  CHECK(ReadPredictionsTsv(in2).size() == 3);

  // Rows may arrive out of rank order.
  std::istringstream shuffled("0\t2\t5\t0.1\n0\t1\t4\t0.9\n");
  const auto r = ReadPredictionsTsv(shuffled, 1);
  REQUIRE(r[0].size() == 2);
  CHECK(r[0][0].id == 4);

  std::istringstream bad("0\t1\tx\t0.5\n");
  try {
    ReadPredictionsTsv(bad, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kFormat);
  }
  std::istringstream beyond("5\t1\t0\t0.5\n");
  CHECK_THROWS_AS(ReadPredictionsTsv(beyond, 2), Error);
}

TEST_CASE("prediction is pure") {
  const Dataset ds = SynthDataset({.num_instances = 12, .num_labels = 15, .seed = 2});
  const ModelParams p = SmallModel(15, 8);
  const ModelParams copy = p;
  const LabelIndex idx = BuildIndex(p, ds, IndexMode::kConcat);
  const auto a = Predict(idx, p, ds.instance_texts(), 5);
  const auto b = Predict(idx, p, ds.instance_texts(), 5);
  CHECK(a == b);
  CHECK(p == copy);
}

TEST_CASE("approximate search returns valid rankings") {
  const Dataset ds = SynthDataset({.num_instances = 30, .num_labels = 64, .seed = 5});
  const ModelParams p = SmallModel(64, 4);
  const LabelIndex idx = BuildIndex(p, ds, IndexMode::kDe, SearchExactness::kApproximate, 3);
  REQUIRE(idx.ivf.has_value());
  const auto got = Predict(idx, p, ds.instance_texts(), 5);
  const Matrix q = EmbedQueries(p, ds.instance_texts(), IndexMode::kDe);
  for (std::size_t i = 0; i < got.size(); ++i) {
    CHECK(got[i].size() <= 5);
    std::set<std::uint32_t> seen;
    for (std::size_t r = 0; r < got[i].size(); ++r) {
      CHECK(got[i][r].id < 64);
      CHECK(seen.insert(got[i][r].id).second);
      CHECK(std::abs(got[i][r].score - Dot(q.row(i), idx.rows.row(got[i][r].id))) < 1e-12);
      if (r > 0) CHECK(got[i][r].score <= got[i][r - 1].score);
    }
  }
}
