#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "json.hpp"
#include "unidec/trainer.hpp"

using namespace unidec;

namespace {

TrainConfig SmallConfig() {
  TrainConfig c;
  c.epochs = 1;
  c.refresh_interval = 1;
  c.batch_size = 16;
  c.beta = 2;
  c.eta = 0;
  c.dims = {.vocab = 256, .encoder = 8, .head = 4};
  c.dropout = 0.1;
  c.seed = 3;
  return c;
}

Dataset Small() { return SynthDataset({.num_instances = 16, .num_labels = 10, .seed = 1}); }

}  // namespace

TEST_CASE("lambda = 1 leaves the classifier side untouched") {
  TrainConfig c = SmallConfig();
  c.loss.lambda = 1.0;
  const Dataset ds = Small();
  ModelDims dims = c.dims;
  dims.labels = ds.num_labels();
  ModelParams init = ModelParams::Init(dims, c.dropout, c.seed);
  init.classifiers = EmbedTexts(init, ds.label_texts(), Head::kDe);
  const ModelParams trained = Train(ds, c).params;
  CHECK(trained.embeddings != init.embeddings);
  CHECK(trained.de_weight != init.de_weight);
  CHECK(trained.clf_weight == init.clf_weight);
  CHECK(trained.clf_bias == init.clf_bias);
  CHECK(trained.classifiers == init.classifiers);
}

TEST_CASE("lambda = 0 leaves the DE head untouched") {
  TrainConfig c = SmallConfig();
  c.loss.lambda = 0.0;
  const Dataset ds = Small();
  ModelDims dims = c.dims;
  dims.labels = ds.num_labels();
  const ModelParams init = ModelParams::Init(dims, c.dropout, c.seed);
  const ModelParams trained = Train(ds, c).params;
  CHECK(trained.de_weight == init.de_weight);
  CHECK(trained.de_bias == init.de_bias);
  CHECK(trained.clf_weight != init.clf_weight);
  CHECK(trained.embeddings != init.embeddings);
}

TEST_CASE("reported total mixes the two losses by lambda") {
  const Dataset ds = SynthDataset({.num_instances = 64, .num_labels = 20, .seed = 2});
  for (double lambda : {0.0, 0.3, 0.5, 1.0}) {
    TrainConfig c = SmallConfig();
    c.epochs = 3;
    c.eta = 2;
    c.loss.lambda = lambda;
    for (const EpochRecord& r : Train(ds, c).report.epochs) {
      CHECK(std::abs(r.loss.total - (lambda * r.loss.de + (1 - lambda) * r.loss.clf)) < 1e-12);
      CHECK(std::abs(r.loss.de - 0.5 * (r.loss.de_q2l + r.loss.de_l2q)) < 1e-12);
      CHECK(r.batches == 4);
    }
  }
}

TEST_CASE("refresh and checkpoint schedule") {
  TrainConfig c = SmallConfig();
  c.epochs = 7;
  c.refresh_interval = 3;
  c.eta = 1;
  std::vector<std::size_t> refreshed, checkpoints;
  std::size_t refresh_calls = 0;
  TrainHooks hooks;
  hooks.on_epoch = [&](const EpochRecord& r) {
    if (r.refreshed) refreshed.push_back(r.epoch);
  };
  hooks.on_checkpoint = [&](const ModelParams&, std::size_t done) { checkpoints.push_back(done); };
  hooks.on_refresh = [&](const BatchPlan& plan, const HardNegativeCache& cache) {
    ++refresh_calls;
    CHECK(plan.batches.size() == 1);
    CHECK(cache.lists.size() == 16);
    for (const auto& h : cache.lists) CHECK(h.size() <= c.EffectiveCacheSize());
  };
  Train(Small(), c, hooks);
  CHECK(refreshed == std::vector<std::size_t>{0, 3, 6});
  CHECK(refresh_calls == 3);
  CHECK(checkpoints == std::vector<std::size_t>{3, 6, 7});
}

TEST_CASE("training is deterministic for a fixed seed") {
  const Dataset ds = SynthDataset({.num_instances = 48, .num_labels = 16, .seed = 5});
  TrainConfig c = SmallConfig();
  c.epochs = 4;
  c.refresh_interval = 2;
  c.eta = 2;
  const TrainResult a = Train(ds, c);
  const TrainResult b = Train(ds, c);
  CHECK(a.params == b.params);
  REQUIRE(a.report.epochs.size() == b.report.epochs.size());
  for (std::size_t e = 0; e < a.report.epochs.size(); ++e) {
    CHECK(EpochRecordJson(a.report.epochs[e], false) == EpochRecordJson(b.report.epochs[e], false));
  }
  c.seed = 4;
  CHECK(!(Train(ds, c).params == a.params));
}

TEST_CASE("an untrained model is at chance on uninformative data") {
  const std::size_t n = 2000, l = 100;
  const Dataset ds = SynthDataset({.num_instances = n, .num_labels = l, .seed = 9, .informative = false});
  const ModelParams p = ModelParams::Init({.vocab = 4096, .encoder = 16, .head = 8, .labels = l}, 0.1, 1);
  double mean_pos = 0.0;
  for (std::size_t i = 0; i < n; ++i) mean_pos += static_cast<double>(ds.positives(i).size());
  const double chance = mean_pos / static_cast<double>(n * l);
  const double sigma = std::sqrt(chance * (1 - chance) / static_cast<double>(n));
  const auto m = EvaluateModel(p, ds, ds, {1}, {IndexMode::kDe, IndexMode::kClf});
  for (const char* key : {"de/P@1", "clf/P@1"}) {
    INFO(key, " = ", m.at(key), ", chance = ", chance);
    CHECK(std::abs(m.at(key) - chance) < 3 * sigma);
  }
}

TEST_CASE("loss decreases on learnable data") {
  const Dataset ds = SynthDataset({.num_instances = 128, .num_labels = 32, .seed = 4});
  TrainConfig c = SmallConfig();
  c.epochs = 15;
  c.refresh_interval = 5;
  c.batch_size = 32;
  c.eta = 2;
  c.dims = {.vocab = 1024, .encoder = 32, .head = 16};
  c.adam.lr_encoder = 1e-2;
  c.adam.lr_heads = 1e-2;
  c.adam.lr_classifier = 1e-2;
  const auto& ep = Train(ds, c).report.epochs;
  CHECK(ep.back().loss.total < 0.8 * ep.front().loss.total);
}

TEST_CASE("in-training evaluation fills metrics") {
  TrainConfig c = SmallConfig();
  c.epochs = 3;
  c.eval_every = 2;
  const auto& ep = Train(Small(), c).report.epochs;
  CHECK(ep[0].metrics.empty());
  CHECK(ep[1].metrics.count("concat/PSP@5") == 1);
  CHECK(ep[2].metrics.count("de/P@1") == 1);  // the last epoch always evaluates
}

TEST_CASE("non-finite updates abort with a diagnostic") {
  TrainConfig c = SmallConfig();
  c.epochs = 2;
  c.adam.lr_heads = std::numeric_limits<double>::infinity();
  try {
    Train(SynthDataset({.num_instances = 32, .num_labels = 10, .seed = 1}), c);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::kNumeric);
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("batch loss replays and eval mode ignores the seed") {
  const Dataset ds = Small();
  const ModelParams p = ModelParams::Init({.vocab = 256, .encoder = 16, .head = 16, .labels = 10}, 0.3, 2);
  const Vocabulary vocab(256);
  std::vector<SparseVector> qf, lf;
  for (const auto& t : ds.instance_texts()) qf.push_back(vocab.Featurize(t));
  for (const auto& t : ds.label_texts()) lf.push_back(vocab.Featurize(t));
  HardNegativeCache cache;
  cache.lists.resize(16);
  std::vector<QueryId> qs{0, 3, 5, 9};
  const CollatedBatch batch = CollateBatch(qs, ds, cache, {.beta = 2, .eta = 0});
  const LossConfig loss;
  const BatchResult a = ComputeBatchLoss(p, qf, lf, batch, loss, 7, 1, 0);
  const BatchResult b = ComputeBatchLoss(p, qf, lf, batch, loss, 7, 1, 0);
  CHECK(a.loss.total == b.loss.total);
  CHECK(a.grads.de_weight == b.grads.de_weight);
  const BatchResult c = ComputeBatchLoss(p, qf, lf, batch, loss, 8, 1, 0);
  CHECK(c.loss.total != a.loss.total);
  const BatchResult e1 = ComputeBatchLoss(p, qf, lf, batch, loss, 7, 1, 0, Mode::kEval);
  const BatchResult e2 = ComputeBatchLoss(p, qf, lf, batch, loss, 8, 2, 3, Mode::kEval);
  CHECK(e1.loss.total == e2.loss.total);
}

TEST_CASE("epoch record JSON") {
  EpochRecord r;
  r.epoch = 4;
  r.batches = 2;
  r.loss.total = 1.5;
  r.seconds = 0.25;
  const auto j = nlohmann::json::parse(EpochRecordJson(r, false));
  CHECK(j["epoch"] == 4);
  CHECK(j["total"] == 1.5);
  CHECK(!j.contains("seconds"));
  CHECK(!j.contains("metrics"));
  CHECK(nlohmann::json::parse(EpochRecordJson(r, true))["seconds"] == 0.25);
  CHECK(EpochRecordJson(r, false).find('\n') == std::string::npos);
}

TEST_CASE("invalid configurations are rejected") {
  const Dataset ds = Small();
  auto expect_config_error = [&](TrainConfig c) {
    try {
      Train(ds, c);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kConfig);
    }
  };
  TrainConfig c = SmallConfig();
  c.epochs = 0;
  expect_config_error(c);
  c = SmallConfig();
  c.beta = 0;
  expect_config_error(c);
  c = SmallConfig();
  c.dropout = 1.0;
  expect_config_error(c);
  c = SmallConfig();
  c.loss.temperature = 0.0;
  expect_config_error(c);
  c = SmallConfig();
  c.loss.lambda = 1.5;
  expect_config_error(c);
}
