#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <sstream>

#include "test_util.hpp"
#include "unidec/config.hpp"

using namespace unidec;

namespace {

ErrorCode CodeOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::kInternal;
}

std::string MessageOf(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("registry is well formed and every default parses") {
  std::set<std::string> names;
  const std::set<std::string> types{"string", "int", "float", "bool", "list"};
  for (const ConfigKey& k : ConfigKeys()) {
    CHECK(names.insert(k.name).second);
    CHECK(types.count(k.type) == 1);
    CHECK(std::string(k.help).size() > 0);
    RunConfig c;
    CHECK_NOTHROW(c.Set(k.name, k.default_value));
  }
  for (const char* required : {"format", "queries", "labels", "epochs", "beta", "eta", "lambda", "temperature",
                               "seed", "mode", "k", "checkpoint", "output_dir", "k_list"}) {
    CHECK(names.count(required) == 1);
  }
}

TEST_CASE("defaults agree with the library defaults") {
  const TrainConfig lib;
  const TrainConfig fromcfg = RunConfig().ToTrainConfig();
  CHECK(fromcfg.epochs == lib.epochs);
  CHECK(fromcfg.refresh_interval == lib.refresh_interval);
  CHECK(fromcfg.batch_size == lib.batch_size);
  CHECK(fromcfg.beta == lib.beta);
  CHECK(fromcfg.eta == lib.eta);
  CHECK(fromcfg.cache_size == lib.cache_size);
  CHECK(fromcfg.loss.temperature == lib.loss.temperature);
  CHECK(fromcfg.loss.lambda == lib.loss.lambda);
  CHECK(fromcfg.adam.lr_encoder == lib.adam.lr_encoder);
  CHECK(fromcfg.adam.lr_heads == lib.adam.lr_heads);
  CHECK(fromcfg.adam.lr_classifier == lib.adam.lr_classifier);
  CHECK(fromcfg.dims.encoder == lib.dims.encoder);
  CHECK(fromcfg.dims.head == lib.dims.head);
  CHECK(fromcfg.dims.vocab == lib.dims.vocab);
  CHECK(fromcfg.dropout == lib.dropout);
  CHECK(fromcfg.eval_ks == lib.eval_ks);
}

TEST_CASE("typed values are validated on set") {
  RunConfig c;
  CHECK(CodeOf([&] { c.Set("epochs", "ten"); }) == ErrorCode::kConfig);
  CHECK(MessageOf([&] { c.Set("epochs", "ten"); }).find("'epochs'") != std::string::npos);
  CHECK(CodeOf([&] { c.Set("epochs", "3.5"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { c.Set("lambda", "half"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { c.Set("log_timing", "maybe"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { c.Set("k_list", "1,,3"); }) == ErrorCode::kConfig);
  CHECK(CodeOf([&] { c.Set("no_such_key", "1"); }) == ErrorCode::kConfig);
  CHECK(MessageOf([&] { c.Set("no_such_key", "1"); }).find("no_such_key") != std::string::npos);
  c.Set("epochs", " 12 ");
  CHECK(c.GetSize("epochs") == 12);
  CHECK(c.IsExplicit("epochs"));
  CHECK(!c.IsExplicit("beta"));
  c.Set("log_timing", "yes");
  CHECK(c.GetBool("log_timing"));
  c.Set("k_list", "1, 10,100");
  CHECK(c.GetSizeList("k_list") == std::vector<std::size_t>{1, 10, 100});
  c.Set("epochs", "-1");
  CHECK(CodeOf([&] { c.GetSize("epochs"); }) == ErrorCode::kConfig);
}

TEST_CASE("file parsing and precedence") {
  std::istringstream in(
      "# a comment\n"
      "\n"
      "epochs = 7   # trailing comment\n"
      "  beta=4\n"
      "queries = data/train.txt\n");
  RunConfig c;
  c.LoadStream(in, "inline");
  CHECK(c.GetSize("epochs") == 7);
  CHECK(c.GetSize("beta") == 4);
  CHECK(c.Get("queries") == "data/train.txt");
  // A later Set (command line) overrides the file value.
  c.Set("epochs", "9");
  CHECK(c.GetSize("epochs") == 9);
  CHECK(c.GetSize("eta") == 6);

  std::istringstream bad("epochs 7\n");
  CHECK(MessageOf([&] { RunConfig().LoadStream(bad, "x.cfg"); }).find("line 1") != std::string::npos);
  CHECK(CodeOf([] { RunConfig().LoadFile("/nonexistent/unidec.cfg"); }) == ErrorCode::kConfig);
}

TEST_CASE("missing dataset paths name the key") {
  RunConfig c;
  const std::string msg = MessageOf([&] { LoadConfiguredDataset(c); });
  CHECK(msg.find("queries") != std::string::npos);
  CHECK(CodeOf([&] { LoadConfiguredDataset(c); }) == ErrorCode::kConfig);
  c.Set("queries", "q.txt");
  CHECK(MessageOf([&] { LoadConfiguredDataset(c); }).find("labels") != std::string::npos);
}

TEST_CASE("configured datasets load") {
  RunConfig c;
  c.Set("format", "synth");
  c.Set("synth_instances", "20");
  c.Set("synth_labels", "7");
  const Dataset ds = LoadConfiguredDataset(c);
  CHECK(ds.num_instances() == 20);
  CHECK(ds.num_labels() == 7);
  Dataset ev;
  CHECK(!LoadConfiguredEvalDataset(c, ev));
  c.Set("eval_queries", "x");
  CHECK(CodeOf([&] { LoadConfiguredEvalDataset(c, ev); }) == ErrorCode::kConfig);

  const auto dir = testutil::ScratchDir("config_ds");
  testutil::WriteFile(dir / "train.jsonl", "{\"text\": \"a b\", \"labels\": [0]}\n{\"text\": \"c\", \"labels\": [1]}\n");
  testutil::WriteFile(dir / "test.jsonl", "{\"text\": \"b\", \"labels\": [1]}\n");
  testutil::WriteFile(dir / "labels.txt", "la\nlb\n");
  RunConfig j;
  j.Set("format", "jsonl");
  j.Set("queries", (dir / "train.jsonl").string());
  j.Set("labels", (dir / "labels.txt").string());
  CHECK(LoadConfiguredDataset(j).num_instances() == 2);
  j.Set("eval_queries", (dir / "test.jsonl").string());
  REQUIRE(LoadConfiguredEvalDataset(j, ev));
  CHECK(ev.num_instances() == 1);
  CHECK(ev.num_labels() == 2);
}

TEST_CASE("train config validation runs on conversion") {
  RunConfig c;
  c.Set("temperature", "0");
  CHECK(CodeOf([&] { c.ToTrainConfig(); }) == ErrorCode::kConfig);
  RunConfig d;
  d.Set("reduction", "median");
  CHECK(CodeOf([&] { d.ToTrainConfig(); }) == ErrorCode::kConfig);
  RunConfig e;
  e.Set("k_list", "0,1");
  CHECK(CodeOf([&] { e.ToTrainConfig(); }) == ErrorCode::kConfig);
}
