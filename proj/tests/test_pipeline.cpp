#include <doctest.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iclsel/error.hpp"
#include "iclsel/pipeline.hpp"
#include "iclsel/synthetic.hpp"
#include "temp_dir.hpp"

using namespace iclsel;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

struct SyntheticRun {
  test_support::TempDir dir;
  RunConfig cfg;

  explicit SyntheticRun(std::size_t n_train = 90, std::size_t n_test = 30) {
    SyntheticSpec spec;
    spec.n_train = n_train;
    spec.n_test = n_test;
    spec.dim = 16;
    spec.seed = 5;
    write_synthetic_corpus(make_synthetic_corpus(spec), dir.path() / "data");
    cfg.train_path = (dir.path() / "data" / "train.jsonl").string();
    cfg.test_path = (dir.path() / "data" / "test.jsonl").string();
    cfg.embed_location = (dir.path() / "data" / "embeddings.jsonl").string();
    cfg.embed_dim = 16;
    cfg.k = 3;
    cfg.pool_size = 40;
    cfg.probe_size = 30;
    cfg.mock = "echo_majority";
    cfg.bootstrap_resamples = 100;
    cfg.out_dir = (dir.path() / "out").string();
  }
};

int run_cli(const std::string& args, std::string* err = nullptr) {
  const std::string err_file = (fs::temp_directory_path() / "iclsel_cli_err.txt").string();
  const int status = std::system((std::string(ICLSEL_CLI) + " " + args + " >/dev/null 2>" + err_file).c_str());
  if (err) *err = slurp(err_file);
  return WEXITSTATUS(status);
}

}  // namespace

TEST_CASE("config hash ignores output locations and concurrency only") {
  RunConfig a;
  a.train_path = "train.jsonl";
  a.test_path = "test.jsonl";
  RunConfig b = a;
  b.out_dir = "elsewhere";
  b.cache_dir = "cache2";
  b.llm.max_in_flight = 16;
  b.llm.api_key = "secret";
  CHECK(a.config_hash() == b.config_hash());
  CHECK(a.config_hash().size() == 16);
  CHECK(a.to_json().dump().find("secret") == std::string::npos);

  for (auto change : std::vector<std::function<void(RunConfig&)>>{
           [](RunConfig& c) { c.k = 4; }, [](RunConfig& c) { c.seed = 1; },
           [](RunConfig& c) { c.fields = FieldConfig::title_source(); },
           [](RunConfig& c) { c.selection = SelectionMode::random; },
           [](RunConfig& c) { c.pool_size = 2000; }, [](RunConfig& c) { c.mock = "nearest_demo"; },
           [](RunConfig& c) { c.cot = true; }}) {
    RunConfig c = a;
    change(c);
    CHECK(c.config_hash() != a.config_hash());
  }
}

TEST_CASE("config json round trip and relative paths") {
  const auto doc = nlohmann::json::parse(R"({
    "dataset": {"train": "data/train.jsonl", "test": "data/test.jsonl", "scheme": "adfontes"},
    "fields": "title-source", "k": 12, "select": "random", "order": "bsr",
    "pool": {"size": 100, "probe_size": 50}, "seed": 3,
    "embeddings": {"kind": "precomputed", "location": "emb.jsonl", "dim": 8},
    "llm": {"mock": "fixed:neutral"}, "out": "run1"
  })");
  const auto cfg = RunConfig::from_json(doc, "/base");
  CHECK(cfg.train_path == "/base/data/train.jsonl");
  CHECK(cfg.embed_location == "/base/emb.jsonl");
  CHECK(cfg.k == 12);
  CHECK(cfg.fields == FieldConfig::title_source());
  CHECK(cfg.selection == SelectionMode::random);
  CHECK(cfg.ordering == OrderingMode::independent_bsr);
  CHECK(cfg.label_mapping.scheme == LabelMapping::Scheme::adfontes);
  CHECK(cfg.pool_size == 100);
  const auto again = RunConfig::from_json(cfg.to_json());
  CHECK(again.config_hash() == cfg.config_hash());
  CHECK_THROWS_AS(RunConfig::from_json(nlohmann::json::parse(R"({"fields": "everything"})")), Error);
}

TEST_CASE("classify is deterministic and stamps artifacts") {
  SyntheticRun run;
  const auto first = run_classify(run.cfg, nullptr, true);
  const auto predictions = slurp(fs::path(run.cfg.out_dir) / "predictions.jsonl");
  const auto report = slurp(fs::path(run.cfg.out_dir) / "report.json");
  run_classify(run.cfg);
  CHECK(slurp(fs::path(run.cfg.out_dir) / "predictions.jsonl") == predictions);
  CHECK(slurp(fs::path(run.cfg.out_dir) / "report.json") == report);

  const auto hash = run.cfg.config_hash();
  CHECK(first.outcome.predictions.size() == 30);
  for (const auto& p : first.outcome.predictions) CHECK(p.config_hash == hash);
  CHECK(nlohmann::json::parse(report)["config_hash"] == hash);
  CHECK(predictions.find(hash) != std::string::npos);

  std::ifstream selections(fs::path(run.cfg.out_dir) / "selections.jsonl");
  std::string line;
  std::size_t lines = 0;
  while (std::getline(selections, line)) {
    const auto doc = nlohmann::json::parse(line);
    CHECK(doc["members"].size() == 3);
    CHECK(doc["config_hash"] == hash);
    ++lines;
  }
  CHECK(lines == 30);
  CHECK(fs::exists(fs::path(run.cfg.out_dir) / "prompts.jsonl"));
  CHECK(fs::exists(fs::path(run.cfg.out_dir) / "run_config.json"));
}

TEST_CASE("pool is reused only when its key matches") {
  SyntheticRun run;
  const auto pool = run_pool(run.cfg);
  CHECK(pool.size() == 40);
  const auto key = pool_key(run.cfg);
  RunConfig other = run.cfg;
  other.k = 12;
  CHECK(pool_key(other) == key);
  other.pool_size = 30;
  CHECK(pool_key(other) != key);
  const auto smaller = run_pool(other);
  CHECK(smaller.size() == 30);
  CHECK(run_pool(run.cfg).size() == 40);
}

TEST_CASE("eval refuses mixed hashes and compare of a file with itself is (0, 1)") {
  SyntheticRun run;
  run_classify(run.cfg);
  const auto preds = fs::path(run.cfg.out_dir) / "predictions.jsonl";
  const auto result = run_compare(preds, preds, McNemarMethod::corrected_chi2, run.dir.path() / "cmp.json");
  CHECK(result.statistic == 0.0);
  CHECK(result.p == 1.0);

  RunConfig other = run.cfg;
  other.out_dir = (run.dir.path() / "out_random").string();
  other.selection = SelectionMode::random;
  run_classify(other);
  const auto preds_b = fs::path(other.out_dir) / "predictions.jsonl";
  CHECK_THROWS_AS(run_eval({preds, preds_b}, {}, {}, run.dir.path() / "eval.json"), Error);
  const auto report = run_eval({preds}, {}, {100, 0}, run.dir.path() / "eval.json");
  CHECK(report.n == 30);
}

TEST_CASE("ablate writes sixteen reports") {
  SyntheticRun run(60, 12);
  run.cfg.pool_size = 20;
  const auto reports = run_ablate(run.cfg);
  CHECK(reports.size() == 16);
  std::size_t dirs = 0;
  for (const auto& entry : fs::directory_iterator(fs::path(run.cfg.out_dir) / "ablate")) {
    if (entry.is_directory()) {
      CHECK(fs::exists(entry.path() / "report.json"));
      ++dirs;
    }
  }
  CHECK(dirs == 16);
  CHECK(fs::exists(fs::path(run.cfg.out_dir) / "ablate" / "k12_title-source-desc" / "predictions.jsonl"));
}

TEST_CASE("command line: overrides, artifacts and error format") {
  SyntheticRun run;
  const auto config_path = run.dir.path() / "run.json";
  {
    std::ofstream out(config_path);
    out << run.cfg.to_json().dump(2);
  }
  const std::string base = "--config " + config_path.string();
  CHECK(run_cli(base + " --k 4 classify") == 0);
  const auto saved = nlohmann::json::parse(slurp(fs::path(run.cfg.out_dir) / "run_config.json"));
  CHECK(saved["k"] == 4);

  std::string err;
  CHECK(run_cli(base + " --k -1 classify", &err) == 1);
  const auto doc = nlohmann::json::parse(err);
  CHECK(doc["error"] == "config");
  CHECK(err.find('\n') == err.size() - 1);

  CHECK(run_cli(base + " --dataset /nonexistent/test.jsonl classify", &err) == 1);
  CHECK(nlohmann::json::parse(err)["error"] == "io");

  const auto preds = (fs::path(run.cfg.out_dir) / "predictions.jsonl").string();
  CHECK(run_cli(base + " compare " + preds + " " + preds) == 0);
  const auto cmp = nlohmann::json::parse(slurp(fs::path(run.cfg.out_dir) / "comparison.json"));
  CHECK(cmp["statistic"] == 0.0);
  CHECK(cmp["p"] == 1.0);
}
