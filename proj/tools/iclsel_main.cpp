#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <filesystem>
#include <iostream>
#include <json.hpp>
#include <optional>
#include <string>
#include <vector>

#include "iclsel/error.hpp"
#include "iclsel/pipeline.hpp"
#include "iclsel/run_config.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Overrides {
  std::string config;
  std::optional<std::string> dataset;
  std::optional<std::string> train;
  std::optional<std::string> scheme;
  std::optional<int> k;
  std::optional<std::string> fields;
  std::optional<std::string> select;
  std::optional<std::string> order;
  std::optional<std::size_t> pool_size;
  std::optional<std::size_t> probe_size;
  std::optional<std::string> pool_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> mock;
  std::optional<std::string> embeddings;
  std::optional<std::size_t> dim;
  std::optional<std::string> out;
  bool cot = false;
};

iclsel::RunConfig effective_config(const Overrides& o) {
  iclsel::RunConfig cfg = o.config.empty() ? iclsel::RunConfig{} : iclsel::RunConfig::load(o.config);
  if (o.dataset) cfg.test_path = *o.dataset;
  if (o.train) cfg.train_path = *o.train;
  if (o.scheme) cfg.label_mapping = iclsel::LabelMapping::from_name(*o.scheme);
  if (o.k) cfg.k = *o.k;
  if (o.fields) cfg.fields = iclsel::FieldConfig::from_name(*o.fields);
  if (o.select) cfg.selection = iclsel::selection_mode_from_name(*o.select);
  if (o.order) cfg.ordering = iclsel::ordering_mode_from_name(*o.order);
  if (o.pool_size) cfg.pool_size = *o.pool_size;
  if (o.probe_size) cfg.probe_size = *o.probe_size;
  if (o.pool_path) cfg.pool_path = *o.pool_path;
  if (o.seed) cfg.seed = *o.seed;
  if (o.mock) cfg.mock = *o.mock;
  if (o.embeddings) {
    cfg.embed_location = *o.embeddings;
    const bool url = o.embeddings->rfind("http://", 0) == 0 || o.embeddings->rfind("https://", 0) == 0;
    cfg.embed_kind = url ? "http" : "precomputed";
  }
  if (o.dim) cfg.embed_dim = *o.dim;
  if (o.out) cfg.out_dir = *o.out;
  if (o.cot) cfg.cot = true;
  cfg.validate();
  return cfg;
}

void print_report(const iclsel::EvalReport& report) {
  std::cout << "n=" << report.n << " accuracy=" << report.accuracy << " ci95=[" << report.ci_lo
            << ", " << report.ci_hi << "] parse_failures=" << report.parse_failure_count
            << " config_hash=" << report.config_hash << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Coverage-based, label-balanced demonstration selection for LLM ideology classification"};
  app.require_subcommand(1);
  spdlog::set_pattern("[%l] %v");

  Overrides o;
  bool verbose = false;
  app.add_option("--config", o.config, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--dataset", o.dataset, "Dataset to ingest / test set to classify");
  app.add_option("--train", o.train, "Training set (demonstration source)");
  app.add_option("--scheme", o.scheme, "Label scheme: youtube_slant|adfontes|direct");
  app.add_option("--k", o.k, "Number of demonstrations");
  app.add_option("--fields", o.fields, "title|title-source|title-desc|title-source-desc");
  app.add_option("--select", o.select, "balanced|random");
  app.add_option("--order", o.order, "set-bsr|bsr");
  app.add_option("--pool-size", o.pool_size, "Candidate pool size N");
  app.add_option("--probe-size", o.probe_size, "Probe sample size for pool construction");
  app.add_option("--pool", o.pool_path, "Reuse an existing pool file");
  app.add_option("--seed", o.seed, "Seed for probes, random selection and bootstrap");
  app.add_option("--mock", o.mock, "echo_majority|nearest_demo|fixed:<label>");
  app.add_option("--embeddings", o.embeddings, "Precomputed embeddings JSONL or service URL");
  app.add_option("--dim", o.dim, "Embedding dimension");
  app.add_option("--out", o.out, "Output directory");
  app.add_flag("--cot", o.cot, "Use the step-by-step prompt variant");
  app.add_flag("-v,--verbose", verbose, "Debug logging");

  auto* ingest = app.add_subcommand("ingest", "Validate and label datasets");
  auto* embed = app.add_subcommand("embed", "Populate the embedding cache");
  auto* pool = app.add_subcommand("pool", "Build the candidate pool");
  auto* classify = app.add_subcommand("classify", "Select, prompt, query the LLM, write predictions");
  bool dump_prompts = false;
  classify->add_flag("--dump-prompts", dump_prompts, "Also write prompts.jsonl");

  auto* eval = app.add_subcommand("eval", "Score prediction files");
  std::vector<std::string> prediction_files;
  eval->add_option("predictions", prediction_files, "Prediction JSONL files")->required()->check(CLI::ExistingFile);

  auto* compare = app.add_subcommand("compare", "McNemar test between two prediction files");
  std::vector<std::string> pair;
  bool exact = false;
  compare->add_option("predictions", pair, "Two prediction JSONL files")->expected(2)->required()->check(CLI::ExistingFile);
  compare->add_flag("--exact", exact, "Exact binomial p-value instead of chi-square");

  auto* ablate = app.add_subcommand("ablate", "Sweep k in {0,4,8,12} x four field configurations");
  auto* baseline = app.add_subcommand("baseline", "Train and score the sentence-embedding MLP");
  int epochs = 100;
  baseline->add_option("--epochs", epochs, "Training epochs");

  for (auto* sub : app.get_subcommands({})) sub->fallthrough();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);

  try {
    const auto cfg = effective_config(o);
    const fs::path out(cfg.out_dir);
    if (ingest->parsed()) {
      std::vector<std::string> inputs;
      if (!cfg.train_path.empty()) inputs.push_back(cfg.train_path);
      if (!cfg.test_path.empty()) inputs.push_back(cfg.test_path);
      if (inputs.empty()) throw iclsel::Error("config", "nothing to ingest: pass --dataset or --train");
      for (const auto& input : inputs) {
        const auto s = iclsel::run_ingest(cfg, input);
        std::cout << input << ": " << s.items << " items (liberal=" << s.label_counts[0]
                  << " neutral=" << s.label_counts[1] << " conservative=" << s.label_counts[2]
                  << " unlabeled=" << s.unlabeled << ")\n";
      }
    } else if (embed->parsed()) {
      const auto index = iclsel::run_embed(cfg);
      std::cout << "embedded " << index.size() << " items (dim " << index.dim() << ") into "
                << cfg.effective_cache_dir().string() << '\n';
    } else if (pool->parsed()) {
      const auto p = iclsel::run_pool(cfg);
      std::cout << "pool of " << p.size() << " candidates, key " << iclsel::pool_key(cfg) << '\n';
    } else if (classify->parsed()) {
      const auto result = iclsel::run_classify(cfg, nullptr, dump_prompts);
      print_report(result.report);
    } else if (eval->parsed()) {
      std::vector<fs::path> files(prediction_files.begin(), prediction_files.end());
      const auto report = iclsel::run_eval(files, iclsel::descriptor_from(cfg, cfg.mock.empty() ? cfg.llm.model_name : "mock:" + cfg.mock),
                                           {cfg.bootstrap_resamples, cfg.seed}, out / "eval_report.json");
      print_report(report);
    } else if (compare->parsed()) {
      const auto method = exact ? iclsel::McNemarMethod::exact_binomial : iclsel::McNemarMethod::corrected_chi2;
      const auto r = iclsel::run_compare(pair[0], pair[1], method, out / "comparison.json");
      std::cout << "b=" << r.b << " c=" << r.c << " statistic=" << r.statistic << " p=" << r.p << ' '
                << r.stars() << '\n';
    } else if (ablate->parsed()) {
      const auto reports = iclsel::run_ablate(cfg);
      for (const auto& r : reports) {
        std::cout << "k=" << r.config.k << " fields=" << r.config.fields << ' ';
        print_report(r);
      }
    } else if (baseline->parsed()) {
      print_report(iclsel::run_baseline(cfg, epochs));
    }
  } catch (const iclsel::Error& e) {
    std::cerr << json{{"error", e.code()}, {"message", e.what()}}.dump() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  return 0;
}
