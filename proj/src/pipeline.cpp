#include "iclsel/pipeline.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <numeric>

#include "iclsel/digest.hpp"
#include "iclsel/error.hpp"
#include "iclsel/mlp.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

using nlohmann::json;
namespace fs = std::filesystem;

void write_text(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  out << content;
  if (content.empty() || content.back() != '\n') out << '\n';
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write " + path.string());
  for (const auto& line : lines) out << line << '\n';
}

ClassifyOutcome classify_items(const std::vector<ContentItem>& train,
                               const std::vector<ContentItem>& test,
                               const EmbeddingIndex& embeddings, const CandidatePool& pool,
                               const ClassifySettings& settings, ChatBackend& backend,
                               const LLMConfig& llm, const std::string& config_hash) {
  const ItemLookup train_lookup = make_item_lookup(train);
  std::vector<std::size_t> order(test.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return test[a].id < test[b].id; });

  ClassifyOutcome outcome;
  std::vector<ClassifyRequest> requests;
  requests.reserve(test.size());
  for (std::size_t idx : order) {
    const auto& query = test[idx];
    SelectionResult selection;
    if (settings.selection == SelectionMode::balanced) {
      if (settings.k > 0) {
        const auto ordering = order_for_query(embeddings.at(query.id), pool, settings.ordering,
                                              settings.weighting);
        selection = balanced_select(ordering, settings.k);
      } else {
        selection.demos.query_id = query.id;
      }
    } else {
      selection.demos = random_select(pool, settings.k,
                                      derive_seed(settings.seed, stable_hash64(query.id)), query.id);
    }
    if (selection.fallback_used) ++outcome.fallback_count;

    auto trace = json::parse(selection_trace_json(selection));
    trace["config_hash"] = config_hash;
    outcome.selection_traces.push_back(trace.dump());

    RenderOptions options = settings.render;
    if (options.max_chars == 0) options.max_chars = llm.max_prompt_chars;
    RenderedPrompt prompt = render(query, selection.demos, train_lookup, settings.fields, options);
    auto dump = json::parse(prompt_dump_json(query.id, prompt));
    dump["config_hash"] = config_hash;
    outcome.prompt_dumps.push_back(dump.dump());
    requests.push_back({query.id, query.label, std::move(prompt)});
  }

  Classifier classifier(backend, llm, config_hash);
  outcome.predictions = classifier.classify_batch(requests);
  return outcome;
}

ClassifySettings settings_from(const RunConfig& cfg) {
  ClassifySettings s;
  s.fields = cfg.fields;
  s.k = cfg.k;
  s.selection = cfg.selection;
  s.ordering = cfg.ordering;
  s.weighting = cfg.token_weighting;
  s.seed = cfg.seed;
  s.render.cot = cfg.cot;
  s.render.max_chars = cfg.llm.max_prompt_chars;
  return s;
}

ReportDescriptor descriptor_from(const RunConfig& cfg, const std::string& model) {
  ReportDescriptor d;
  d.dataset = fs::path(cfg.test_path).stem().string();
  d.k = cfg.k;
  d.fields = cfg.fields.name();
  d.selection = std::string(selection_mode_name(cfg.selection));
  d.ordering = std::string(ordering_mode_name(cfg.ordering));
  d.model = model;
  return d;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& cfg) {
  if (cfg.embed_location.empty()) throw Error("config", "embeddings.location is not set");
  if (cfg.embed_kind == "http") {
    return std::make_unique<HttpEmbeddingProvider>(cfg.embed_location, cfg.embed_dim);
  }
  return std::make_unique<PrecomputedEmbeddingProvider>(cfg.embed_location, cfg.embed_dim);
}

std::unique_ptr<ChatBackend> make_chat_backend(const RunConfig& cfg) {
  if (!cfg.mock.empty()) return std::make_unique<MockLLM>(MockLLM::from_name(cfg.mock));
  LLMConfig llm = cfg.llm;
  llm.apply_environment();
  return std::make_unique<HttpChatBackend>(std::move(llm));
}

namespace {

std::vector<ContentItem> load_split(const std::string& path, const RunConfig& cfg, const char* what) {
  if (path.empty()) throw Error("config", std::string(what) + " dataset path is not set");
  return load_dataset(path, cfg.label_mapping);
}

EmbeddingIndex embed_items(const RunConfig& cfg, const std::vector<ContentItem>& items) {
  auto provider = make_embedding_provider(cfg);
  EmbeddingCache cache(cfg.effective_cache_dir());
  return embed_corpus(items, cfg.fields, *provider, &cache);
}

std::vector<ContentItem> concat(std::vector<ContentItem> a, const std::vector<ContentItem>& b) {
  a.insert(a.end(), b.begin(), b.end());
  return a;
}

std::string model_name(const RunConfig& cfg, const ChatBackend& backend) {
  return cfg.mock.empty() ? cfg.llm.model_name : backend.describe();
}

}  // namespace

IngestSummary run_ingest(const RunConfig& cfg, const fs::path& dataset) {
  const auto items = load_dataset(dataset, cfg.label_mapping);
  IngestSummary summary;
  summary.items = items.size();
  std::vector<std::string> lines;
  for (const auto& item : items) {
    if (item.label) {
      ++summary.label_counts[index_of(*item.label)];
    } else {
      ++summary.unlabeled;
    }
    lines.push_back(to_jsonl_line(item));
  }
  const fs::path out_dir = fs::path(cfg.out_dir) / "ingest";
  write_lines(out_dir / (dataset.stem().string() + ".jsonl"), lines);
  json doc;
  doc["config_hash"] = cfg.config_hash();
  doc["dataset"] = dataset.filename().string();
  doc["scheme"] = std::string(cfg.label_mapping.name());
  doc["items"] = summary.items;
  doc["unlabeled"] = summary.unlabeled;
  doc["label_counts"] = {{"liberal", summary.label_counts[0]},
                         {"neutral", summary.label_counts[1]},
                         {"conservative", summary.label_counts[2]}};
  write_text(out_dir / (dataset.stem().string() + ".summary.json"), doc.dump(2));
  return summary;
}

EmbeddingIndex run_embed(const RunConfig& cfg) {
  auto items = load_split(cfg.train_path, cfg, "train");
  if (!cfg.test_path.empty()) items = concat(std::move(items), load_split(cfg.test_path, cfg, "test"));
  return embed_items(cfg, items);
}

std::string pool_key(const RunConfig& cfg) {
  json doc;
  doc["train"] = cfg.train_path;
  doc["labels"] = {std::string(cfg.label_mapping.name()), cfg.label_mapping.lo_cutoff,
                   cfg.label_mapping.hi_cutoff};
  doc["fields"] = cfg.fields.name();
  doc["pool"] = {{"size", cfg.pool_size}, {"probe_size", cfg.probe_size}};
  doc["seed"] = cfg.seed;
  doc["embeddings"] = {{"kind", cfg.embed_kind},
                       {"location", cfg.embed_location},
                       {"dim", cfg.embed_dim},
                       {"token_weights", cfg.token_weighting == TokenWeighting::token_weights}};
  return sha256_hex(doc.dump()).substr(0, 16);
}

CandidatePool run_pool(const RunConfig& cfg, const EmbeddingIndex* embeddings) {
  const auto train = load_split(cfg.train_path, cfg, "train");
  EmbeddingIndex local;
  if (!embeddings) {
    local = embed_items(cfg, train);
    embeddings = &local;
  }
  if (!cfg.pool_path.empty()) {
    auto pool = read_pool(cfg.pool_path);
    pool.resolve(*embeddings);
    return pool;
  }

  const fs::path path = fs::path(cfg.out_dir) / ("pool_" + cfg.fields.name() + ".jsonl");
  const std::string key = pool_key(cfg);
  if (fs::exists(path)) {
    std::string stored_key;
    try {
      auto pool = read_pool(path, &stored_key);
      if (stored_key == key) {
        pool.resolve(*embeddings);
        return pool;
      }
    } catch (const Error& e) {
      spdlog::warn("ignoring unreadable pool file {}: {}", path.string(), e.what());
    }
  }
  PoolBuildConfig build{cfg.pool_size, cfg.probe_size, cfg.seed};
  PoolBuildOptions options;
  options.weighting = cfg.token_weighting;
  auto pool = build_candidate_pool(train, *embeddings, build, options);
  fs::create_directories(cfg.out_dir);
  write_pool(path, pool, key);
  return pool;
}

RunResult run_classify(const RunConfig& cfg, ChatBackend* backend, bool dump_prompts) {
  cfg.validate();
  const auto train = load_split(cfg.train_path, cfg, "train");
  const auto test = load_split(cfg.test_path, cfg, "test");
  const auto embeddings = embed_items(cfg, concat(train, test));
  const auto pool = run_pool(cfg, &embeddings);

  std::unique_ptr<ChatBackend> owned;
  if (!backend) {
    owned = make_chat_backend(cfg);
    backend = owned.get();
  }
  LLMConfig llm = cfg.llm;
  const std::string hash = cfg.config_hash();

  RunResult result;
  result.outcome = classify_items(train, test, embeddings, pool, settings_from(cfg), *backend, llm, hash);
  if (result.outcome.fallback_count > 0) {
    spdlog::info("{} of {} queries needed the quota fallback", result.outcome.fallback_count, test.size());
  }
  result.report = score(result.outcome.predictions, descriptor_from(cfg, model_name(cfg, *backend)),
                        {cfg.bootstrap_resamples, cfg.seed});

  const fs::path out(cfg.out_dir);
  write_predictions(out / "predictions.jsonl", result.outcome.predictions);
  write_lines(out / "selections.jsonl", result.outcome.selection_traces);
  if (dump_prompts) write_lines(out / "prompts.jsonl", result.outcome.prompt_dumps);
  write_text(out / "report.json", report_json(result.report));
  json effective = cfg.to_json();
  effective["config_hash"] = hash;
  write_text(out / "run_config.json", effective.dump(2));
  return result;
}

EvalReport run_eval(const std::vector<fs::path>& prediction_files, const ReportDescriptor& descriptor,
                    const BootstrapOptions& bootstrap, const fs::path& out_path) {
  std::vector<PredictionRecord> records;
  for (const auto& file : prediction_files) {
    auto part = read_predictions(file);
    records.insert(records.end(), part.begin(), part.end());
  }
  auto report = score(records, descriptor, bootstrap);
  if (!out_path.empty()) write_text(out_path, report_json(report));
  return report;
}

McNemarResult run_compare(const fs::path& a, const fs::path& b, McNemarMethod method,
                          const fs::path& out_path) {
  const auto records_a = read_predictions(a);
  const auto records_b = read_predictions(b);
  const auto result = mcnemar(records_a, records_b, method);
  auto label = [](const fs::path& path, const std::vector<PredictionRecord>& records) {
    return records.empty() ? path.string() : records.front().config_hash;
  };
  if (!out_path.empty()) {
    write_text(out_path, comparison_json(label(a, records_a), label(b, records_b), result, method));
  }
  return result;
}

std::vector<EvalReport> run_ablate(const RunConfig& cfg, ChatBackend* backend) {
  cfg.validate();
  const auto train = load_split(cfg.train_path, cfg, "train");
  const auto test = load_split(cfg.test_path, cfg, "test");
  std::unique_ptr<ChatBackend> owned;
  if (!backend) {
    owned = make_chat_backend(cfg);
    backend = owned.get();
  }

  std::vector<EvalReport> reports;
  json summary = json::array();
  for (const FieldConfig& fields : kAblationFieldConfigs) {
    RunConfig field_cfg = cfg;
    field_cfg.fields = fields;
    const auto embeddings = embed_items(field_cfg, concat(train, test));
    const auto pool = run_pool(field_cfg, &embeddings);
    for (int k : kAblationShots) {
      RunConfig cell = field_cfg;
      cell.k = k;
      const std::string hash = cell.config_hash();
      auto outcome = classify_items(train, test, embeddings, pool, settings_from(cell), *backend,
                                    cell.llm, hash);
      auto report = score(outcome.predictions, descriptor_from(cell, model_name(cell, *backend)),
                          {cell.bootstrap_resamples, cell.seed});
      const fs::path dir = fs::path(cfg.out_dir) / "ablate" / ("k" + std::to_string(k) + "_" + fields.name());
      fs::create_directories(dir);
      write_predictions(dir / "predictions.jsonl", outcome.predictions);
      write_lines(dir / "selections.jsonl", outcome.selection_traces);
      write_text(dir / "report.json", report_json(report));
      summary.push_back({{"k", k},
                         {"fields", fields.name()},
                         {"config_hash", hash},
                         {"accuracy", report.accuracy},
                         {"ci95", {report.ci_lo, report.ci_hi}}});
      reports.push_back(std::move(report));
    }
  }
  write_text(fs::path(cfg.out_dir) / "ablate" / "summary.json", summary.dump(2));
  return reports;
}

EvalReport run_baseline(const RunConfig& cfg, int epochs) {
  const auto train = load_split(cfg.train_path, cfg, "train");
  const auto test = load_split(cfg.test_path, cfg, "test");
  const auto embeddings = embed_items(cfg, concat(train, test));
  MLPHyper hyper;
  hyper.input_dim = cfg.embed_dim;
  hyper.epochs = epochs;
  hyper.seed = cfg.seed;
  const MLPModel model = mlp_train(train, embeddings, hyper);

  const std::string hash = cfg.config_hash();
  std::vector<PredictionRecord> records;
  for (const auto& item : test) {
    PredictionRecord r;
    r.query_id = item.id;
    r.gold = item.label;
    r.pred = mlp_predict(model, embeddings.at(item.id).sentence());
    r.raw_response = std::string(to_string(*r.pred));
    r.status = ParseStatus::ok;
    r.config_hash = hash;
    records.push_back(std::move(r));
  }
  std::sort(records.begin(), records.end(),
            [](const auto& a, const auto& b) { return a.query_id < b.query_id; });
  ReportDescriptor d = descriptor_from(cfg, "mlp");
  d.k = 0;
  d.selection = "none";
  d.ordering = "none";
  auto report = score(records, d, {cfg.bootstrap_resamples, cfg.seed});
  const fs::path dir = fs::path(cfg.out_dir) / "baseline";
  fs::create_directories(dir);
  write_predictions(dir / "predictions.jsonl", records);
  write_text(dir / "report.json", report_json(report));
  return report;
}

}  // namespace iclsel
