#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "iclsel/coverage.hpp"
#include "iclsel/embedding.hpp"
#include "iclsel/evaluation.hpp"
#include "iclsel/llm_gateway.hpp"
#include "iclsel/prompting.hpp"
#include "iclsel/run_config.hpp"
#include "iclsel/selection.hpp"

namespace iclsel {

// In-memory classification settings for one experiment cell.
struct ClassifySettings {
  FieldConfig fields = FieldConfig::title_only();
  int k = 8;
  SelectionMode selection = SelectionMode::balanced;
  OrderingMode ordering = OrderingMode::set_bsr_greedy;
  TokenWeighting weighting = TokenWeighting::uniform;
  std::uint64_t seed = 0;  // random selection stream
  RenderOptions render;
};

struct ClassifyOutcome {
  std::vector<PredictionRecord> predictions;  // sorted by query id
  std::vector<std::string> selection_traces;  // JSONL lines, same order
  std::vector<std::string> prompt_dumps;
  std::size_t fallback_count = 0;
};

// Select demonstrations, render prompts and query the backend for every
// test item. Embeddings must cover all test items and the pool must be
// resolved.
ClassifyOutcome classify_items(const std::vector<ContentItem>& train,
                               const std::vector<ContentItem>& test,
                               const EmbeddingIndex& embeddings, const CandidatePool& pool,
                               const ClassifySettings& settings, ChatBackend& backend,
                               const LLMConfig& llm, const std::string& config_hash);

ClassifySettings settings_from(const RunConfig& cfg);
ReportDescriptor descriptor_from(const RunConfig& cfg, const std::string& model);

std::unique_ptr<EmbeddingProvider> make_embedding_provider(const RunConfig& cfg);
std::unique_ptr<ChatBackend> make_chat_backend(const RunConfig& cfg);

// File-level stages behind the CLI subcommands. Each writes its artifacts
// under cfg.out_dir and stamps them with cfg.config_hash().

struct IngestSummary {
  std::size_t items = 0;
  std::size_t unlabeled = 0;
  std::array<std::size_t, kNumIdeologies> label_counts{};
};
IngestSummary run_ingest(const RunConfig& cfg, const std::filesystem::path& dataset);

EmbeddingIndex run_embed(const RunConfig& cfg);

// Builds the pool, or reuses <out>/pool.jsonl when its pool key matches.
CandidatePool run_pool(const RunConfig& cfg, const EmbeddingIndex* embeddings = nullptr);

// Key of everything that determines the candidate pool.
std::string pool_key(const RunConfig& cfg);

struct RunResult {
  ClassifyOutcome outcome;
  EvalReport report;
};
RunResult run_classify(const RunConfig& cfg, ChatBackend* backend = nullptr,
                       bool dump_prompts = false);

EvalReport run_eval(const std::vector<std::filesystem::path>& prediction_files,
                    const ReportDescriptor& descriptor, const BootstrapOptions& bootstrap,
                    const std::filesystem::path& out_path);

McNemarResult run_compare(const std::filesystem::path& a, const std::filesystem::path& b,
                          McNemarMethod method, const std::filesystem::path& out_path);

inline constexpr int kAblationShots[] = {0, 4, 8, 12};

// One report per (k, field configuration) cell, written to
// <out>/ablate/k<K>_<fields>/.
std::vector<EvalReport> run_ablate(const RunConfig& cfg, ChatBackend* backend = nullptr);

// Sentence-embedding MLP trained on the training set, scored on the test set.
EvalReport run_baseline(const RunConfig& cfg, int epochs);

void write_text(const std::filesystem::path& path, const std::string& content);
void write_lines(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace iclsel
