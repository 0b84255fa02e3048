#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "iclsel/corpus.hpp"
#include "iclsel/embedding.hpp"

namespace iclsel {

// Query-token weighting for coverage. `token_weights` uses provider-supplied
// per-token weights (IDF) when present and falls back to uniform otherwise.
enum class TokenWeighting { uniform, token_weights };

// Coverage of `query` by a single candidate: mean over query tokens of the
// best cosine similarity to any candidate token (BERTScore recall).
double bsr(const TokenEmbeddingSet& query, const TokenEmbeddingSet& cand,
           TokenWeighting weighting = TokenWeighting::uniform);

// Coverage by the union of tokens of every member of `set`. The empty set
// has coverage -1, so any first member has positive gain bsr + 1.
double set_coverage(const TokenEmbeddingSet& query, std::span<const TokenEmbeddingSet* const> set,
                    TokenWeighting weighting = TokenWeighting::uniform);

// For each query token, the max similarity to any token of `cand`.
std::vector<double> token_max_similarity(const TokenEmbeddingSet& query,
                                         const TokenEmbeddingSet& cand);

// Incrementally maintained set coverage of one query.
class CoverageState {
 public:
  explicit CoverageState(const TokenEmbeddingSet& query,
                         TokenWeighting weighting = TokenWeighting::uniform);

  double value() const;
  // Marginal gain of adding a member whose per-query-token best similarities
  // are `token_sims` (as returned by token_max_similarity).
  double gain(std::span<const double> token_sims) const;
  void add(std::span<const double> token_sims);

 private:
  std::vector<double> weights_;
  std::vector<double> best_;
};

struct PoolBuildConfig {
  std::size_t pool_size = 0;
  std::size_t probe_size = 2000;
  std::uint64_t seed = 0;
};

struct PoolEntry {
  std::string item_id;
  Ideology label = Ideology::Neutral;
  double gain = 0.0;  // marginal probe-coverage gain when the entry was added
  std::shared_ptr<const TokenEmbeddingSet> embedding;  // null until resolved
};

// Candidate demonstrations in greedy construction order.
struct CandidatePool {
  PoolBuildConfig build_config;
  std::vector<PoolEntry> entries;

  std::size_t size() const { return entries.size(); }
  // Attaches embeddings from `index`; throws if any entry is missing.
  void resolve(const EmbeddingIndex& index);
};

struct PoolBuildOptions {
  TokenWeighting weighting = TokenWeighting::uniform;
  // Probe-token x candidate similarity table is precomputed when it fits in
  // this many floats; otherwise similarities are recomputed per evaluation.
  std::size_t similarity_cache_floats = std::size_t{32} << 20;
};

// Greedy facility-location selection: a seeded probe sample of the training
// set is the coverage target and members are added by largest marginal gain
// in mean probe coverage (ties to the lower training index) until
// pool_size members are chosen.
CandidatePool build_candidate_pool(const std::vector<ContentItem>& train,
                                   const EmbeddingIndex& embeddings, const PoolBuildConfig& config,
                                   const PoolBuildOptions& options = {});

// Mean set coverage of probe items by `members`; exposed for diagnostics.
double probe_coverage(std::span<const TokenEmbeddingSet* const> probes,
                      std::span<const TokenEmbeddingSet* const> members,
                      TokenWeighting weighting = TokenWeighting::uniform);

// Probe sample indices (into `train`) that build_candidate_pool uses.
std::vector<std::size_t> probe_indices(std::size_t train_size, const PoolBuildConfig& config);

void write_pool(const std::filesystem::path& path, const CandidatePool& pool,
                const std::string& config_hash);
// Reads entries back without embeddings; call resolve() before ordering.
CandidatePool read_pool(const std::filesystem::path& path, std::string* config_hash = nullptr);

enum class OrderingMode { set_bsr_greedy, independent_bsr };

OrderingMode ordering_mode_from_name(std::string_view name);  // "set-bsr" | "bsr"
std::string_view ordering_mode_name(OrderingMode mode);

struct RankedCandidate {
  std::size_t pool_index = 0;
  std::string item_id;
  Ideology label = Ideology::Neutral;
  double marginal_gain = 0.0;
  double cumulative_coverage = 0.0;
  double bsr = 0.0;
};

struct QueryOrdering {
  std::string query_id;
  std::vector<RankedCandidate> ranked;
};

// Below this marginal gain the greedy ordering is exhausted and the rest of
// the pool follows in descending independent BSR order.
inline constexpr double kExhaustedGain = 1e-9;

QueryOrdering order_for_query(const TokenEmbeddingSet& query, const CandidatePool& pool,
                              OrderingMode mode,
                              TokenWeighting weighting = TokenWeighting::uniform);

}  // namespace iclsel
