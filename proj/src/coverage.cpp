#include "iclsel/coverage.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <fstream>
#include <json.hpp>
#include <limits>
#include <numeric>
#include <queue>
#include <unordered_set>

#include "iclsel/error.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

using nlohmann::json;

namespace {

double dot(std::span<const float> a, std::span<const float> b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += static_cast<double>(a[i]) * b[i];
  return acc;
}

void require_same_dim(const TokenEmbeddingSet& a, const TokenEmbeddingSet& b) {
  if (a.dim() != b.dim()) {
    throw Error("dimension_mismatch", "items '" + a.item_id() + "' and '" + b.item_id() +
                                          "' have different embedding dimensions");
  }
}

std::vector<double> query_weights(const TokenEmbeddingSet& query, TokenWeighting weighting) {
  const std::size_t n = query.n_tokens();
  auto supplied = query.token_weights();
  if (weighting == TokenWeighting::token_weights && supplied.size() == n) {
    double total = 0.0;
    for (float w : supplied) total += w;
    if (total > 0.0) {
      std::vector<double> out(n);
      for (std::size_t i = 0; i < n; ++i) out[i] = supplied[i] / total;
      return out;
    }
  }
  return std::vector<double>(n, 1.0 / static_cast<double>(n));
}

// Greedy maximization with lazily re-evaluated upper bounds. Valid for
// submodular objectives: a stale bound never underestimates the true gain.
// Picks the largest gain, ties to the lower index, until `max_picks` items
// are taken or the best available gain is <= `stop_at_or_below`.
struct GreedyPick {
  std::size_t index;
  double gain;
};

template <class GainFn, class AddFn>
std::vector<GreedyPick> lazy_greedy(std::size_t n, std::size_t max_picks, double stop_at_or_below,
                                    GainFn&& gain, AddFn&& add) {
  struct Node {
    double bound;
    std::size_t index;
    std::size_t round;
  };
  auto worse = [](const Node& a, const Node& b) {
    if (a.bound != b.bound) return a.bound < b.bound;
    return a.index > b.index;
  };
  std::priority_queue<Node, std::vector<Node>, decltype(worse)> heap(worse);
  for (std::size_t i = 0; i < n; ++i) heap.push({gain(i), i, 0});

  std::vector<GreedyPick> picks;
  std::size_t round = 0;
  while (picks.size() < max_picks && !heap.empty()) {
    Node top = heap.top();
    heap.pop();
    if (top.round == round) {
      if (top.bound <= stop_at_or_below) break;
      add(top.index);
      picks.push_back({top.index, top.bound});
      ++round;
    } else {
      top.bound = gain(top.index);
      top.round = round;
      heap.push(top);
    }
  }
  return picks;
}

}  // namespace

std::vector<double> token_max_similarity(const TokenEmbeddingSet& query,
                                         const TokenEmbeddingSet& cand) {
  require_same_dim(query, cand);
  std::vector<double> best(query.n_tokens(), -std::numeric_limits<double>::infinity());
  for (std::size_t i = 0; i < query.n_tokens(); ++i) {
    const auto q = query.token(i);
    for (std::size_t j = 0; j < cand.n_tokens(); ++j) best[i] = std::max(best[i], dot(q, cand.token(j)));
  }
  return best;
}

double bsr(const TokenEmbeddingSet& query, const TokenEmbeddingSet& cand, TokenWeighting weighting) {
  const auto sims = token_max_similarity(query, cand);
  const auto weights = query_weights(query, weighting);
  double total = 0.0;
  for (std::size_t i = 0; i < sims.size(); ++i) total += weights[i] * sims[i];
  return total;
}

double set_coverage(const TokenEmbeddingSet& query, std::span<const TokenEmbeddingSet* const> set,
                    TokenWeighting weighting) {
  CoverageState state(query, weighting);
  for (const auto* member : set) state.add(token_max_similarity(query, *member));
  return state.value();
}

CoverageState::CoverageState(const TokenEmbeddingSet& query, TokenWeighting weighting)
    : weights_(query_weights(query, weighting)), best_(query.n_tokens(), -1.0) {}

double CoverageState::value() const {
  double total = 0.0;
  for (std::size_t i = 0; i < best_.size(); ++i) total += weights_[i] * best_[i];
  return total;
}

double CoverageState::gain(std::span<const double> token_sims) const {
  double total = 0.0;
  for (std::size_t i = 0; i < best_.size(); ++i) {
    if (token_sims[i] > best_[i]) total += weights_[i] * (token_sims[i] - best_[i]);
  }
  return total;
}

void CoverageState::add(std::span<const double> token_sims) {
  for (std::size_t i = 0; i < best_.size(); ++i) best_[i] = std::max(best_[i], token_sims[i]);
}

void CandidatePool::resolve(const EmbeddingIndex& index) {
  for (auto& entry : entries) {
    entry.embedding = index.share(entry.item_id);
    if (!entry.embedding) {
      throw Error("missing_embedding", "no embedding for pool entry '" + entry.item_id + "'");
    }
  }
}

std::vector<std::size_t> probe_indices(std::size_t train_size, const PoolBuildConfig& config) {
  return sample_without_replacement(train_size, std::min(config.probe_size, train_size),
                                    config.seed);
}

double probe_coverage(std::span<const TokenEmbeddingSet* const> probes,
                      std::span<const TokenEmbeddingSet* const> members, TokenWeighting weighting) {
  if (probes.empty()) return 0.0;
  double total = 0.0;
  for (const auto* probe : probes) total += set_coverage(*probe, members, weighting);
  return total / static_cast<double>(probes.size());
}

CandidatePool build_candidate_pool(const std::vector<ContentItem>& train,
                                   const EmbeddingIndex& embeddings, const PoolBuildConfig& config,
                                   const PoolBuildOptions& options) {
  if (config.pool_size == 0) throw Error("config", "pool size must be positive");
  if (config.pool_size > train.size()) {
    throw Error("config", "pool size " + std::to_string(config.pool_size) +
                              " exceeds training set size " + std::to_string(train.size()));
  }
  std::vector<const TokenEmbeddingSet*> cands;
  cands.reserve(train.size());
  for (const auto& item : train) {
    if (!item.label) throw Error("missing_label", "training item '" + item.id + "' has no label");
    cands.push_back(&embeddings.at(item.id));
  }

  // Flatten probe tokens: every (probe, token) pair is one coverage target
  // weighted by its share of its probe, divided by the probe count.
  const auto probe_idx = probe_indices(train.size(), config);
  std::vector<const float*> target_vecs;
  std::vector<double> target_weights;
  const double probe_share = probe_idx.empty() ? 0.0 : 1.0 / static_cast<double>(probe_idx.size());
  for (std::size_t p : probe_idx) {
    const auto* probe = cands[p];
    const auto w = query_weights(*probe, options.weighting);
    for (std::size_t t = 0; t < probe->n_tokens(); ++t) {
      target_vecs.push_back(probe->token(t).data());
      target_weights.push_back(w[t] * probe_share);
    }
  }
  const std::size_t n_targets = target_vecs.size();
  const std::size_t dim = embeddings.dim();

  // Targets as columns; one candidate's row is then a small matrix product
  // followed by a column-wise max over its tokens.
  Eigen::MatrixXd targets(dim, n_targets);
  for (std::size_t t = 0; t < n_targets; ++t) {
    for (std::size_t d = 0; d < dim; ++d) targets(d, t) = target_vecs[t][d];
  }
  auto compute_row = [&](std::size_t c, std::span<float> out) {
    const auto* cand = cands[c];
    const auto tokens = Eigen::Map<const Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic>>(
                            cand->token_data().data(), dim, cand->n_tokens())
                            .cast<double>();
    const Eigen::RowVectorXd best = (tokens.transpose() * targets).colwise().maxCoeff();
    for (std::size_t t = 0; t < n_targets; ++t) out[t] = static_cast<float>(best[t]);
  };

  const bool cached = cands.size() * n_targets <= options.similarity_cache_floats;
  std::vector<float> table;
  if (cached) {
    table.resize(cands.size() * n_targets);
    for (std::size_t c = 0; c < cands.size(); ++c) {
      compute_row(c, std::span<float>(table.data() + c * n_targets, n_targets));
    }
  }
  std::vector<float> scratch(cached ? 0 : n_targets);
  auto row = [&](std::size_t c) -> std::span<const float> {
    if (cached) return {table.data() + c * n_targets, n_targets};
    compute_row(c, scratch);
    return scratch;
  };

  std::vector<double> best(n_targets, -1.0);
  auto gain = [&](std::size_t c) {
    const auto sims = row(c);
    double total = 0.0;
    for (std::size_t t = 0; t < n_targets; ++t) {
      if (sims[t] > best[t]) total += target_weights[t] * (sims[t] - best[t]);
    }
    return total;
  };
  auto add = [&](std::size_t c) {
    const auto sims = row(c);
    for (std::size_t t = 0; t < n_targets; ++t) best[t] = std::max<double>(best[t], sims[t]);
  };

  // Stop threshold below any reachable gain: the pool is always filled to N.
  const auto picks = lazy_greedy(cands.size(), config.pool_size,
                                 -std::numeric_limits<double>::infinity(), gain, add);

  CandidatePool pool;
  pool.build_config = config;
  pool.entries.reserve(picks.size());
  for (const auto& pick : picks) {
    const auto& item = train[pick.index];
    pool.entries.push_back({item.id, *item.label, pick.gain, embeddings.share(item.id)});
  }
  return pool;
}

void write_pool(const std::filesystem::path& path, const CandidatePool& pool,
                const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write pool file " + path.string());
  json header;
  header["build_config"] = {{"pool_size", pool.build_config.pool_size},
                            {"probe_size", pool.build_config.probe_size},
                            {"seed", pool.build_config.seed}};
  header["config_hash"] = config_hash;
  header["count"] = pool.entries.size();
  out << header.dump() << '\n';
  for (std::size_t i = 0; i < pool.entries.size(); ++i) {
    const auto& entry = pool.entries[i];
    json line = {{"id", entry.item_id},
                 {"label", std::string(to_string(entry.label))},
                 {"rank", i + 1},
                 {"gain", entry.gain}};
    out << line.dump() << '\n';
  }
}

CandidatePool read_pool(const std::filesystem::path& path, std::string* config_hash) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open pool file " + path.string());
  CandidatePool pool;
  std::string line;
  std::size_t line_no = 0;
  std::unordered_set<std::string> seen;
  try {
    if (!std::getline(in, line)) throw Error("malformed_pool", path.string() + ": empty pool file");
    ++line_no;
    const json header = json::parse(line);
    const auto& cfg = header.at("build_config");
    pool.build_config.pool_size = cfg.at("pool_size").get<std::size_t>();
    pool.build_config.probe_size = cfg.at("probe_size").get<std::size_t>();
    pool.build_config.seed = cfg.at("seed").get<std::uint64_t>();
    if (config_hash) *config_hash = header.value("config_hash", std::string());
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const json rec = json::parse(line);
      PoolEntry entry;
      entry.item_id = rec.at("id").get<std::string>();
      auto label = parse_ideology(rec.at("label").get<std::string>());
      if (!label) throw Error("malformed_pool", "bad label");
      entry.label = *label;
      entry.gain = rec.at("gain").get<double>();
      if (rec.at("rank").get<std::size_t>() != pool.entries.size() + 1) {
        throw Error("malformed_pool", "ranks are not consecutive");
      }
      if (!seen.insert(entry.item_id).second) throw Error("malformed_pool", "duplicate id");
      pool.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw Error("malformed_pool", path.string() + " line " + std::to_string(line_no) + ": " + e.what());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + " line " + std::to_string(line_no) + ": " + e.what());
  }
  return pool;
}

OrderingMode ordering_mode_from_name(std::string_view name) {
  if (name == "set-bsr") return OrderingMode::set_bsr_greedy;
  if (name == "bsr") return OrderingMode::independent_bsr;
  throw Error("config", "unknown ordering mode '" + std::string(name) + "'");
}

std::string_view ordering_mode_name(OrderingMode mode) {
  return mode == OrderingMode::set_bsr_greedy ? "set-bsr" : "bsr";
}

QueryOrdering order_for_query(const TokenEmbeddingSet& query, const CandidatePool& pool,
                              OrderingMode mode, TokenWeighting weighting) {
  if (pool.entries.empty()) throw Error("empty_pool", "candidate pool is empty");
  const std::size_t m = pool.entries.size();
  const auto weights = query_weights(query, weighting);

  std::vector<std::vector<double>> sims(m);
  std::vector<double> scores(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& embedding = pool.entries[i].embedding;
    if (!embedding) {
      throw Error("missing_embedding", "pool entry '" + pool.entries[i].item_id + "' is unresolved");
    }
    sims[i] = token_max_similarity(query, *embedding);
    double s = 0.0;
    for (std::size_t t = 0; t < sims[i].size(); ++t) s += weights[t] * sims[i][t];
    scores[i] = s;
  }

  CoverageState state(query, weighting);
  std::vector<char> placed(m, 0);
  QueryOrdering ordering;
  ordering.query_id = query.item_id();
  ordering.ranked.reserve(m);
  auto emit = [&](std::size_t i, double gain) {
    state.add(sims[i]);
    placed[i] = 1;
    const auto& entry = pool.entries[i];
    ordering.ranked.push_back({i, entry.item_id, entry.label, gain, state.value(), scores[i]});
  };

  if (mode == OrderingMode::set_bsr_greedy) {
    lazy_greedy(
        m, m, kExhaustedGain, [&](std::size_t i) { return state.gain(sims[i]); },
        [&](std::size_t i) { emit(i, state.gain(sims[i])); });
  }

  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < m; ++i) {
    if (!placed[i]) rest.push_back(i);
  }
  std::stable_sort(rest.begin(), rest.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  for (std::size_t i : rest) emit(i, state.gain(sims[i]));
  return ordering;
}

}  // namespace iclsel
