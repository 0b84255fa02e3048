#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "iclsel/coverage.hpp"
#include "iclsel/ideology.hpp"

namespace iclsel {

struct DemonstrationMember {
  std::string item_id;
  Ideology label = Ideology::Neutral;
  std::size_t rank = 0;  // 1-based position in the ordering it was taken from
};

struct DemonstrationSet {
  std::string query_id;
  std::vector<DemonstrationMember> members;  // admission order
  std::size_t k_requested = 0;
};

// Full record of one balanced pick, for the selection trace.
struct SelectionResult {
  DemonstrationSet demos;
  std::vector<DemonstrationMember> skipped;  // skipped by the quota pass
  bool fallback_used = false;
};

// Per-class admission cap: the smallest quota that admits k across 3 labels.
constexpr std::size_t class_quota(std::size_t k) { return (k + kNumIdeologies - 1) / kNumIdeologies; }

// Walks the ordering admitting an entry only while its class is below
// class_quota(k). If the ordering runs out first, a fill pass admits the
// best-ranked skipped entries regardless of class.
SelectionResult balanced_select(const QueryOrdering& ordering, int k);

// Uniform sample of k pool entries without replacement; rank is the pool rank.
DemonstrationSet random_select(const CandidatePool& pool, int k, std::uint64_t seed,
                               std::string query_id = {});

enum class SelectionMode { balanced, random };
SelectionMode selection_mode_from_name(std::string_view name);  // "balanced" | "random"
std::string_view selection_mode_name(SelectionMode mode);

// {"query_id", "k", "members": [...], "skipped": [...], "fallback_used"}
std::string selection_trace_json(const SelectionResult& result);

}  // namespace iclsel
