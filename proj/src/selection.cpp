#include "iclsel/selection.hpp"

#include <spdlog/spdlog.h>

#include <array>
#include <json.hpp>

#include "iclsel/error.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

using nlohmann::json;

SelectionResult balanced_select(const QueryOrdering& ordering, int k) {
  if (k < 0) throw Error("config", "number of demonstrations must be non-negative");
  const auto wanted = static_cast<std::size_t>(k);
  const std::size_t quota = class_quota(wanted);

  SelectionResult result;
  result.demos.query_id = ordering.query_id;
  result.demos.k_requested = wanted;
  if (wanted == 0) return result;
  if (ordering.ranked.empty()) throw Error("empty_pool", "cannot select from an empty ordering");

  std::array<std::size_t, kNumIdeologies> counts{};
  for (std::size_t r = 0; r < ordering.ranked.size() && result.demos.members.size() < wanted; ++r) {
    const auto& cand = ordering.ranked[r];
    DemonstrationMember member{cand.item_id, cand.label, r + 1};
    auto& count = counts[index_of(cand.label)];
    if (count < quota) {
      ++count;
      result.demos.members.push_back(std::move(member));
    } else {
      result.skipped.push_back(std::move(member));
    }
  }

  if (result.demos.members.size() < wanted && !result.skipped.empty()) {
    result.fallback_used = true;
    spdlog::info("query '{}': class quota left {} of {} slots empty, filling from skipped entries",
                 ordering.query_id, wanted - result.demos.members.size(), wanted);
    for (const auto& member : result.skipped) {
      if (result.demos.members.size() == wanted) break;
      result.demos.members.push_back(member);
    }
  }
  return result;
}

DemonstrationSet random_select(const CandidatePool& pool, int k, std::uint64_t seed,
                               std::string query_id) {
  if (k < 0) throw Error("config", "number of demonstrations must be non-negative");
  if (static_cast<std::size_t>(k) > pool.size()) {
    throw Error("config", "cannot sample " + std::to_string(k) + " demonstrations from a pool of " +
                              std::to_string(pool.size()));
  }
  DemonstrationSet demos;
  demos.query_id = std::move(query_id);
  demos.k_requested = static_cast<std::size_t>(k);
  for (std::size_t i : sample_without_replacement(pool.size(), demos.k_requested, seed)) {
    demos.members.push_back({pool.entries[i].item_id, pool.entries[i].label, i + 1});
  }
  return demos;
}

SelectionMode selection_mode_from_name(std::string_view name) {
  if (name == "balanced") return SelectionMode::balanced;
  if (name == "random") return SelectionMode::random;
  throw Error("config", "unknown selection mode '" + std::string(name) + "'");
}

std::string_view selection_mode_name(SelectionMode mode) {
  return mode == SelectionMode::balanced ? "balanced" : "random";
}

std::string selection_trace_json(const SelectionResult& result) {
  auto members_json = [](const std::vector<DemonstrationMember>& members) {
    json arr = json::array();
    for (const auto& m : members) {
      arr.push_back({{"id", m.item_id}, {"label", std::string(to_string(m.label))}, {"rank", m.rank}});
    }
    return arr;
  };
  json doc;
  doc["query_id"] = result.demos.query_id;
  doc["k"] = result.demos.k_requested;
  doc["members"] = members_json(result.demos.members);
  doc["skipped"] = members_json(result.skipped);
  doc["fallback_used"] = result.fallback_used;
  return doc.dump();
}

}  // namespace iclsel
