#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <json.hpp>
#include <optional>
#include <string>

#include "iclsel/corpus.hpp"
#include "iclsel/coverage.hpp"
#include "iclsel/fields.hpp"
#include "iclsel/llm_gateway.hpp"
#include "iclsel/selection.hpp"

namespace iclsel {

// Everything that determines a run's artifacts. Loaded from one JSON file;
// command-line flags override individual values afterwards.
struct RunConfig {
  std::string train_path;
  std::string test_path;
  LabelMapping label_mapping = LabelMapping::direct();

  FieldConfig fields = FieldConfig::title_only();
  int k = 8;
  SelectionMode selection = SelectionMode::balanced;
  OrderingMode ordering = OrderingMode::set_bsr_greedy;
  TokenWeighting token_weighting = TokenWeighting::uniform;

  std::size_t pool_size = 500;
  std::size_t probe_size = 2000;
  std::string pool_path;  // reuse an existing pool file instead of building
  std::uint64_t seed = 0;

  std::string embed_kind = "precomputed";  // "precomputed" | "http"
  std::string embed_location;
  std::size_t embed_dim = 384;
  std::string cache_dir;  // default: <out_dir>/cache

  std::string mock;  // empty: use the HTTP endpoint
  LLMConfig llm;
  bool cot = false;

  std::size_t bootstrap_resamples = 1000;
  std::string out_dir = "out";

  // Relative paths in `doc` are resolved against `base_dir`.
  static RunConfig from_json(const nlohmann::json& doc,
                             const std::filesystem::path& base_dir = {});
  static RunConfig load(const std::filesystem::path& path);

  // Full effective configuration (api key omitted).
  nlohmann::json to_json() const;

  // Digest of the canonical serialization minus output locations, so the
  // same experiment written to two directories has one hash.
  std::string config_hash() const;

  std::filesystem::path effective_cache_dir() const;
  void validate() const;
};

}  // namespace iclsel
