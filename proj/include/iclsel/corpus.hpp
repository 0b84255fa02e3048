#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iclsel/ideology.hpp"

namespace iclsel {

struct ContentFlags {
  std::optional<bool> political;
  std::optional<bool> news_channel;
};

// One classifiable unit: a video, post or news article.
struct ContentItem {
  std::string id;
  std::string title;
  std::optional<std::string> source;
  std::optional<std::string> description;
  std::optional<Ideology> label;
  std::optional<double> raw_score;
  ContentFlags flags;
};

// How a dataset-native score becomes a label. Cutoffs are inclusive toward
// the extreme labels: score <= lo is Liberal, score >= hi is Conservative.
struct LabelMapping {
  enum class Scheme { youtube_slant, adfontes, direct };

  Scheme scheme = Scheme::direct;
  double lo_cutoff = 0.0;
  double hi_cutoff = 0.0;

  static LabelMapping youtube_slant() { return {Scheme::youtube_slant, -0.33, 0.33}; }
  static LabelMapping adfontes() { return {Scheme::adfontes, -14.0, 14.0}; }
  static LabelMapping direct() { return {Scheme::direct, 0.0, 0.0}; }

  // Accepts "youtube_slant", "adfontes", "direct".
  static LabelMapping from_name(std::string_view name);
  std::string_view name() const;
};

Ideology map_label(double raw_score, const LabelMapping& mapping);

// Parses dataset JSONL. Blank lines are ignored; every other line must be a
// JSON object. Errors carry the 1-based line number.
std::vector<ContentItem> parse_dataset(std::istream& in, const LabelMapping& mapping);
std::vector<ContentItem> load_dataset(const std::filesystem::path& path,
                                      const LabelMapping& mapping);

// Serialized in the same JSONL schema load_dataset reads.
std::string to_jsonl_line(const ContentItem& item);

struct FilterResult {
  std::vector<ContentItem> items;
  std::size_t skipped = 0;  // items lacking a flag that a criterion required
};

FilterResult filter_subset(const std::vector<ContentItem>& items, std::optional<bool> political,
                           std::optional<bool> news_channel);

// Lowercase, trim, collapse internal whitespace runs to one space.
std::string normalize_source(std::string_view source);

class SourceIdeologyMap {
 public:
  SourceIdeologyMap() = default;

  void add(std::string_view source, Ideology ideology);

  // nullopt means "unknown": never a default ideology.
  std::optional<Ideology> lookup(std::string_view source) const;

  std::size_t size() const { return entries_.size(); }

  // JSON object {source_name: "liberal"|"conservative"}.
  static SourceIdeologyMap load(const std::filesystem::path& path);
  static SourceIdeologyMap parse(std::string_view json_text);

  // The liberal/conservative outlet list used for the misleading-source
  // analysis of the three reference datasets.
  static SourceIdeologyMap reference_outlets();

 private:
  std::unordered_map<std::string, Ideology> entries_;
};

enum class SourceSide { liberal_sources, conservative_sources };

// Items whose source leans one way while their gold label does not.
std::vector<ContentItem> misleading_slice(const std::vector<ContentItem>& items,
                                          const SourceIdeologyMap& src_map, SourceSide side);

}  // namespace iclsel
