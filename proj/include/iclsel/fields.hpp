#pragma once

#include <string>
#include <string_view>

#include "iclsel/corpus.hpp"

namespace iclsel {

// Which item fields are rendered into prompts and embedded for coverage.
struct FieldConfig {
  bool include_title = true;
  bool include_source = false;
  bool include_description = false;

  static FieldConfig title_only() { return {true, false, false}; }
  static FieldConfig title_source() { return {true, true, false}; }
  static FieldConfig title_description() { return {true, false, true}; }
  static FieldConfig title_source_description() { return {true, true, true}; }

  // "title" | "title-source" | "title-desc" | "title-source-desc"
  static FieldConfig from_name(std::string_view name);
  std::string name() const;

  void validate() const;

  friend bool operator==(const FieldConfig&, const FieldConfig&) = default;
};

// The four combinations swept by the metadata ablation, in sweep order.
inline constexpr FieldConfig kAblationFieldConfigs[] = {
    {true, false, false}, {true, true, false}, {true, false, true}, {true, true, true}};

// Configured fields of `item`, one per line in title/source/description
// order. Absent fields are skipped. Throws if nothing is left.
std::string render_field_text(const ContentItem& item, const FieldConfig& config);

// Cache key component: digest of the field configuration and the rendered
// text, so a config change or an edited item never hits a stale entry.
std::string fields_hash(const ContentItem& item, const FieldConfig& config);

}  // namespace iclsel
