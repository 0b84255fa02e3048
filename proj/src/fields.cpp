#include "iclsel/fields.hpp"

#include "iclsel/digest.hpp"
#include "iclsel/error.hpp"

namespace iclsel {

FieldConfig FieldConfig::from_name(std::string_view name) {
  if (name == "title") return title_only();
  if (name == "title-source") return title_source();
  if (name == "title-desc") return title_description();
  if (name == "title-source-desc") return title_source_description();
  throw Error("config", "unknown field configuration '" + std::string(name) + "'");
}

std::string FieldConfig::name() const {
  std::string out;
  auto append = [&out](const char* part) {
    if (!out.empty()) out += '-';
    out += part;
  };
  if (include_title) append("title");
  if (include_source) append("source");
  if (include_description) append("desc");
  return out;
}

void FieldConfig::validate() const {
  if (!include_title && !include_source && !include_description) {
    throw Error("config", "field configuration must include at least one field");
  }
}

std::string render_field_text(const ContentItem& item, const FieldConfig& config) {
  config.validate();
  std::string text;
  auto append = [&text](const std::string& value) {
    if (value.empty()) return;
    if (!text.empty()) text += '\n';
    text += value;
  };
  if (config.include_title) append(item.title);
  if (config.include_source && item.source) append(*item.source);
  if (config.include_description && item.description) append(*item.description);
  if (text.empty()) {
    throw Error("empty_text", "item '" + item.id + "' has none of the configured fields");
  }
  return text;
}

std::string fields_hash(const ContentItem& item, const FieldConfig& config) {
  return sha256_hex(config.name() + '\n' + render_field_text(item, config)).substr(0, 16);
}

}  // namespace iclsel
