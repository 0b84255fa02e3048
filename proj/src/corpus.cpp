#include "iclsel/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <istream>
#include <json.hpp>
#include <sstream>
#include <unordered_set>

#include "iclsel/error.hpp"

namespace iclsel {

using nlohmann::json;

LabelMapping LabelMapping::from_name(std::string_view name) {
  if (name == "youtube_slant") return youtube_slant();
  if (name == "adfontes") return adfontes();
  if (name == "direct") return direct();
  throw Error("config", "unknown label scheme '" + std::string(name) + "'");
}

std::string_view LabelMapping::name() const {
  switch (scheme) {
    case Scheme::youtube_slant:
      return "youtube_slant";
    case Scheme::adfontes:
      return "adfontes";
    case Scheme::direct:
      return "direct";
  }
  return "direct";
}

Ideology map_label(double raw_score, const LabelMapping& mapping) {
  if (mapping.scheme == LabelMapping::Scheme::direct) {
    throw Error("label_mapping", "direct labelling scheme has no score cutoffs");
  }
  if (!(mapping.lo_cutoff < mapping.hi_cutoff)) {
    throw Error("label_mapping", "label cutoffs must satisfy lo < hi");
  }
  if (!std::isfinite(raw_score)) {
    throw Error("label_mapping", "score is not finite");
  }
  if (raw_score <= mapping.lo_cutoff) return Ideology::Liberal;
  if (raw_score >= mapping.hi_cutoff) return Ideology::Conservative;
  return Ideology::Neutral;
}

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_string()) throw std::invalid_argument(std::string("'") + key + "' must be a string");
  return it->get<std::string>();
}

std::optional<bool> optional_bool(const json& obj, const char* key) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_boolean()) throw std::invalid_argument(std::string("'") + key + "' must be a bool");
  return it->get<bool>();
}

ContentItem item_from_json(const json& obj, const LabelMapping& mapping) {
  if (!obj.is_object()) throw std::invalid_argument("record is not a JSON object");
  ContentItem item;
  auto id = optional_string(obj, "id");
  if (!id || id->empty()) throw std::invalid_argument("missing or empty 'id'");
  item.id = std::move(*id);
  auto title = optional_string(obj, "title");
  if (!title || title->empty()) throw Error("missing_title", "item '" + item.id + "' has no title");
  item.title = std::move(*title);
  item.source = optional_string(obj, "source");
  item.description = optional_string(obj, "description");

  if (auto label = optional_string(obj, "label")) {
    item.label = parse_ideology(*label);
    if (!item.label) throw std::invalid_argument("unknown label '" + *label + "'");
  }
  if (auto it = obj.find("score"); it != obj.end() && !it->is_null()) {
    if (!it->is_number()) throw std::invalid_argument("'score' must be a number");
    item.raw_score = it->get<double>();
  }
  if (!item.label && item.raw_score && mapping.scheme != LabelMapping::Scheme::direct) {
    item.label = map_label(*item.raw_score, mapping);
  }
  if (auto it = obj.find("flags"); it != obj.end() && !it->is_null()) {
    if (!it->is_object()) throw std::invalid_argument("'flags' must be an object");
    item.flags.political = optional_bool(*it, "political");
    item.flags.news_channel = optional_bool(*it, "news_channel");
  }
  return item;
}

std::string trim_whitespace(std::string_view text) {
  auto is_space = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && is_space(text[begin])) ++begin;
  while (end > begin && is_space(text[end - 1])) --end;
  return std::string(text.substr(begin, end - begin));
}

}  // namespace

std::vector<ContentItem> parse_dataset(std::istream& in, const LabelMapping& mapping) {
  std::vector<ContentItem> items;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim_whitespace(line).empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    ContentItem item;
    try {
      item = item_from_json(json::parse(line), mapping);
    } catch (const json::exception& e) {
      throw Error("malformed_json", where + e.what());
    } catch (const Error& e) {
      throw Error(e.code(), where + e.what());
    } catch (const std::invalid_argument& e) {
      throw Error("malformed_record", where + e.what());
    }
    if (!seen.insert(item.id).second) {
      throw Error("duplicate_id", where + "duplicate id '" + item.id + "'");
    }
    items.push_back(std::move(item));
  }
  return items;
}

std::vector<ContentItem> load_dataset(const std::filesystem::path& path,
                                      const LabelMapping& mapping) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open dataset " + path.string());
  return parse_dataset(in, mapping);
}

std::string to_jsonl_line(const ContentItem& item) {
  json obj;
  obj["id"] = item.id;
  obj["title"] = item.title;
  obj["source"] = item.source ? json(*item.source) : json(nullptr);
  obj["description"] = item.description ? json(*item.description) : json(nullptr);
  obj["label"] = item.label ? json(std::string(to_string(*item.label))) : json(nullptr);
  obj["score"] = item.raw_score ? json(*item.raw_score) : json(nullptr);
  json flags;
  flags["political"] = item.flags.political ? json(*item.flags.political) : json(nullptr);
  flags["news_channel"] = item.flags.news_channel ? json(*item.flags.news_channel) : json(nullptr);
  obj["flags"] = std::move(flags);
  return obj.dump();
}

FilterResult filter_subset(const std::vector<ContentItem>& items, std::optional<bool> political,
                           std::optional<bool> news_channel) {
  FilterResult result;
  for (const auto& item : items) {
    if ((political && !item.flags.political) || (news_channel && !item.flags.news_channel)) {
      ++result.skipped;
      continue;
    }
    if (political && *item.flags.political != *political) continue;
    if (news_channel && *item.flags.news_channel != *news_channel) continue;
    result.items.push_back(item);
  }
  return result;
}

std::string normalize_source(std::string_view source) {
  std::string out;
  out.reserve(source.size());
  bool pending_space = false;
  for (char ch : source) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(c)));
  }
  return out;
}

void SourceIdeologyMap::add(std::string_view source, Ideology ideology) {
  entries_[normalize_source(source)] = ideology;
}

std::optional<Ideology> SourceIdeologyMap::lookup(std::string_view source) const {
  auto it = entries_.find(normalize_source(source));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

SourceIdeologyMap SourceIdeologyMap::parse(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error("malformed_json", std::string("source map: ") + e.what());
  }
  if (!doc.is_object()) throw Error("malformed_record", "source map must be a JSON object");
  SourceIdeologyMap map;
  for (const auto& [name, value] : doc.items()) {
    auto lean = value.is_string() ? parse_ideology(value.get<std::string>()) : std::nullopt;
    if (!lean || *lean == Ideology::Neutral) {
      throw Error("malformed_record",
                  "source map entry '" + name + "' must be \"liberal\" or \"conservative\"");
    }
    map.add(name, *lean);
  }
  return map;
}

SourceIdeologyMap SourceIdeologyMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open source map " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str());
}

SourceIdeologyMap SourceIdeologyMap::reference_outlets() {
  static constexpr std::string_view kLiberal[] = {
      "ABC News",   "Associated Press", "CBC News",     "CBS News",          "CNN",
      "Daily Beast", "HuffPost",        "Jacobin",      "MSNBC",             "Mother Jones",
      "NPR",        "Slate",            "The Atlantic", "The Guardian",      "The Intercept",
      "The Nation", "The New York Times", "The New Yorker", "Vox"};
  static constexpr std::string_view kConservative[] = {
      "Breitbart",         "CBN",
      "Daily Caller",      "Daily Mail",
      "Daily Wire",        "Fox Business",
      "Fox News",          "New York Post",
      "Newsmax",           "The American Conservative",
      "The American Spectator", "The Blaze",
      "The Daily Caller",  "The Epoch Times",
      "The Federalist",    "The Federalist Society",
      "The Post Millennial", "The Washington Free Beacon",
      "Washington Examiner"};
  SourceIdeologyMap map;
  for (auto name : kLiberal) map.add(name, Ideology::Liberal);
  for (auto name : kConservative) map.add(name, Ideology::Conservative);
  return map;
}

std::vector<ContentItem> misleading_slice(const std::vector<ContentItem>& items,
                                          const SourceIdeologyMap& src_map, SourceSide side) {
  const Ideology lean =
      side == SourceSide::liberal_sources ? Ideology::Liberal : Ideology::Conservative;
  std::vector<ContentItem> out;
  for (const auto& item : items) {
    if (!item.source || !item.label) continue;
    auto source_lean = src_map.lookup(*item.source);
    if (!source_lean || *source_lean != lean) continue;
    if (*item.label != lean) out.push_back(item);
  }
  return out;
}

}  // namespace iclsel
