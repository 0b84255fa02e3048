#include "iclsel/run_config.hpp"

#include <fstream>

#include "iclsel/digest.hpp"
#include "iclsel/error.hpp"

namespace iclsel {

using nlohmann::json;

namespace {

std::string resolve(const std::string& value, const std::filesystem::path& base_dir) {
  if (value.empty() || base_dir.empty()) return value;
  std::filesystem::path p(value);
  return p.is_absolute() ? value : (base_dir / p).lexically_normal().string();
}

template <class T>
void read_if(const json& obj, const char* key, T& out) {
  if (auto it = obj.find(key); it != obj.end() && !it->is_null()) out = it->get<T>();
}

}  // namespace

RunConfig RunConfig::from_json(const json& doc, const std::filesystem::path& base_dir) {
  RunConfig cfg;
  try {
    if (auto it = doc.find("dataset"); it != doc.end()) {
      read_if(*it, "train", cfg.train_path);
      read_if(*it, "test", cfg.test_path);
      std::string scheme(cfg.label_mapping.name());
      read_if(*it, "scheme", scheme);
      cfg.label_mapping = LabelMapping::from_name(scheme);
      read_if(*it, "lo_cutoff", cfg.label_mapping.lo_cutoff);
      read_if(*it, "hi_cutoff", cfg.label_mapping.hi_cutoff);
    }
    if (auto it = doc.find("fields"); it != doc.end()) {
      cfg.fields = FieldConfig::from_name(it->get<std::string>());
    }
    read_if(doc, "k", cfg.k);
    if (auto it = doc.find("select"); it != doc.end()) {
      cfg.selection = selection_mode_from_name(it->get<std::string>());
    }
    if (auto it = doc.find("order"); it != doc.end()) {
      cfg.ordering = ordering_mode_from_name(it->get<std::string>());
    }
    if (auto it = doc.find("pool"); it != doc.end()) {
      read_if(*it, "size", cfg.pool_size);
      read_if(*it, "probe_size", cfg.probe_size);
      read_if(*it, "path", cfg.pool_path);
    }
    read_if(doc, "seed", cfg.seed);
    if (auto it = doc.find("embeddings"); it != doc.end()) {
      read_if(*it, "kind", cfg.embed_kind);
      read_if(*it, "location", cfg.embed_location);
      read_if(*it, "dim", cfg.embed_dim);
      read_if(*it, "cache_dir", cfg.cache_dir);
      bool weights = false;
      read_if(*it, "token_weights", weights);
      cfg.token_weighting = weights ? TokenWeighting::token_weights : TokenWeighting::uniform;
    }
    if (auto it = doc.find("llm"); it != doc.end()) {
      read_if(*it, "mock", cfg.mock);
      read_if(*it, "base_url", cfg.llm.base_url);
      read_if(*it, "model", cfg.llm.model_name);
      read_if(*it, "temperature", cfg.llm.temperature);
      read_if(*it, "max_in_flight", cfg.llm.max_in_flight);
      read_if(*it, "max_retries", cfg.llm.max_retries);
      int timeout = static_cast<int>(cfg.llm.timeout.count());
      read_if(*it, "timeout_s", timeout);
      cfg.llm.timeout = std::chrono::seconds(timeout);
      read_if(*it, "max_prompt_chars", cfg.llm.max_prompt_chars);
      std::string layout = "flat";
      read_if(*it, "layout", layout);
      if (layout != "flat" && layout != "chat") throw Error("config", "llm.layout must be flat or chat");
      cfg.llm.layout = layout == "chat" ? PromptLayout::chat : PromptLayout::flat;
    }
    read_if(doc, "cot", cfg.cot);
    read_if(doc, "bootstrap_resamples", cfg.bootstrap_resamples);
    read_if(doc, "out", cfg.out_dir);
  } catch (const json::exception& e) {
    throw Error("config", std::string("invalid config: ") + e.what());
  }
  cfg.train_path = resolve(cfg.train_path, base_dir);
  cfg.test_path = resolve(cfg.test_path, base_dir);
  cfg.pool_path = resolve(cfg.pool_path, base_dir);
  if (cfg.embed_kind == "precomputed") cfg.embed_location = resolve(cfg.embed_location, base_dir);
  cfg.cache_dir = resolve(cfg.cache_dir, base_dir);
  cfg.out_dir = resolve(cfg.out_dir, base_dir);
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open config " + path.string());
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw Error("config", path.string() + ": " + e.what());
  }
  return from_json(doc, path.parent_path());
}

json RunConfig::to_json() const {
  json doc;
  doc["dataset"] = {{"train", train_path},
                    {"test", test_path},
                    {"scheme", std::string(label_mapping.name())},
                    {"lo_cutoff", label_mapping.lo_cutoff},
                    {"hi_cutoff", label_mapping.hi_cutoff}};
  doc["fields"] = fields.name();
  doc["k"] = k;
  doc["select"] = std::string(selection_mode_name(selection));
  doc["order"] = std::string(ordering_mode_name(ordering));
  doc["pool"] = {{"size", pool_size}, {"probe_size", probe_size}, {"path", pool_path}};
  doc["seed"] = seed;
  doc["embeddings"] = {{"kind", embed_kind},
                       {"location", embed_location},
                       {"dim", embed_dim},
                       {"cache_dir", cache_dir},
                       {"token_weights", token_weighting == TokenWeighting::token_weights}};
  doc["llm"] = {{"mock", mock},
                {"base_url", llm.base_url},
                {"model", llm.model_name},
                {"temperature", llm.temperature},
                {"max_in_flight", llm.max_in_flight},
                {"max_retries", llm.max_retries},
                {"timeout_s", llm.timeout.count()},
                {"max_prompt_chars", llm.max_prompt_chars},
                {"layout", llm.layout == PromptLayout::chat ? "chat" : "flat"}};
  doc["cot"] = cot;
  doc["bootstrap_resamples"] = bootstrap_resamples;
  doc["out"] = out_dir;
  return doc;
}

std::string RunConfig::config_hash() const {
  json doc = to_json();
  doc.erase("out");
  doc["embeddings"].erase("cache_dir");
  // Concurrency and retry policy do not change what is computed.
  doc["llm"].erase("max_in_flight");
  doc["llm"].erase("max_retries");
  doc["llm"].erase("timeout_s");
  return sha256_hex(doc.dump()).substr(0, 16);
}

std::filesystem::path RunConfig::effective_cache_dir() const {
  if (!cache_dir.empty()) return cache_dir;
  return std::filesystem::path(out_dir) / "cache";
}

void RunConfig::validate() const {
  fields.validate();
  if (k < 0) throw Error("config", "k must be non-negative");
  if (pool_size == 0) throw Error("config", "pool size must be positive");
  if (embed_kind != "precomputed" && embed_kind != "http") {
    throw Error("config", "embeddings.kind must be precomputed or http");
  }
  if (embed_dim == 0) throw Error("config", "embeddings.dim must be positive");
  llm.validate();
}

}  // namespace iclsel
