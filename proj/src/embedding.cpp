#include "iclsel/embedding.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cmath>
#include <fstream>
#include <httplib.h>
#include <json.hpp>
#include <sstream>
#include <thread>

#include "iclsel/digest.hpp"
#include "iclsel/error.hpp"
#include "iclsel/http_util.hpp"

namespace iclsel {

using nlohmann::json;

namespace {

// Returns false for a zero vector; otherwise scales `v` to unit length.
bool normalize_in_place(std::span<float> v) {
  double sq = 0.0;
  for (float x : v) sq += static_cast<double>(x) * x;
  if (!(sq > 0.0) || !std::isfinite(sq)) return false;
  const double inv = 1.0 / std::sqrt(sq);
  for (float& x : v) x = static_cast<float>(x * inv);
  return true;
}

std::string dim_mismatch(const std::string& id, std::size_t expected, std::size_t got) {
  return "item '" + id + "': expected dimension " + std::to_string(expected) + ", got " +
         std::to_string(got);
}

}  // namespace

TokenEmbeddingSet TokenEmbeddingSet::from_rows(std::string item_id, std::size_t dim,
                                               const std::vector<std::vector<float>>& rows,
                                               const std::vector<float>& sentence,
                                               std::vector<float> token_weights) {
  if (dim == 0) throw Error("dimension_mismatch", "embedding dimension must be positive");
  if (!token_weights.empty() && token_weights.size() != rows.size()) {
    throw Error("malformed_embedding", "item '" + item_id + "': weights/tokens length mismatch");
  }
  TokenEmbeddingSet set;
  set.item_id_ = std::move(item_id);
  set.dim_ = dim;
  set.tokens_.reserve(rows.size() * dim);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != dim) {
      throw Error("dimension_mismatch", dim_mismatch(set.item_id_, dim, rows[r].size()));
    }
    std::vector<float> row = rows[r];
    if (!normalize_in_place(row)) continue;
    set.tokens_.insert(set.tokens_.end(), row.begin(), row.end());
    if (!token_weights.empty()) set.weights_.push_back(token_weights[r]);
  }
  if (set.tokens_.empty()) {
    throw Error("empty_tokenization", "item '" + set.item_id_ + "' has no non-padding tokens");
  }
  if (sentence.size() != dim) {
    throw Error("dimension_mismatch", dim_mismatch(set.item_id_, dim, sentence.size()));
  }
  set.sentence_ = sentence;
  if (!normalize_in_place(set.sentence_)) {
    throw Error("malformed_embedding", "item '" + set.item_id_ + "' has a zero sentence vector");
  }
  return set;
}

RawEmbedding raw_embedding_from_json_text(const std::string& text) {
  const json doc = json::parse(text);
  RawEmbedding raw;
  raw.dim = doc.at("dim").get<std::size_t>();
  raw.tokens = doc.at("tokens").get<std::vector<std::vector<float>>>();
  raw.sentence = doc.at("sentence").get<std::vector<float>>();
  if (auto it = doc.find("weights"); it != doc.end() && !it->is_null()) {
    raw.weights = it->get<std::vector<float>>();
  }
  return raw;
}

std::string embedding_record_json(const TokenEmbeddingSet& set, const std::string& fields_hash) {
  json tokens = json::array();
  for (std::size_t i = 0; i < set.n_tokens(); ++i) {
    auto row = set.token(i);
    tokens.push_back(std::vector<float>(row.begin(), row.end()));
  }
  json doc;
  doc["id"] = set.item_id();
  doc["fields_hash"] = fields_hash;
  doc["dim"] = set.dim();
  doc["tokens"] = std::move(tokens);
  doc["sentence"] = std::vector<float>(set.sentence().begin(), set.sentence().end());
  if (!set.token_weights().empty()) {
    doc["weights"] = std::vector<float>(set.token_weights().begin(), set.token_weights().end());
  }
  return doc.dump();
}

PrecomputedEmbeddingProvider::PrecomputedEmbeddingProvider(const std::filesystem::path& path,
                                                           std::size_t dim)
    : dim_(dim) {
  std::ifstream in(path);
  if (!in) throw Error("io", "cannot open embeddings file " + path.string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const json doc = json::parse(line);
      const std::string key =
          doc.at("id").get<std::string>() + '\x1f' + doc.at("fields_hash").get<std::string>();
      records_[key] = raw_embedding_from_json_text(line);
    } catch (const json::exception& e) {
      throw Error("malformed_json",
                  path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
}

RawEmbedding PrecomputedEmbeddingProvider::fetch(const EmbeddingRequest& request) {
  auto it = records_.find(request.item_id + '\x1f' + request.fields_hash);
  if (it == records_.end()) it = records_.find(request.item_id + "\x1f*");
  if (it == records_.end()) {
    throw Error("missing_embedding", "no precomputed embedding for item '" + request.item_id + "'");
  }
  return it->second;
}

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::size_t dim,
                                             std::chrono::seconds timeout)
    : url_(std::move(url)), dim_(dim), timeout_(timeout) {}

RawEmbedding HttpEmbeddingProvider::fetch(const EmbeddingRequest& request) {
  const SplitUrl target = split_url(url_);
  httplib::Client client(target.origin);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  const json body = {{"text", request.text}};
  auto res = client.Post(target.path.empty() ? "/" : target.path, body.dump(),
                         "application/json");
  if (!res) {
    throw Error("provider_unreachable",
                "embedding service " + url_ + ": " + httplib::to_string(res.error()));
  }
  if (res->status == 429 || res->status >= 500) {
    throw Error("provider_unreachable",
                "embedding service " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  if (res->status != 200) {
    throw Error("provider_error",
                "embedding service " + url_ + " returned HTTP " + std::to_string(res->status));
  }
  try {
    return raw_embedding_from_json_text(res->body);
  } catch (const json::exception& e) {
    throw Error("malformed_embedding", std::string("embedding service response: ") + e.what());
  }
}

TokenEmbeddingSet embed_item(const ContentItem& item, const FieldConfig& fields,
                             EmbeddingProvider& provider) {
  EmbeddingRequest request{item.id, fields_hash(item, fields), render_field_text(item, fields)};
  RawEmbedding raw = provider.fetch(request);
  if (raw.dim != provider.dim()) {
    throw Error("dimension_mismatch", dim_mismatch(item.id, provider.dim(), raw.dim));
  }
  return TokenEmbeddingSet::from_rows(item.id, raw.dim, raw.tokens, raw.sentence,
                                      std::move(raw.weights));
}

EmbeddingCache::EmbeddingCache(std::filesystem::path directory) : directory_(std::move(directory)) {
  std::filesystem::create_directories(directory_);
}

std::filesystem::path EmbeddingCache::entry_path(const std::string& item_id,
                                                 const std::string& fields_hash) const {
  // Ids may contain path separators, so the file name is a digest.
  return directory_ / (sha256_hex(item_id).substr(0, 32) + "_" + fields_hash + ".json");
}

std::optional<TokenEmbeddingSet> EmbeddingCache::get(const std::string& item_id,
                                                     const std::string& fields_hash) {
  std::lock_guard lock(mutex_);
  const auto path = entry_path(item_id, fields_hash);
  std::ifstream in(path);
  if (!in) return std::nullopt;
  std::stringstream buffer;
  buffer << in.rdbuf();
  in.close();
  try {
    const json doc = json::parse(buffer.str());
    if (doc.at("id").get<std::string>() != item_id ||
        doc.at("fields_hash").get<std::string>() != fields_hash) {
      throw Error("corrupt_cache", "key mismatch");
    }
    RawEmbedding raw = raw_embedding_from_json_text(buffer.str());
    return TokenEmbeddingSet::from_rows(item_id, raw.dim, raw.tokens, raw.sentence,
                                        std::move(raw.weights));
  } catch (const std::exception& e) {
    spdlog::warn("evicting corrupt embedding cache entry {}: {}", path.string(), e.what());
    std::error_code ec;
    std::filesystem::remove(path, ec);
    return std::nullopt;
  }
}

void EmbeddingCache::put(const TokenEmbeddingSet& set, const std::string& fields_hash) {
  const std::string record = embedding_record_json(set, fields_hash);
  std::lock_guard lock(mutex_);
  const auto path = entry_path(set.item_id(), fields_hash);
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write cache entry " + tmp.string());
    out << record << '\n';
  }
  std::filesystem::rename(tmp, path);
}

void EmbeddingIndex::add(TokenEmbeddingSet set) {
  if (dim_ == 0) {
    dim_ = set.dim();
  } else if (set.dim() != dim_) {
    throw Error("dimension_mismatch", dim_mismatch(set.item_id(), dim_, set.dim()));
  }
  auto id = set.item_id();
  sets_[id] = std::make_shared<const TokenEmbeddingSet>(std::move(set));
}

const TokenEmbeddingSet* EmbeddingIndex::find(const std::string& item_id) const {
  auto it = sets_.find(item_id);
  return it == sets_.end() ? nullptr : it->second.get();
}

std::shared_ptr<const TokenEmbeddingSet> EmbeddingIndex::share(const std::string& item_id) const {
  auto it = sets_.find(item_id);
  return it == sets_.end() ? nullptr : it->second;
}

const TokenEmbeddingSet& EmbeddingIndex::at(const std::string& item_id) const {
  const auto* set = find(item_id);
  if (!set) throw Error("missing_embedding", "no embedding for item '" + item_id + "'");
  return *set;
}

EmbeddingIndex embed_corpus(const std::vector<ContentItem>& items, const FieldConfig& fields,
                            EmbeddingProvider& provider, EmbeddingCache* cache,
                            const EmbedOptions& options) {
  std::vector<std::optional<TokenEmbeddingSet>> results(items.size());
  std::vector<std::exception_ptr> failures(items.size());
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t i = next++; i < items.size(); i = next++) {
      try {
        const auto& item = items[i];
        const std::string key = fields_hash(item, fields);
        if (cache) {
          if (auto hit = cache->get(item.id, key)) {
            results[i] = std::move(*hit);
            continue;
          }
        }
        for (int attempt = 0;; ++attempt) {
          try {
            results[i] = embed_item(item, fields, provider);
            break;
          } catch (const Error& e) {
            if (e.code() != "provider_unreachable" || attempt >= options.max_retries) throw;
            std::this_thread::sleep_for(options.retry_base * (1 << attempt));
          }
        }
        if (cache) cache->put(*results[i], key);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };

  const std::size_t n_workers = std::max<std::size_t>(1, std::min(options.max_in_flight, items.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_workers; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  EmbeddingIndex index;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (failures[i]) std::rethrow_exception(failures[i]);
    index.add(std::move(*results[i]));
  }
  return index;
}

}  // namespace iclsel
