#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "iclsel/corpus.hpp"
#include "iclsel/fields.hpp"

namespace iclsel {

// Token vectors (row-major, n_tokens x dim) and one sentence vector for an
// item. Every row and the sentence vector have unit L2 norm.
class TokenEmbeddingSet {
 public:
  TokenEmbeddingSet() = default;

  // Normalizes rows and the sentence vector. All-zero rows are padding and
  // are dropped. Throws on ragged rows, wrong widths or when no token
  // survives.
  static TokenEmbeddingSet from_rows(std::string item_id, std::size_t dim,
                                     const std::vector<std::vector<float>>& rows,
                                     const std::vector<float>& sentence,
                                     std::vector<float> token_weights = {});

  const std::string& item_id() const { return item_id_; }
  std::size_t dim() const { return dim_; }
  std::size_t n_tokens() const { return dim_ == 0 ? 0 : tokens_.size() / dim_; }

  std::span<const float> token(std::size_t i) const {
    return {tokens_.data() + i * dim_, dim_};
  }
  std::span<const float> token_data() const { return tokens_; }
  std::span<const float> sentence() const { return sentence_; }

  // Optional per-token importance weights (e.g. IDF) supplied by the
  // provider. Empty means uniform.
  std::span<const float> token_weights() const { return weights_; }

 private:
  std::string item_id_;
  std::size_t dim_ = 0;
  std::vector<float> tokens_;
  std::vector<float> sentence_;
  std::vector<float> weights_;
};

// Unnormalized provider output.
struct RawEmbedding {
  std::size_t dim = 0;
  std::vector<std::vector<float>> tokens;
  std::vector<float> sentence;
  std::vector<float> weights;
};

struct EmbeddingRequest {
  std::string item_id;
  std::string fields_hash;
  std::string text;
};

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  // Declared vector width; embed_item rejects output of any other width.
  virtual std::size_t dim() const = 0;

  // Must be deterministic. Throws Error with code "provider_unreachable" for
  // transient failures.
  virtual RawEmbedding fetch(const EmbeddingRequest& request) = 0;
};

// Serves vectors from a precomputed JSONL file:
//   {"id", "fields_hash", "dim", "tokens": [[...]], "sentence": [...]}
// A record whose fields_hash is "*" matches every field configuration.
class PrecomputedEmbeddingProvider : public EmbeddingProvider {
 public:
  PrecomputedEmbeddingProvider(const std::filesystem::path& path, std::size_t dim);

  std::size_t dim() const override { return dim_; }
  RawEmbedding fetch(const EmbeddingRequest& request) override;

  std::size_t size() const { return records_.size(); }

 private:
  std::size_t dim_;
  std::unordered_map<std::string, RawEmbedding> records_;
};

// POST {"text": ...} to `url`; the response carries dim/tokens/sentence.
class HttpEmbeddingProvider : public EmbeddingProvider {
 public:
  HttpEmbeddingProvider(std::string url, std::size_t dim,
                        std::chrono::seconds timeout = std::chrono::seconds(30));

  std::size_t dim() const override { return dim_; }
  RawEmbedding fetch(const EmbeddingRequest& request) override;

 private:
  std::string url_;
  std::size_t dim_;
  std::chrono::seconds timeout_;
};

TokenEmbeddingSet embed_item(const ContentItem& item, const FieldConfig& fields,
                             EmbeddingProvider& provider);

// JSON forms shared by the precomputed file, the HTTP provider and the cache.
RawEmbedding raw_embedding_from_json_text(const std::string& text);
std::string embedding_record_json(const TokenEmbeddingSet& set, const std::string& fields_hash);

// One file per (item id, fields hash) under `directory`. Safe for concurrent
// use; writes go through a temporary file and an atomic rename.
class EmbeddingCache {
 public:
  explicit EmbeddingCache(std::filesystem::path directory);

  std::optional<TokenEmbeddingSet> get(const std::string& item_id, const std::string& fields_hash);
  void put(const TokenEmbeddingSet& set, const std::string& fields_hash);

  std::filesystem::path entry_path(const std::string& item_id,
                                   const std::string& fields_hash) const;

 private:
  std::filesystem::path directory_;
  std::mutex mutex_;
};

// Item id -> embedding set, all with one dimension.
class EmbeddingIndex {
 public:
  void add(TokenEmbeddingSet set);
  const TokenEmbeddingSet* find(const std::string& item_id) const;
  std::shared_ptr<const TokenEmbeddingSet> share(const std::string& item_id) const;
  const TokenEmbeddingSet& at(const std::string& item_id) const;

  std::size_t size() const { return sets_.size(); }
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_ = 0;
  std::unordered_map<std::string, std::shared_ptr<const TokenEmbeddingSet>> sets_;
};

struct EmbedOptions {
  std::size_t max_in_flight = 8;
  int max_retries = 3;
  std::chrono::milliseconds retry_base{200};
};

// Embeds every item (cache first, provider on miss), fanning out up to
// max_in_flight concurrent provider calls. Output is independent of
// completion order.
EmbeddingIndex embed_corpus(const std::vector<ContentItem>& items, const FieldConfig& fields,
                            EmbeddingProvider& provider, EmbeddingCache* cache,
                            const EmbedOptions& options = {});

}  // namespace iclsel
