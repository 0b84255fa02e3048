#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "iclsel/corpus.hpp"
#include "iclsel/embedding.hpp"

namespace iclsel {

// Seeded three-class toy corpus with token embeddings, for offline
// experiments and demos. Every word in the vocabulary has a fixed random
// direction; an item's tokens are noisy copies of its words. Items of a
// class mostly draw "slant" words from that class's vocabulary plus shared
// topic words, so token coverage carries label information.
struct SyntheticSpec {
  std::size_t n_train = 300;
  std::size_t n_test = 150;
  std::size_t dim = 32;
  std::size_t slant_vocab = 12;   // words per class
  std::size_t topic_vocab = 40;   // shared words
  std::size_t slant_words = 3;    // per item
  std::size_t topic_words = 2;    // per item
  double cross_prob = 0.2;        // chance a slant word comes from another class
  double token_noise = 0.05;
  std::uint64_t seed = 0;
};

struct SyntheticCorpus {
  std::vector<ContentItem> train;
  std::vector<ContentItem> test;
  EmbeddingIndex embeddings;  // covers train and test
};

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec);

// Writes train.jsonl, test.jsonl and embeddings.jsonl (fields_hash "*").
void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir);

}  // namespace iclsel
