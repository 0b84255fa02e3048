#include "iclsel/synthetic.hpp"

#include <fstream>
#include <string>

#include "iclsel/error.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

namespace {

std::vector<float> random_direction(Rng& rng, std::size_t dim) {
  std::vector<float> v(dim);
  for (auto& x : v) x = static_cast<float>(standard_normal(rng));
  return v;
}

constexpr const char* kSlantPrefix[] = {"lib", "neu", "con"};
constexpr const char* kSources[] = {"Left Wire", "Center Desk", "Right Report"};

}  // namespace

SyntheticCorpus make_synthetic_corpus(const SyntheticSpec& spec) {
  Rng rng(spec.seed);
  std::vector<std::vector<std::vector<float>>> slant(kNumIdeologies);
  for (auto& vocab : slant) {
    for (std::size_t w = 0; w < spec.slant_vocab; ++w) vocab.push_back(random_direction(rng, spec.dim));
  }
  std::vector<std::vector<float>> topic;
  for (std::size_t w = 0; w < spec.topic_vocab; ++w) topic.push_back(random_direction(rng, spec.dim));

  SyntheticCorpus corpus;
  auto make_item = [&](const std::string& id) {
    const auto cls = static_cast<std::size_t>(uniform_index(rng, kNumIdeologies));
    std::vector<std::vector<float>> tokens;
    std::string title;
    auto emit = [&](const std::vector<float>& base, const std::string& word) {
      std::vector<float> token(base);
      for (auto& x : token) x += static_cast<float>(spec.token_noise * standard_normal(rng));
      tokens.push_back(std::move(token));
      if (!title.empty()) title += ' ';
      title += word;
    };
    for (std::size_t i = 0; i < spec.slant_words; ++i) {
      std::size_t from = cls;
      if (uniform_unit(rng) < spec.cross_prob) {
        from = (cls + 1 + static_cast<std::size_t>(uniform_index(rng, kNumIdeologies - 1))) % kNumIdeologies;
      }
      const auto w = static_cast<std::size_t>(uniform_index(rng, spec.slant_vocab));
      emit(slant[from][w], kSlantPrefix[from] + std::to_string(w));
    }
    for (std::size_t i = 0; i < spec.topic_words; ++i) {
      const auto w = static_cast<std::size_t>(uniform_index(rng, spec.topic_vocab));
      emit(topic[w], "topic" + std::to_string(w));
    }
    std::vector<float> sentence(spec.dim, 0.0f);
    for (const auto& t : tokens) {
      for (std::size_t d = 0; d < spec.dim; ++d) sentence[d] += t[d];
    }

    ContentItem item;
    item.id = id;
    item.title = title;
    item.source = kSources[cls];
    item.description = "Coverage of " + title + ".";
    item.label = ideology_from_index(cls);
    corpus.embeddings.add(TokenEmbeddingSet::from_rows(id, spec.dim, tokens, sentence));
    return item;
  };

  for (std::size_t i = 0; i < spec.n_train; ++i) corpus.train.push_back(make_item("train-" + std::to_string(i)));
  for (std::size_t i = 0; i < spec.n_test; ++i) corpus.test.push_back(make_item("test-" + std::to_string(i)));
  return corpus;
}

void write_synthetic_corpus(const SyntheticCorpus& corpus, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  auto write_items = [](const std::filesystem::path& path, const std::vector<ContentItem>& items) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io", "cannot write " + path.string());
    for (const auto& item : items) out << to_jsonl_line(item) << '\n';
  };
  write_items(dir / "train.jsonl", corpus.train);
  write_items(dir / "test.jsonl", corpus.test);
  std::ofstream out(dir / "embeddings.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw Error("io", "cannot write embeddings");
  for (const auto* items : {&corpus.train, &corpus.test}) {
    for (const auto& item : *items) out << embedding_record_json(corpus.embeddings.at(item.id), "*") << '\n';
  }
}

}  // namespace iclsel
