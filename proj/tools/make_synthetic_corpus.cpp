#include <CLI11.hpp>
#include <iostream>

#include "iclsel/error.hpp"
#include "iclsel/synthetic.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Write a seeded three-class toy corpus with token embeddings"};
  iclsel::SyntheticSpec spec;
  std::string out = "synthetic";
  app.add_option("--out", out, "Output directory");
  app.add_option("--train", spec.n_train, "Training items");
  app.add_option("--test", spec.n_test, "Test items");
  app.add_option("--dim", spec.dim, "Embedding dimension");
  app.add_option("--seed", spec.seed, "Seed");
  CLI11_PARSE(app, argc, argv);
  try {
    iclsel::write_synthetic_corpus(iclsel::make_synthetic_corpus(spec), out);
  } catch (const iclsel::Error& e) {
    std::cerr << e.code() << ": " << e.what() << '\n';
    return 1;
  }
  std::cout << "wrote " << out << "/{train,test,embeddings}.jsonl\n";
  return 0;
}
