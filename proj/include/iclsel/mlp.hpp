#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "iclsel/corpus.hpp"
#include "iclsel/embedding.hpp"
#include "iclsel/ideology.hpp"

namespace iclsel {

// Sentence-embedding baseline: softmax(W2 * tanh(W1 * x + b1) + b2).
struct MLPModel {
  Eigen::MatrixXd w1;  // hidden x input
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;  // 3 x hidden
  Eigen::VectorXd b2;

  std::size_t input_dim() const { return static_cast<std::size_t>(w1.cols()); }
  std::size_t hidden_dim() const { return static_cast<std::size_t>(w1.rows()); }
};

struct MLPHyper {
  std::size_t input_dim = 384;
  std::size_t hidden = 512;
  double learning_rate = 1e-3;
  int epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
};

// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) weights and biases.
MLPModel mlp_init(std::size_t input_dim, std::size_t hidden, std::uint64_t seed);

Eigen::Vector3d mlp_logits(const MLPModel& model, const Eigen::VectorXd& x);
Eigen::Vector3d softmax(const Eigen::Vector3d& logits);

// Argmax with ties to the lowest label in Liberal < Neutral < Conservative.
Ideology argmax_label(const Eigen::Vector3d& scores);

struct MLPGradients {
  Eigen::MatrixXd w1;
  Eigen::VectorXd b1;
  Eigen::MatrixXd w2;
  Eigen::VectorXd b2;
};

// Mean cross-entropy over the rows of `x`; fills `grads` when non-null.
double mlp_loss(const MLPModel& model, const Eigen::MatrixXd& x, const std::vector<Ideology>& y,
                MLPGradients* grads = nullptr);

// Adam (beta 0.9/0.999) on shuffled mini-batches. Rows of `x` are inputs.
MLPModel mlp_train(const Eigen::MatrixXd& x, const std::vector<Ideology>& y, const MLPHyper& hyper);

// Uses each item's sentence vector and gold label.
MLPModel mlp_train(const std::vector<ContentItem>& train, const EmbeddingIndex& embeddings,
                   const MLPHyper& hyper);

Ideology mlp_predict(const MLPModel& model, std::span<const float> sentence_embedding);

double mlp_accuracy(const MLPModel& model, const Eigen::MatrixXd& x, const std::vector<Ideology>& y);

}  // namespace iclsel
