#include "iclsel/mlp.hpp"

#include <cmath>
#include <numeric>
#include <sstream>

#include "iclsel/error.hpp"
#include "iclsel/rng.hpp"

namespace iclsel {

namespace {

void require_dim(const MLPModel& model, std::size_t got) {
  if (got != model.input_dim()) {
    throw Error("dimension_mismatch", "model expects " + std::to_string(model.input_dim()) +
                                          "-dimensional input, got " + std::to_string(got));
  }
}

struct AdamSlot {
  Eigen::MatrixXd m;
  Eigen::MatrixXd v;
};

template <class Param, class Grad>
void adam_step(Param& param, const Grad& grad, AdamSlot& slot, double lr, int step) {
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  slot.m = kBeta1 * slot.m + (1.0 - kBeta1) * grad;
  slot.v = kBeta2 * slot.v + (1.0 - kBeta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(kBeta1, step);
  const double c2 = 1.0 - std::pow(kBeta2, step);
  param -= (lr * (slot.m / c1).array() / ((slot.v / c2).array().sqrt() + kEps)).matrix();
}

}  // namespace

MLPModel mlp_init(std::size_t input_dim, std::size_t hidden, std::uint64_t seed) {
  if (input_dim == 0 || hidden == 0) throw Error("config", "MLP dimensions must be positive");
  Rng rng(seed);
  auto fill = [&rng](auto& m, double fan_in) {
    const double bound = 1.0 / std::sqrt(fan_in);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = (2.0 * uniform_unit(rng) - 1.0) * bound;
  };
  MLPModel model;
  model.w1.resize(static_cast<Eigen::Index>(hidden), static_cast<Eigen::Index>(input_dim));
  model.b1.resize(static_cast<Eigen::Index>(hidden));
  model.w2.resize(kNumIdeologies, static_cast<Eigen::Index>(hidden));
  model.b2.resize(kNumIdeologies);
  fill(model.w1, static_cast<double>(input_dim));
  fill(model.b1, static_cast<double>(input_dim));
  fill(model.w2, static_cast<double>(hidden));
  fill(model.b2, static_cast<double>(hidden));
  return model;
}

Eigen::Vector3d mlp_logits(const MLPModel& model, const Eigen::VectorXd& x) {
  require_dim(model, static_cast<std::size_t>(x.size()));
  const Eigen::VectorXd h = (model.w1 * x + model.b1).array().tanh();
  return model.w2 * h + model.b2;
}

Eigen::Vector3d softmax(const Eigen::Vector3d& logits) {
  const Eigen::Vector3d shifted = (logits.array() - logits.maxCoeff()).exp();
  return shifted / shifted.sum();
}

Ideology argmax_label(const Eigen::Vector3d& scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < kNumIdeologies; ++i) {
    if (scores(static_cast<Eigen::Index>(i)) > scores(static_cast<Eigen::Index>(best))) best = i;
  }
  return ideology_from_index(best);
}

double mlp_loss(const MLPModel& model, const Eigen::MatrixXd& x, const std::vector<Ideology>& y,
                MLPGradients* grads) {
  require_dim(model, static_cast<std::size_t>(x.cols()));
  const auto n = x.rows();
  // Column-major batch: one column per example.
  const Eigen::MatrixXd pre = (model.w1 * x.transpose()).colwise() + model.b1;
  const Eigen::MatrixXd h = pre.array().tanh();
  Eigen::MatrixXd logits = (model.w2 * h).colwise() + model.b2;

  Eigen::MatrixXd probs(kNumIdeologies, n);
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    const Eigen::Vector3d p = softmax(logits.col(i));
    probs.col(i) = p;
    loss -= std::log(std::max(p(static_cast<Eigen::Index>(index_of(y[static_cast<std::size_t>(i)]))), 1e-300));
  }
  loss /= static_cast<double>(n);
  if (!grads) return loss;

  Eigen::MatrixXd d_logits = probs;
  for (Eigen::Index i = 0; i < n; ++i) {
    d_logits(static_cast<Eigen::Index>(index_of(y[static_cast<std::size_t>(i)])), i) -= 1.0;
  }
  d_logits /= static_cast<double>(n);
  grads->w2 = d_logits * h.transpose();
  grads->b2 = d_logits.rowwise().sum();
  const Eigen::MatrixXd d_pre = (model.w2.transpose() * d_logits).array() * (1.0 - h.array().square());
  grads->w1 = d_pre * x;
  grads->b1 = d_pre.rowwise().sum();
  return loss;
}

MLPModel mlp_train(const Eigen::MatrixXd& x, const std::vector<Ideology>& y, const MLPHyper& hyper) {
  if (static_cast<std::size_t>(x.cols()) != hyper.input_dim) {
    throw Error("dimension_mismatch", "training inputs are " + std::to_string(x.cols()) +
                                          "-dimensional, expected " + std::to_string(hyper.input_dim));
  }
  if (static_cast<std::size_t>(x.rows()) != y.size()) throw Error("config", "inputs and labels differ in length");
  MLPModel model = mlp_init(hyper.input_dim, hyper.hidden, hyper.seed);
  if (hyper.epochs <= 0 || y.empty()) return model;

  AdamSlot s_w1{Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols()), Eigen::MatrixXd::Zero(model.w1.rows(), model.w1.cols())};
  AdamSlot s_b1{Eigen::MatrixXd::Zero(model.b1.size(), 1), Eigen::MatrixXd::Zero(model.b1.size(), 1)};
  AdamSlot s_w2{Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols()), Eigen::MatrixXd::Zero(model.w2.rows(), model.w2.cols())};
  AdamSlot s_b2{Eigen::MatrixXd::Zero(model.b2.size(), 1), Eigen::MatrixXd::Zero(model.b2.size(), 1)};

  const std::size_t n = y.size();
  const std::size_t batch = std::max<std::size_t>(1, hyper.batch_size);
  MLPGradients grads;
  int step = 0;
  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    const auto order = sample_without_replacement(n, n, derive_seed(hyper.seed, static_cast<std::uint64_t>(epoch) + 1));
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t count = std::min(batch, n - start);
      Eigen::MatrixXd xb(static_cast<Eigen::Index>(count), x.cols());
      std::vector<Ideology> yb(count);
      for (std::size_t i = 0; i < count; ++i) {
        xb.row(static_cast<Eigen::Index>(i)) = x.row(static_cast<Eigen::Index>(order[start + i]));
        yb[i] = y[order[start + i]];
      }
      const double loss = mlp_loss(model, xb, yb, &grads);
      if (!std::isfinite(loss)) {
        std::ostringstream msg;
        msg << "loss became " << loss << " at epoch " << epoch << ", batch starting at " << start
            << " (max |W1| = " << model.w1.cwiseAbs().maxCoeff() << ")";
        throw Error("non_finite_loss", msg.str());
      }
      ++step;
      adam_step(model.w1, grads.w1, s_w1, hyper.learning_rate, step);
      adam_step(model.b1, grads.b1, s_b1, hyper.learning_rate, step);
      adam_step(model.w2, grads.w2, s_w2, hyper.learning_rate, step);
      adam_step(model.b2, grads.b2, s_b2, hyper.learning_rate, step);
    }
  }
  return model;
}

MLPModel mlp_train(const std::vector<ContentItem>& train, const EmbeddingIndex& embeddings,
                   const MLPHyper& hyper) {
  Eigen::MatrixXd x(static_cast<Eigen::Index>(train.size()), static_cast<Eigen::Index>(hyper.input_dim));
  std::vector<Ideology> y;
  y.reserve(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& item = train[i];
    if (!item.label) throw Error("missing_label", "training item '" + item.id + "' has no label");
    const auto sentence = embeddings.at(item.id).sentence();
    if (sentence.size() != hyper.input_dim) {
      throw Error("dimension_mismatch", "sentence embedding of '" + item.id + "' has dimension " +
                                            std::to_string(sentence.size()) + ", expected " +
                                            std::to_string(hyper.input_dim));
    }
    for (std::size_t d = 0; d < sentence.size(); ++d) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(d)) = sentence[d];
    }
    y.push_back(*item.label);
  }
  return mlp_train(x, y, hyper);
}

Ideology mlp_predict(const MLPModel& model, std::span<const float> sentence_embedding) {
  require_dim(model, sentence_embedding.size());
  Eigen::VectorXd x(static_cast<Eigen::Index>(sentence_embedding.size()));
  for (std::size_t d = 0; d < sentence_embedding.size(); ++d) x(static_cast<Eigen::Index>(d)) = sentence_embedding[d];
  return argmax_label(mlp_logits(model, x));
}

double mlp_accuracy(const MLPModel& model, const Eigen::MatrixXd& x, const std::vector<Ideology>& y) {
  if (y.empty()) return 0.0;
  std::size_t hits = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    if (argmax_label(mlp_logits(model, x.row(i).transpose())) == y[static_cast<std::size_t>(i)]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(y.size());
}

}  // namespace iclsel
