#pragma once

// Mean-field graph embedding network for graph classification.
//
// Node embeddings start at zero and are refined for max_lv rounds:
//
//   mu_v <- relu(W_node x_v + W_msg * sum_{u in N(v)} mu_u)
//
// where x_v is the one-hot encoding of the node tag. The graph embedding is the
// sum of the final node embeddings, followed by two relu layers (out_dim, then
// hidden) and a softmax classifier. Gradients are computed analytically by
// unrolling the message-passing rounds.

#include <Eigen/Dense>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "armgraph/error.hpp"
#include "armgraph/labeled_graph.hpp"
#include "armgraph/random.hpp"

namespace armgraph::s2v {

enum class ModelErrc {
  kTagOutOfRange,
  kShapeMismatch,
  kNonFiniteLoss,
  kEmptyDataset,
  kInvalidHyperparams,
};

using ModelError = Error<ModelErrc>;

enum class GraphModel { kMeanField };
enum class Optimizer { kAdam, kSgd };

struct Hyperparams {
  GraphModel gm = GraphModel::kMeanField;
  std::size_t batch_size = 50;
  std::uint64_t seed = 1;
  std::size_t feat_dim = 0;   // 0: infer from data
  std::size_t num_class = 0;  // 0: infer from data
  std::size_t num_epochs = 1000;
  std::size_t latent_dim = 64;
  std::size_t out_dim = 1024;
  std::size_t hidden = 100;
  std::size_t max_lv = 4;
  double learning_rate = 0.0001;
  double train_fraction = 0.8;
  Optimizer optimizer = Optimizer::kAdam;

  bool operator==(const Hyperparams&) const = default;

  void validate() const {
    auto bad = [](const std::string& what) {
      throw ModelError(ModelErrc::kInvalidHyperparams, what);
    };
    if (batch_size == 0) bad("batch_size must be at least 1");
    if (latent_dim == 0 || out_dim == 0 || hidden == 0) bad("layer sizes must be at least 1");
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) bad("learning_rate must be positive");
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) bad("train_fraction must lie in (0, 1)");
  }
};

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar = double>
struct ModelParams {
  Matrix<Scalar> w_node;  // latent x feat
  Matrix<Scalar> w_msg;   // latent x latent
  Matrix<Scalar> w_out;   // out x latent
  Vector<Scalar> b_out;
  Matrix<Scalar> w_h;     // hidden x out
  Vector<Scalar> b_h;
  Matrix<Scalar> w_c;     // classes x hidden
  Vector<Scalar> b_c;

  static ModelParams zeros(const Hyperparams& hp) {
    ModelParams p;
    p.w_node = Matrix<Scalar>::Zero(hp.latent_dim, hp.feat_dim);
    p.w_msg = Matrix<Scalar>::Zero(hp.latent_dim, hp.latent_dim);
    p.w_out = Matrix<Scalar>::Zero(hp.out_dim, hp.latent_dim);
    p.b_out = Vector<Scalar>::Zero(hp.out_dim);
    p.w_h = Matrix<Scalar>::Zero(hp.hidden, hp.out_dim);
    p.b_h = Vector<Scalar>::Zero(hp.hidden);
    p.w_c = Matrix<Scalar>::Zero(hp.num_class, hp.hidden);
    p.b_c = Vector<Scalar>::Zero(hp.num_class);
    return p;
  }

  bool matches(const Hyperparams& hp) const {
    auto dims = [](const auto& m, std::size_t r, std::size_t c) {
      return static_cast<std::size_t>(m.rows()) == r && static_cast<std::size_t>(m.cols()) == c;
    };
    return dims(w_node, hp.latent_dim, hp.feat_dim) && dims(w_msg, hp.latent_dim, hp.latent_dim) &&
           dims(w_out, hp.out_dim, hp.latent_dim) && dims(b_out, hp.out_dim, 1) &&
           dims(w_h, hp.hidden, hp.out_dim) && dims(b_h, hp.hidden, 1) &&
           dims(w_c, hp.num_class, hp.hidden) && dims(b_c, hp.num_class, 1);
  }

  bool operator==(const ModelParams&) const = default;
};

// Calls f on corresponding tensors of every argument, in storage order.
template <typename F, typename... P>
void for_each_tensor(F&& f, P&... params) {
  f(params.w_node...);
  f(params.w_msg...);
  f(params.w_out...);
  f(params.b_out...);
  f(params.w_h...);
  f(params.b_h...);
  f(params.w_c...);
  f(params.b_c...);
}

template <typename Scalar = double>
struct ForwardTrace {
  std::vector<std::vector<NodeIndex>> neighbors;
  Matrix<Scalar> node_input;                // W_node x_v per column
  std::vector<Matrix<Scalar>> levels;       // mu^0 .. mu^max_lv
  std::vector<Matrix<Scalar>> aggregated;   // neighbor sums feeding level t (index t-1)
  std::vector<Matrix<Scalar>> pre;          // pre-activations of level t (index t-1)
  Vector<Scalar> pooled;
  Vector<Scalar> graph_pre;
  Vector<Scalar> graph_embedding;
  Vector<Scalar> hidden_pre;
  Vector<Scalar> hidden;
  Vector<Scalar> logits;
  Vector<Scalar> probs;
};

struct TrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  double wall_seconds = 0.0;
};

struct Prediction {
  std::size_t label = 0;
  std::vector<double> probs;
};

template <typename Scalar = double>
Vector<Scalar> one_hot(Tag tag, std::size_t feat_dim) {
  if (tag > feat_dim) {
    throw ModelError(ModelErrc::kTagOutOfRange,
                     "tag " + std::to_string(tag) + " exceeds feat_dim " + std::to_string(feat_dim));
  }
  Vector<Scalar> x = Vector<Scalar>::Zero(feat_dim);
  if (tag > 0) x(tag - 1) = Scalar(1);
  return x;
}

template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits) {
  const Scalar top = logits.maxCoeff();
  Vector<Scalar> e = (logits.array() - top).exp().matrix();
  return e / e.sum();
}

namespace detail {

template <typename Scalar>
Matrix<Scalar> relu(const Matrix<Scalar>& m) {
  return m.cwiseMax(Scalar(0));
}

template <typename Derived>
typename Derived::PlainObject relu_mask(const Eigen::MatrixBase<Derived>& pre) {
  using Scalar = typename Derived::Scalar;
  return (pre.array() > Scalar(0)).template cast<Scalar>().matrix();
}

// out.col(v) = sum over u in N(v) of in.col(u).
template <typename Scalar>
Matrix<Scalar> aggregate(const Matrix<Scalar>& in, const std::vector<std::vector<NodeIndex>>& nbrs) {
  Matrix<Scalar> out = Matrix<Scalar>::Zero(in.rows(), in.cols());
  for (std::size_t v = 0; v < nbrs.size(); ++v) {
    for (NodeIndex u : nbrs[v]) out.col(v) += in.col(u);
  }
  return out;
}

template <typename Scalar>
void check_graph(const LabeledGraph& g, const ModelParams<Scalar>& p) {
  const auto feat = static_cast<std::size_t>(p.w_node.cols());
  for (Tag t : g.node_tags) {
    if (t > feat) {
      throw ModelError(ModelErrc::kShapeMismatch, "node tag " + std::to_string(t) +
                                                      " exceeds feat_dim " + std::to_string(feat));
    }
  }
  for (const auto& [u, v] : g.edges) {
    if (u >= g.node_count() || v >= g.node_count()) {
      throw ModelError(ModelErrc::kShapeMismatch, "edge endpoint out of range");
    }
  }
}

// Runs the embedding rounds and records every intermediate for backprop.
template <typename Scalar>
void embed_into(const LabeledGraph& g, const ModelParams<Scalar>& p, std::size_t max_lv,
                ForwardTrace<Scalar>& trace) {
  check_graph(g, p);
  if (p.w_msg.rows() != p.w_node.rows() || p.w_msg.cols() != p.w_node.rows()) {
    throw ModelError(ModelErrc::kShapeMismatch, "W_msg must be latent x latent");
  }
  const auto latent = p.w_node.rows();
  const auto n = static_cast<Eigen::Index>(g.node_count());
  trace.neighbors = neighbor_lists(g);
  trace.node_input = Matrix<Scalar>::Zero(latent, n);
  for (Eigen::Index v = 0; v < n; ++v) {
    const Tag t = g.node_tags[static_cast<std::size_t>(v)];
    if (t > 0) trace.node_input.col(v) = p.w_node.col(t - 1);
  }
  trace.levels.assign(1, Matrix<Scalar>::Zero(latent, n));
  trace.aggregated.clear();
  trace.pre.clear();
  for (std::size_t lv = 1; lv <= max_lv; ++lv) {
    trace.aggregated.push_back(aggregate(trace.levels.back(), trace.neighbors));
    trace.pre.push_back(trace.node_input + p.w_msg * trace.aggregated.back());
    trace.levels.push_back(relu(trace.pre.back()));
  }
}

}  // namespace detail

// Final-round node embeddings, one column per node.
template <typename Scalar>
Matrix<Scalar> mean_field_embed(const LabeledGraph& g, const ModelParams<Scalar>& p,
                                std::size_t max_lv) {
  ForwardTrace<Scalar> trace;
  detail::embed_into(g, p, max_lv, trace);
  return trace.levels.back();
}

template <typename Scalar>
ForwardTrace<Scalar> classify(const LabeledGraph& g, const ModelParams<Scalar>& p,
                              const Hyperparams& hp) {
  if (!p.matches(hp)) {
    throw ModelError(ModelErrc::kShapeMismatch, "parameter shapes disagree with hyperparameters");
  }
  ForwardTrace<Scalar> t;
  detail::embed_into(g, p, hp.max_lv, t);
  t.pooled = t.levels.back().rowwise().sum();
  t.graph_pre = p.w_out * t.pooled + p.b_out;
  t.graph_embedding = t.graph_pre.cwiseMax(Scalar(0));
  t.hidden_pre = p.w_h * t.graph_embedding + p.b_h;
  t.hidden = t.hidden_pre.cwiseMax(Scalar(0));
  t.logits = p.w_c * t.hidden + p.b_c;
  t.probs = softmax(t.logits);
  return t;
}

// Cross-entropy of one sample. Probabilities are clamped away from zero.
template <typename Scalar>
Scalar loss(const Vector<Scalar>& probs, std::size_t label) {
  if (label >= static_cast<std::size_t>(probs.size())) {
    throw ModelError(ModelErrc::kShapeMismatch, "label outside the class range");
  }
  using std::log;
  const Scalar floor = std::numeric_limits<Scalar>::min();
  const Scalar value = -log(std::max(probs(static_cast<Eigen::Index>(label)), floor));
  if (!std::isfinite(static_cast<double>(value))) {
    throw ModelError(ModelErrc::kNonFiniteLoss, "loss is not finite");
  }
  return value;
}

// Adds scale * d(loss)/d(params) for one traced sample into `grad`.
template <typename Scalar>
void backward(const ForwardTrace<Scalar>& t, std::size_t label, const ModelParams<Scalar>& p,
              const LabeledGraph& g, Scalar scale, ModelParams<Scalar>& grad) {
  Vector<Scalar> d_logits = t.probs;
  d_logits(static_cast<Eigen::Index>(label)) -= Scalar(1);
  d_logits *= scale;

  grad.w_c.noalias() += d_logits * t.hidden.transpose();
  grad.b_c += d_logits;
  const Vector<Scalar> d_hidden_pre =
      (p.w_c.transpose() * d_logits).cwiseProduct(detail::relu_mask(t.hidden_pre));
  grad.w_h.noalias() += d_hidden_pre * t.graph_embedding.transpose();
  grad.b_h += d_hidden_pre;
  const Vector<Scalar> d_graph_pre =
      (p.w_h.transpose() * d_hidden_pre).cwiseProduct(detail::relu_mask(t.graph_pre));
  grad.w_out.noalias() += d_graph_pre * t.pooled.transpose();
  grad.b_out += d_graph_pre;
  const Vector<Scalar> d_pooled = p.w_out.transpose() * d_graph_pre;

  const auto n = static_cast<Eigen::Index>(g.node_count());
  Matrix<Scalar> d_level = d_pooled.replicate(1, n);
  Matrix<Scalar> d_input = Matrix<Scalar>::Zero(p.w_node.rows(), n);
  for (std::size_t lv = t.pre.size(); lv >= 1; --lv) {
    const Matrix<Scalar> d_pre = d_level.cwiseProduct(detail::relu_mask(t.pre[lv - 1]));
    d_input += d_pre;
    grad.w_msg.noalias() += d_pre * t.aggregated[lv - 1].transpose();
    // The neighbor relation is symmetric, so the adjoint of aggregate() is
    // aggregate() itself.
    d_level = detail::aggregate<Scalar>(p.w_msg.transpose() * d_pre, t.neighbors);
  }
  for (Eigen::Index v = 0; v < n; ++v) {
    const Tag tag = g.node_tags[static_cast<std::size_t>(v)];
    if (tag > 0) grad.w_node.col(tag - 1) += d_input.col(v);
  }
}

// Mean loss over `batch` and its gradient.
template <typename Scalar>
Scalar batch_loss_and_gradient(std::span<const LabeledGraph* const> batch,
                               const ModelParams<Scalar>& p, const Hyperparams& hp,
                               ModelParams<Scalar>& grad, std::size_t* correct = nullptr) {
  grad = ModelParams<Scalar>::zeros(hp);
  Scalar total = 0;
  const Scalar scale = Scalar(1) / static_cast<Scalar>(batch.size());
  for (const LabeledGraph* g : batch) {
    const auto label = static_cast<std::size_t>(g->label);
    const auto trace = classify(*g, p, hp);
    total += loss<Scalar>(trace.probs, label);
    if (correct != nullptr) {
      Eigen::Index best = 0;
      trace.probs.maxCoeff(&best);
      if (static_cast<std::size_t>(best) == label) ++*correct;
    }
    backward(trace, label, p, *g, scale, grad);
  }
  return total * scale;
}

// Fills feat_dim (largest tag) and num_class (largest label + 1) when zero.
inline Hyperparams infer_dimensions(std::span<const LabeledGraph> data, Hyperparams hp) {
  if (hp.feat_dim == 0) {
    for (const auto& g : data) {
      for (Tag t : g.node_tags) hp.feat_dim = std::max<std::size_t>(hp.feat_dim, t);
    }
    hp.feat_dim = std::max<std::size_t>(hp.feat_dim, 1);
  }
  if (hp.num_class == 0) {
    for (const auto& g : data) {
      hp.num_class = std::max<std::size_t>(hp.num_class, static_cast<std::size_t>(g.label) + 1);
    }
    hp.num_class = std::max<std::size_t>(hp.num_class, 2);
  }
  return hp;
}

// Weights uniform in +-1/sqrt(fan_in), biases zero.
template <typename Scalar = double>
ModelParams<Scalar> initialize(const Hyperparams& hp, Rng& rng) {
  auto p = ModelParams<Scalar>::zeros(hp);
  auto fill = [&rng](Matrix<Scalar>& m) {
    const Scalar bound = Scalar(1) / std::sqrt(static_cast<Scalar>(std::max<Eigen::Index>(m.cols(), 1)));
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      for (Eigen::Index r = 0; r < m.rows(); ++r) {
        m(r, c) = (Scalar(2) * static_cast<Scalar>(uniform_unit(rng)) - Scalar(1)) * bound;
      }
    }
  };
  fill(p.w_node);
  fill(p.w_msg);
  fill(p.w_out);
  fill(p.w_h);
  fill(p.w_c);
  return p;
}

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) or plain SGD.
template <typename Scalar>
class ParamUpdater {
 public:
  ParamUpdater(const Hyperparams& hp)
      : hp_(hp), m_(ModelParams<Scalar>::zeros(hp)), v_(ModelParams<Scalar>::zeros(hp)) {}

  void step(ModelParams<Scalar>& p, ModelParams<Scalar>& grad) {
    const Scalar lr = static_cast<Scalar>(hp_.learning_rate);
    if (hp_.optimizer == Optimizer::kSgd) {
      for_each_tensor([lr](auto& w, auto& g) { w -= lr * g; }, p, grad);
      return;
    }
    ++t_;
    const Scalar b1 = Scalar(0.9), b2 = Scalar(0.999), eps = Scalar(1e-8);
    const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(t_));
    const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(t_));
    for_each_tensor(
        [&](auto& w, auto& g, auto& m, auto& v) {
          m = b1 * m + (Scalar(1) - b1) * g;
          v = b2 * v + (Scalar(1) - b2) * g.cwiseProduct(g);
          w.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
        },
        p, grad, m_, v_);
  }

 private:
  Hyperparams hp_;
  ModelParams<Scalar> m_;
  ModelParams<Scalar> v_;
  std::size_t t_ = 0;
};

template <typename Scalar = double>
struct TrainResult {
  ModelParams<Scalar> params;
  Hyperparams hp;  // with inferred dimensions
  TrainReport report;
};

// Minibatch training. Deterministic given the dataset order and hp.
template <typename Scalar = double>
TrainResult<Scalar> train(std::span<const LabeledGraph> data, Hyperparams hp) {
  if (data.empty()) throw ModelError(ModelErrc::kEmptyDataset, "training set is empty");
  hp.validate();
  hp = infer_dimensions(data, hp);

  const auto started = std::chrono::steady_clock::now();
  Rng rng(hp.seed);
  TrainResult<Scalar> out{initialize<Scalar>(hp, rng), hp, {}};
  ParamUpdater<Scalar> updater(hp);
  ModelParams<Scalar> grad;

  std::vector<const LabeledGraph*> order(data.size());
  for (std::size_t i = 0; i < data.size(); ++i) order[i] = &data[i];

  for (std::size_t epoch = 0; epoch < hp.num_epochs; ++epoch) {
    shuffle(std::span(order), rng);
    double loss_sum = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size(); begin += hp.batch_size) {
      const std::size_t end = std::min(order.size(), begin + hp.batch_size);
      const std::span<const LabeledGraph* const> batch(order.data() + begin, end - begin);
      const Scalar batch_loss = batch_loss_and_gradient(batch, out.params, hp, grad, &correct);
      if (!std::isfinite(static_cast<double>(batch_loss))) {
        throw ModelError(ModelErrc::kNonFiniteLoss,
                         "non-finite loss in epoch " + std::to_string(epoch + 1) +
                             " at batch starting " + std::to_string(begin));
      }
      loss_sum += static_cast<double>(batch_loss) * static_cast<double>(batch.size());
      updater.step(out.params, grad);
    }
    out.report.epoch_loss.push_back(loss_sum / static_cast<double>(order.size()));
    out.report.epoch_accuracy.push_back(static_cast<double>(correct) /
                                        static_cast<double>(order.size()));
  }
  out.report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
  return out;
}

// Tags the model has never seen (above feat_dim) become the unknown tag 0.
inline LabeledGraph clamp_unknown_tags(LabeledGraph g, std::size_t feat_dim) {
  for (Tag& t : g.node_tags) {
    if (t > feat_dim) t = 0;
  }
  return g;
}

// Argmax class; ties go to the lower index.
template <typename Scalar>
Prediction predict(const LabeledGraph& g, const ModelParams<Scalar>& p, const Hyperparams& hp) {
  const auto trace = classify(g, p, hp);
  Prediction out;
  for (Eigen::Index k = 0; k < trace.probs.size(); ++k) {
    const double pk = static_cast<double>(trace.probs(k));
    out.probs.push_back(pk);
    if (pk > out.probs[out.label]) out.label = static_cast<std::size_t>(k);
  }
  return out;
}

}  // namespace armgraph::s2v
