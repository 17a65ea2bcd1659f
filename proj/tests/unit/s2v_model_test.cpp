#include <doctest.h>

#include <cmath>

#include "armgraph/s2v_model.hpp"
#include "synthetic.hpp"

using namespace armgraph;
using namespace armgraph::s2v;

namespace {

Hyperparams tiny_hp() {
  Hyperparams hp;
  hp.feat_dim = 1;
  hp.num_class = 2;
  hp.latent_dim = 1;
  hp.out_dim = 1;
  hp.hidden = 1;
  hp.max_lv = 1;
  return hp;
}

// The hand-computed one-node model: mu = relu(2) = 2, g = relu(0.5 * 2) = 1,
// h = relu(3 * 1) = 3, logits = [3, -3].
ModelParams<double> hand_params() {
  auto p = ModelParams<double>::zeros(tiny_hp());
  p.w_node(0, 0) = 2;
  p.w_msg(0, 0) = 1;
  p.w_out(0, 0) = 0.5;
  p.w_h(0, 0) = 3;
  p.w_c(0, 0) = 1;
  p.w_c(1, 0) = -1;
  return p;
}

ModelParams<double> random_params(const Hyperparams& hp, Rng& rng) {
  auto p = ModelParams<double>::zeros(hp);
  for_each_tensor(
      [&rng](auto& m) {
        for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = 2 * uniform_unit(rng) - 1;
      },
      p);
  return p;
}

Hyperparams small_hp() {
  Hyperparams hp;
  hp.feat_dim = 6;
  hp.num_class = 2;
  hp.latent_dim = 4;
  hp.out_dim = 5;
  hp.hidden = 3;
  hp.max_lv = 3;
  return hp;
}

LabeledGraph permuted(const LabeledGraph& g, const std::vector<NodeIndex>& perm) {
  LabeledGraph out = g;
  for (std::size_t i = 0; i < perm.size(); ++i) out.node_tags[perm[i]] = g.node_tags[i];
  for (auto& [u, v] : out.edges) {
    u = perm[u];
    v = perm[v];
  }
  return to_undirected(out);
}

}  // namespace

TEST_CASE("one_hot") {
  CHECK(one_hot(1, 3) == Vector<double>((Vector<double>(3) << 1, 0, 0).finished()));
  CHECK(one_hot(0, 3) == Vector<double>::Zero(3));
  CHECK_THROWS_AS(one_hot(4, 3), ModelError);
}

TEST_CASE("zero parameters") {
  Rng rng(1);
  const auto g = testing::random_graph(rng, 8, 6);
  const auto hp = small_hp();
  const auto p = ModelParams<double>::zeros(hp);
  CHECK(mean_field_embed(g, p, hp.max_lv).isZero());
  const auto t = classify(g, p, hp);
  CHECK(t.probs(0) == doctest::Approx(0.5));
  CHECK(t.probs(1) == doctest::Approx(0.5));
  CHECK(predict(g, p, hp).label == 0);
}

TEST_CASE("hand-computed one-node model") {
  const LabeledGraph g{{1}, {}, 0};
  CHECK(mean_field_embed(g, hand_params(), 1)(0, 0) == 2.0);
  const auto t = classify(g, hand_params(), tiny_hp());
  CHECK(t.logits(0) == doctest::Approx(3.0));
  CHECK(t.logits(1) == doctest::Approx(-3.0));
  CHECK(t.probs(0) == doctest::Approx(0.99752738).epsilon(1e-8));
  CHECK(t.probs(1) == doctest::Approx(0.00247262).epsilon(1e-6));
  const auto pred = predict(g, hand_params(), tiny_hp());
  CHECK(pred.label == 0);
  CHECK(pred.probs[0] == doctest::Approx(0.9975).epsilon(1e-4));
}

TEST_CASE("isolated nodes ignore the rest of the graph") {
  Rng rng(2);
  const auto hp = small_hp();
  const auto p = random_params(hp, rng);
  const LabeledGraph alone{{3}, {}, 0};
  const LabeledGraph with_others{{3, 1, 2, 5}, {{1, 2}, {2, 3}, {3, 3}}, 0};
  const auto a = mean_field_embed(alone, p, hp.max_lv);
  const auto b = mean_field_embed(with_others, p, hp.max_lv);
  CHECK(a.col(0).isApprox(b.col(0)));
}

TEST_CASE("max_lv 0 leaves only the biases") {
  Rng rng(4);
  auto hp = small_hp();
  hp.max_lv = 0;
  const auto p = random_params(hp, rng);
  const auto a = classify(testing::random_graph(rng, 6, 6), p, hp);
  const auto b = classify(LabeledGraph{{1, 2}, {{0, 1}}, 0}, p, hp);
  CHECK(a.pooled.isZero());
  CHECK(a.probs.isApprox(b.probs));
}

TEST_CASE("permutation invariance") {
  Rng rng(8);
  const auto hp = small_hp();
  for (int i = 0; i < 20; ++i) {
    const auto p = random_params(hp, rng);
    const auto g = testing::random_graph(rng, 7, 6);
    std::vector<NodeIndex> perm(g.node_count());
    std::iota(perm.begin(), perm.end(), 0);
    shuffle(std::span(perm), rng);
    const auto a = classify(g, p, hp).probs;
    const auto b = classify(permuted(g, perm), p, hp).probs;
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("softmax") {
  Rng rng(6);
  for (int i = 0; i < 100; ++i) {
    Vector<double> logits(3);
    for (int k = 0; k < 3; ++k) logits(k) = (uniform_unit(rng) - 0.5) * 2000;
    const auto p = softmax(logits);
    CHECK(std::abs(p.sum() - 1.0) < 1e-9);
    CHECK(p.minCoeff() >= 0.0);
    CHECK(p.maxCoeff() <= 1.0);
  }
}

TEST_CASE("loss") {
  Vector<double> sure(2);
  sure << 1.0, 0.0;
  CHECK(loss(sure, 0) <= 1e-12);
  Vector<double> even(2);
  even << 0.5, 0.5;
  CHECK(loss(even, 0) == doctest::Approx(0.693147).epsilon(1e-6));
  CHECK(loss(even, 1) == doctest::Approx(std::log(2.0)));
  CHECK(std::isfinite(loss(sure, 1)));
  CHECK_THROWS_AS(loss(even, 2), ModelError);
}

TEST_CASE("analytic gradient matches finite differences") {
  Hyperparams hp;
  hp.latent_dim = 3;
  hp.out_dim = 4;
  hp.hidden = 2;
  hp.num_class = 2;
  hp.feat_dim = 3;
  hp.max_lv = 2;
  Rng rng(13);
  LabeledGraph g{{1, 2, 3, 0, 2}, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {4, 4}}, 1};
  const auto p = random_params(hp, rng);
  auto grad = ModelParams<double>::zeros(hp);
  backward(classify(g, p, hp), 1, p, g, 1.0, grad);
  auto q = p;
  double worst = 0;
  for_each_tensor(
      [&](auto& w, auto& gw) {
        for (Eigen::Index k = 0; k < w.size(); ++k) {
          const double orig = w.data()[k];
          w.data()[k] = orig + 1e-5;
          const double up = loss(classify(g, q, hp).probs, 1);
          w.data()[k] = orig - 1e-5;
          const double down = loss(classify(g, q, hp).probs, 1);
          w.data()[k] = orig;
          const double numeric = (up - down) / 2e-5;
          const double scale = std::max({std::abs(numeric), std::abs(gw.data()[k]), 1e-7});
          worst = std::max(worst, std::abs(numeric - gw.data()[k]) / scale);
        }
      },
      q, grad);
  CHECK(worst < 1e-4);
}

TEST_CASE("dimension inference and clamping") {
  const std::vector<LabeledGraph> data = {{{1, 5}, {}, 0}, {{2}, {}, 1}};
  const auto hp = infer_dimensions(data, Hyperparams{});
  CHECK(hp.feat_dim == 5);
  CHECK(hp.num_class == 2);
  Hyperparams fixed;
  fixed.feat_dim = 9;
  fixed.num_class = 3;
  CHECK(infer_dimensions(data, fixed).feat_dim == 9);
  CHECK(infer_dimensions(data, fixed).num_class == 3);
  CHECK(clamp_unknown_tags({{1, 5, 6, 0}, {}, 0}, 5).node_tags == std::vector<Tag>{1, 5, 0, 0});
}

TEST_CASE("tags above feat_dim are rejected") {
  const auto hp = tiny_hp();
  CHECK_THROWS_AS(classify(LabeledGraph{{2}, {}, 0}, ModelParams<double>::zeros(hp), hp), ModelError);
  auto wrong = hp;
  wrong.hidden = 2;
  CHECK_THROWS_AS(classify(LabeledGraph{{1}, {}, 0}, ModelParams<double>::zeros(hp), wrong), ModelError);
}

TEST_CASE("hyperparameter validation") {
  Hyperparams hp;
  hp.learning_rate = 0;
  CHECK_THROWS_AS(hp.validate(), ModelError);
  hp = {};
  hp.batch_size = 0;
  CHECK_THROWS_AS(hp.validate(), ModelError);
  hp = {};
  hp.train_fraction = 1.0;
  CHECK_THROWS_AS(hp.validate(), ModelError);
  CHECK_THROWS_AS(train<double>(std::vector<LabeledGraph>{}, Hyperparams{}), ModelError);
}

TEST_CASE("training") {
  const auto data = testing::separable_dataset();
  Hyperparams hp;
  hp.latent_dim = 16;
  hp.out_dim = 32;
  hp.hidden = 16;
  hp.num_epochs = 200;

  SUBCASE("zero epochs keeps the initialization") {
    auto h0 = hp;
    h0.num_epochs = 0;
    const auto r = train<double>(data, h0);
    CHECK(r.report.epoch_loss.empty());
    Rng rng(h0.seed);
    CHECK(r.params == initialize<double>(r.hp, rng));
  }
  SUBCASE("loss falls and the set is learned") {
    const auto r = train<double>(data, hp);
    REQUIRE(r.report.epoch_loss.size() == 200);
    CHECK(r.report.epoch_loss.back() < r.report.epoch_loss.front());
    CHECK(r.report.epoch_accuracy.back() == 1.0);
    for (const auto& g : data) {
      const auto p = predict(g, r.params, r.hp);
      CHECK(p.label == static_cast<std::size_t>(g.label));
      Eigen::Index best = 0;
      classify(g, r.params, r.hp).probs.maxCoeff(&best);
      CHECK(static_cast<std::size_t>(best) == p.label);
    }
  }
  SUBCASE("same seed, same curve; another seed, another curve") {
    const auto a = train<double>(data, hp);
    const auto b = train<double>(data, hp);
    CHECK(a.report.epoch_loss == b.report.epoch_loss);
    auto other = hp;
    other.seed = 2;
    CHECK(train<double>(data, other).report.epoch_loss != a.report.epoch_loss);
  }
  SUBCASE("plain SGD also descends") {
    auto sgd = hp;
    sgd.optimizer = Optimizer::kSgd;
    sgd.learning_rate = 0.05;
    const auto r = train<double>(data, sgd);
    CHECK(r.report.epoch_loss.back() < r.report.epoch_loss.front());
  }
  SUBCASE("minibatches smaller than the dataset") {
    auto mb = hp;
    mb.batch_size = 3;
    mb.num_epochs = 5;
    const auto r = train<double>(data, mb);
    CHECK(r.report.epoch_loss.size() == 5);
  }
}

TEST_CASE("single precision instantiates") {
  const auto hp = tiny_hp();
  auto p = ModelParams<float>::zeros(hp);
  p.w_node(0, 0) = 2;
  CHECK(mean_field_embed(LabeledGraph{{1}, {}, 0}, p, 1)(0, 0) == 2.0f);
}
