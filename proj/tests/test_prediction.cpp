#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "mondrian/prediction.hpp"
#include "mondrian/tree.hpp"

#include "test_util.hpp"

using namespace mondrian;
using testutil::all_ids;
using testutil::make_store;

namespace {

MondrianTree random_tree(std::size_t n, double lifetime, bool pausing,
                         std::uint32_t classes, std::uint64_t seed) {
  RngStream data_rng(seed, 100);
  std::vector<std::vector<double>> points(n, std::vector<double>(2));
  std::vector<std::uint32_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    points[i] = {data_rng.next_uniform(), data_rng.next_uniform()};
    labels[i] = static_cast<std::uint32_t>(data_rng.next_uniform() * classes);
  }
  const auto store = make_store(2, points, labels);
  return MondrianTree::sample(store, all_ids(n),
                              TreeConfig{2, classes, lifetime, pausing},
                              RngStream(seed, 200));
}

// Shorthand: posterior mean at the leaf reached by x, computed by chaining
// the per-node recursion from the root (all branch-off mass ignored).
std::vector<double> leaf_chain_posterior(const MondrianTree& tree,
                                         const PosteriorParams& params,
                                         std::span<const double> x) {
  std::vector<double> mean(params.base.begin(), params.base.end());
  NodeId j = tree.root();
  for (;;) {
    mean = posterior_mean(tree, params, j, mean);
    if (tree.node(j).is_leaf()) return mean;
    j = x[tree.node(j).split_dim] <= tree.node(j).split_loc ? tree.node(j).left
                                                            : tree.node(j).right;
  }
}

}  // namespace

TEST_CASE("branch-off probability") {
  SUBCASE("inside the extent it is exactly zero") {
    const auto store = make_store(2, {{0.2, 0.2}, {0.6, 0.8}}, {0, 1});
    const auto tree = MondrianTree::sample(store, all_ids(2),
                                           TreeConfig{2, 2, kInfinity, false},
                                           RngStream(3, 0));
    const std::vector<double> x{0.4, 0.5};
    const auto branch = branch_off_probability(tree, tree.root(), x);
    CHECK(branch.eta == 0.0);
    CHECK(branch.prob == 0.0);
  }
  SUBCASE("infinite interval with positive eta is certain") {
    const auto store = make_store(2, {{0.5, 0.5}}, {0});
    const auto tree = MondrianTree::sample(store, all_ids(1),
                                           TreeConfig{2, 2, kInfinity, false},
                                           RngStream(3, 0));
    const std::vector<double> x{0.8, 0.5};
    const auto branch = branch_off_probability(tree, tree.root(), x);
    CHECK(branch.eta == doctest::Approx(0.3));
    CHECK(branch.prob == 1.0);
  }
  SUBCASE("finite interval matches the closed form") {
    const auto store = make_store(2, {{0.5, 0.5}}, {0});
    const auto tree = MondrianTree::sample(store, all_ids(1),
                                           TreeConfig{2, 2, 2.0, false},
                                           RngStream(3, 0));
    const std::vector<double> x{0.8, 0.3};  // eta = 0.3 + 0.2 = 0.5, delta = 2
    const auto branch = branch_off_probability(tree, tree.root(), x);
    CHECK(branch.eta == doctest::Approx(0.5));
    CHECK(branch.prob == doctest::Approx(-std::expm1(-1.0)).epsilon(1e-14));
  }
  SUBCASE("moving farther away never lowers the probability") {
    const auto store = make_store(2, {{0.4, 0.4}, {0.6, 0.6}}, {0, 1});
    const auto tree = MondrianTree::sample(store, all_ids(2),
                                           TreeConfig{2, 2, 1.0, false},
                                           RngStream(4, 0));
    double previous = -1.0;
    for (double step = 0.0; step < 1.0; step += 0.07) {
      const std::vector<double> x{0.6 + step, 0.5};
      const auto branch = branch_off_probability(tree, tree.root(), x);
      CHECK(branch.prob >= previous);
      previous = branch.prob;
    }
  }
}

TEST_CASE("analytic prediction") {
  SUBCASE("a training point inside its leaf gets the leaf posterior exactly") {
    const auto tree = random_tree(40, kInfinity, true, 3, 11);
    const PosteriorParams params = PosteriorParams::uniform(3, 20.0);
    for (std::uint32_t i = 0; i < 10; ++i) {
      const auto x = tree.store().features(i);
      const auto expected = leaf_chain_posterior(tree, params, x);
      CHECK(predict_tree(tree, params, x) == expected);
    }
  }
  SUBCASE("single point, single leaf: the stored label is certain") {
    const auto store = make_store(2, {{0.5, 0.5}}, {0});
    const auto tree = MondrianTree::sample(store, all_ids(1),
                                           TreeConfig{2, 2, kInfinity, false},
                                           RngStream(5, 0));
    const PosteriorParams params = PosteriorParams::uniform(2, 7.0);
    const auto probs = predict_tree(tree, params, std::vector<double>{0.5, 0.5});
    CHECK(probs[0] == 1.0);
    CHECK(probs[1] == 0.0);
  }
  SUBCASE("outputs are normalized for interior and exterior points") {
    RngStream point_rng(17, 0);
    for (int round = 0; round < 8; ++round) {
      const double lifetime = round % 2 ? 1.5 : kInfinity;
      const auto tree = random_tree(30, lifetime, round % 3 == 0, 4, 600 + round);
      const PosteriorParams params = PosteriorParams::uniform(4, 20.0);
      for (int p = 0; p < 20; ++p) {
        std::vector<double> x{-0.5 + 2.0 * point_rng.next_uniform(),
                              -0.5 + 2.0 * point_rng.next_uniform()};
        const auto probs = predict_tree(tree, params, x);
        double sum = 0.0;
        for (const double v : probs) {
          CHECK(v >= 0.0);
          sum += v;
        }
        CHECK(std::abs(sum - 1.0) < 1e-12);
      }
    }
  }
  SUBCASE("dimension mismatch throws") {
    const auto tree = random_tree(5, kInfinity, false, 2, 2);
    const PosteriorParams params = PosteriorParams::uniform(2, 20.0);
    CHECK_THROWS_AS(predict_tree(tree, params, std::vector<double>{0.5}),
                    std::invalid_argument);
  }
}

TEST_CASE("Monte-Carlo oracle") {
  SUBCASE("interior points reproduce the analytic answer exactly") {
    const auto tree = random_tree(25, kInfinity, true, 3, 21);
    const PosteriorParams params = PosteriorParams::uniform(3, 20.0);
    const auto x = tree.store().features(3);
    const auto analytic = predict_tree(tree, params, x);
    RngStream rng(77, 0);
    const auto mc = predict_tree_mc_oracle(tree, params, x, 1000, rng);
    for (std::size_t k = 0; k < analytic.size(); ++k)
      CHECK(mc[k] == analytic[k]);
  }
  SUBCASE("one sample is still a distribution") {
    const auto tree = random_tree(25, 1.0, false, 3, 22);
    const PosteriorParams params = PosteriorParams::uniform(3, 20.0);
    RngStream rng(78, 0);
    const auto mc = predict_tree_mc_oracle(
        tree, params, std::vector<double>{1.2, -0.1}, 1, rng);
    double sum = 0.0;
    for (const double v : mc) {
      CHECK(v >= 0.0);
      sum += v;
    }
    CHECK(std::abs(sum - 1.0) < 1e-12);
  }
  SUBCASE("converges to the analytic prediction on exterior points") {
    RngStream point_rng(99, 0);
    for (int round = 0; round < 4; ++round) {
      const double lifetime = round % 2 ? 2.0 : kInfinity;
      const auto tree = random_tree(30, lifetime, round % 2 == 0, 3, 900 + round);
      const PosteriorParams params = PosteriorParams::uniform(3, 20.0);
      const std::vector<double> x{1.0 + 0.4 * point_rng.next_uniform(),
                                  -0.4 * point_rng.next_uniform()};
      const auto analytic = predict_tree(tree, params, x);
      RngStream rng(500 + round, 0);
      const auto mc = predict_tree_mc_oracle(tree, params, x, 40000, rng);
      for (std::size_t k = 0; k < analytic.size(); ++k)
        CHECK(std::abs(analytic[k] - mc[k]) < 0.015);
    }
  }
  SUBCASE("zero samples are rejected") {
    const auto tree = random_tree(5, kInfinity, false, 2, 2);
    const PosteriorParams params = PosteriorParams::uniform(2, 20.0);
    RngStream rng(1, 0);
    CHECK_THROWS_AS(
        predict_tree_mc_oracle(tree, params, std::vector<double>{0.5, 0.5}, 0, rng),
        std::invalid_argument);
  }
}
