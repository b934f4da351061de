#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <sstream>
#include <vector>

#include "mondrian/forest.hpp"
#include "mondrian/harness.hpp"

using namespace mondrian;

namespace {

ForestConfig small_config(std::uint32_t trees, std::uint64_t seed,
                          double lifetime = kInfinity, bool pausing = true) {
  ForestConfig config;
  config.num_trees = trees;
  config.lifetime = lifetime;
  config.seed = seed;
  config.use_pausing = pausing;
  config.num_classes = 2;
  config.num_features = 2;
  return config;
}

std::string snapshot_of(const MondrianForest& forest) {
  std::stringstream buffer;
  forest.save(buffer);
  return buffer.str();
}

}  // namespace

TEST_CASE("single tree, single point") {
  MondrianForest forest(small_config(1, 3));
  forest.fit(std::vector<double>{0.4, 0.6}, std::vector<std::uint32_t>{1});
  CHECK(forest.num_trees() == 1);
  CHECK(forest.tree(0).num_nodes() == 1);
  const auto probs = forest.predict_proba(std::vector<double>{0.4, 0.6});
  const auto tree_probs =
      predict_tree(forest.tree(0), forest.posterior_params(),
                   std::vector<double>{0.4, 0.6});
  CHECK(probs == tree_probs);
}

TEST_CASE("forest prediction is the average of tree predictions") {
  const Dataset data = make_blobs_classification(60, 2, 2, 9);
  MondrianForest forest(small_config(5, 4));
  forest.fit(data.features, data.labels);
  const std::vector<double> x{0.35, 0.65};
  const auto probs = forest.predict_proba(x);
  std::vector<double> expected(2, 0.0);
  for (std::size_t m = 0; m < forest.num_trees(); ++m) {
    const auto tree_probs = predict_tree(forest.tree(m), forest.posterior_params(), x);
    for (std::size_t k = 0; k < 2; ++k) expected[k] += tree_probs[k];
  }
  for (std::size_t k = 0; k < 2; ++k)
    CHECK(probs[k] == doctest::Approx(expected[k] / 5.0).epsilon(1e-15));
  CHECK(std::abs(probs[0] + probs[1] - 1.0) < 1e-9);
}

TEST_CASE("argmax prediction breaks ties toward the smaller class") {
  // One point of each class at the same location: the leaf posterior is
  // exactly (1/2, 1/2), so the tie rule decides.
  MondrianForest forest(small_config(3, 5));
  forest.fit(std::vector<double>{0.5, 0.5, 0.5, 0.5},
             std::vector<std::uint32_t>{0, 1});
  const auto probs = forest.predict_proba(std::vector<double>{0.5, 0.5});
  CHECK(probs[0] == probs[1]);
  CHECK(forest.predict(std::vector<double>{0.5, 0.5}) == 0);
}

TEST_CASE("predict agrees with argmax of predict_proba") {
  const Dataset data = make_blobs_classification(80, 2, 3, 10);
  ForestConfig config = small_config(7, 6);
  config.num_classes = 3;
  MondrianForest forest(config);
  forest.fit(data.features, data.labels);
  RngStream rng(11, 0);
  for (int i = 0; i < 200; ++i) {
    const std::vector<double> x{rng.next_uniform(), rng.next_uniform()};
    const auto probs = forest.predict_proba(x);
    std::uint32_t best = 0;
    for (std::uint32_t k = 1; k < probs.size(); ++k)
      if (probs[k] > probs[best]) best = k;
    CHECK(forest.predict(x) == best);
  }
}

TEST_CASE("determinism: identical seeds give byte-identical snapshots") {
  const Dataset data = make_blobs_classification(100, 2, 2, 12);
  MondrianForest a(small_config(4, 77));
  MondrianForest b(small_config(4, 77));
  a.fit(data.features, data.labels);
  b.fit(data.features, data.labels);
  CHECK(snapshot_of(a) == snapshot_of(b));

  MondrianForest c(small_config(4, 78));
  c.fit(data.features, data.labels);
  CHECK(snapshot_of(a) != snapshot_of(c));
}

TEST_CASE("parallel training equals serial training") {
  const Dataset data = make_blobs_classification(150, 2, 2, 13);
  MondrianForest serial(small_config(6, 21));
  serial.set_num_threads(1);
  MondrianForest parallel(small_config(6, 21));
  parallel.set_num_threads(4);

  const std::size_t half = 75 * 2;
  serial.fit({data.features.data(), half}, {data.labels.data(), 75});
  parallel.fit({data.features.data(), half}, {data.labels.data(), 75});
  serial.partial_fit({data.features.data() + half, half},
                     {data.labels.data() + 75, 75});
  parallel.partial_fit({data.features.data() + half, half},
                       {data.labels.data() + 75, 75});
  CHECK(snapshot_of(serial) == snapshot_of(parallel));
}

TEST_CASE("partial_fit") {
  SUBCASE("an empty batch is a no-op") {
    MondrianForest forest(small_config(2, 1));
    forest.partial_fit({}, {});
    CHECK(!forest.fitted());
    forest.partial_fit(std::vector<double>{0.1, 0.2}, std::vector<std::uint32_t>{0});
    const std::string before = snapshot_of(forest);
    forest.partial_fit({}, {});
    CHECK(snapshot_of(forest) == before);
  }
  SUBCASE("the first call initializes, later calls extend") {
    const Dataset data = make_blobs_classification(40, 2, 2, 14);
    MondrianForest forest(small_config(3, 2));
    forest.partial_fit(data.features, data.labels);
    CHECK(forest.fitted());
    CHECK(forest.num_points() == 40);
    for (std::size_t m = 0; m < forest.num_trees(); ++m)
      CHECK(forest.tree(m).num_points() == 40);
  }
  SUBCASE("a single-point batch reaches every tree") {
    MondrianForest forest(small_config(3, 3));
    forest.partial_fit(std::vector<double>{0.1, 0.9}, std::vector<std::uint32_t>{1});
    forest.partial_fit(std::vector<double>{0.8, 0.2}, std::vector<std::uint32_t>{0});
    for (std::size_t m = 0; m < forest.num_trees(); ++m)
      CHECK(forest.tree(m).num_points() == 2);
  }
}

TEST_CASE("snapshot round-trip resumes training identically") {
  const Dataset data = make_blobs_classification(80, 2, 2, 15);
  MondrianForest forest(small_config(3, 8));
  const std::size_t half_rows = 40;
  forest.partial_fit({data.features.data(), half_rows * 2},
                     {data.labels.data(), half_rows});

  std::stringstream buffer;
  forest.save(buffer);
  MondrianForest restored = MondrianForest::load(buffer);
  CHECK(snapshot_of(restored) == snapshot_of(forest));

  forest.partial_fit({data.features.data() + half_rows * 2, half_rows * 2},
                     {data.labels.data() + half_rows, half_rows});
  restored.partial_fit({data.features.data() + half_rows * 2, half_rows * 2},
                       {data.labels.data() + half_rows, half_rows});
  CHECK(snapshot_of(restored) == snapshot_of(forest));
}

TEST_CASE("validation errors") {
  MondrianForest forest(small_config(2, 1));
  CHECK_THROWS_AS(forest.predict_proba(std::vector<double>{0.1, 0.2}),
                  std::logic_error);
  CHECK_THROWS_AS(forest.fit({}, {}), std::invalid_argument);
  CHECK_THROWS_AS(forest.fit(std::vector<double>{0.1, 0.2},
                             std::vector<std::uint32_t>{7}),
                  std::invalid_argument);  // label out of range
  CHECK_THROWS_AS(forest.fit(std::vector<double>{0.1},
                             std::vector<std::uint32_t>{0}),
                  std::invalid_argument);  // wrong width
  ForestConfig bad = small_config(0, 1);
  CHECK_THROWS_AS(MondrianForest{bad}, std::invalid_argument);
}

TEST_CASE("batch-then-extend matches pure batch in distribution") {
  // Fit on half, stream the rest: tree statistics must be indistinguishable
  // from fitting on everything at once.
  const Dataset data = make_uniform_classification(40, 2, 2, 19);
  TreeStatOptions batch;
  batch.lifetime = 2.0;
  batch.num_seeds = 800;
  batch.seed_base = 60;
  batch.stream_salt = 1;
  TreeStatOptions mixed = batch;
  mixed.online = true;
  mixed.batch_prefix = 20;
  mixed.stream_salt = 2;
  const KsTriple ks =
      ks_compare(collect_tree_stats(data, batch), collect_tree_stats(data, mixed));
  CHECK(ks.num_leaves.p_value > 0.01);
  CHECK(ks.max_depth.p_value > 0.01);
  CHECK(ks.root_time.p_value > 0.01);
}

TEST_CASE("accuracy on separable blobs is high for both training modes") {
  const Dataset train = make_blobs_classification(500, 2, 2, 16);
  const Dataset test = make_blobs_classification(300, 2, 2, 17);

  ForestConfig config = small_config(20, 9);
  MondrianForest batch(config);
  batch.fit(train.features, train.labels);
  const double batch_accuracy = evaluate_accuracy(batch, test);

  MondrianForest online(config);
  for (std::size_t i = 0; i < train.num_rows; ++i)
    online.partial_fit({train.features.data() + i * 2, 2}, {&train.labels[i], 1});
  const double online_accuracy = evaluate_accuracy(online, test);

  CHECK(batch_accuracy > 0.9);
  CHECK(online_accuracy > 0.9);
  CHECK(batch.mean_weighted_depth() > 0.0);
}
