#include "mondrian/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <stdexcept>

#include "mondrian/binary_io.hpp"
#include "mondrian/parallel.hpp"
#include "mondrian/prediction.hpp"
#include "mondrian/rng.hpp"

namespace mondrian {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::shared_ptr<PointStore> store_from(const Dataset& data) {
  auto store = std::make_shared<PointStore>(data.num_features);
  for (std::size_t i = 0; i < data.num_rows; ++i)
    store->add(data.row(i), data.labels[i]);
  return store;
}

double standard_normal(RngStream& rng) {
  const double u1 = rng.next_uniform();
  const double u2 = rng.next_uniform();
  return std::sqrt(-2.0 * std::log1p(-u1)) *
         std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

Dataset make_uniform_classification(std::size_t n, std::uint32_t d,
                                    std::uint32_t k, std::uint64_t seed) {
  Dataset data;
  data.num_rows = n;
  data.num_features = d;
  data.num_classes = k;
  data.features.reserve(n * d);
  data.labels.reserve(n);
  RngStream rng(seed, 0xDA7A);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::uint32_t j = 0; j < d; ++j) data.features.push_back(rng.next_uniform());
    data.labels.push_back(
        std::min<std::uint32_t>(static_cast<std::uint32_t>(rng.next_uniform() * k), k - 1));
  }
  return data;
}

Dataset make_blobs_classification(std::size_t n, std::uint32_t d, std::uint32_t k,
                                  std::uint64_t seed, double spread) {
  Dataset data;
  data.num_rows = n;
  data.num_features = d;
  data.num_classes = k;
  data.features.reserve(n * d);
  data.labels.reserve(n);
  RngStream rng(seed, 0xB70B);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t label =
        std::min<std::uint32_t>(static_cast<std::uint32_t>(rng.next_uniform() * k), k - 1);
    const double center = static_cast<double>(label + 1) / (k + 1);
    for (std::uint32_t j = 0; j < d; ++j) {
      const double v = center + spread * standard_normal(rng);
      data.features.push_back(std::clamp(v, 0.0, 1.0));
    }
    data.labels.push_back(label);
  }
  return data;
}

StatSamples collect_tree_stats(const Dataset& data, const TreeStatOptions& opt) {
  if (data.num_rows == 0)
    throw std::invalid_argument("collect_tree_stats: empty dataset");
  if (!opt.order.empty() && opt.order.size() != data.num_rows)
    throw std::invalid_argument("collect_tree_stats: bad insertion order");

  const auto store = store_from(data);
  std::vector<std::uint32_t> order(opt.order);
  if (order.empty()) {
    order.resize(data.num_rows);
    for (std::size_t i = 0; i < order.size(); ++i)
      order[i] = static_cast<std::uint32_t>(i);
  }

  const TreeConfig config{data.num_features, data.num_classes, opt.lifetime,
                          opt.pausing};
  const ExtendFaults faults{opt.broken_extend};

  StatSamples samples;
  samples.num_leaves.reserve(opt.num_seeds);
  samples.max_depth.reserve(opt.num_seeds);
  samples.root_time.reserve(opt.num_seeds);
  for (std::size_t s = 0; s < opt.num_seeds; ++s) {
    RngStream rng(opt.seed_base + s, opt.stream_salt);
    MondrianTree tree = [&] {
      if (!opt.online)
        return MondrianTree::sample(store, order, config, std::move(rng));
      const std::size_t prefix = std::clamp<std::size_t>(opt.batch_prefix, 1,
                                                         order.size());
      MondrianTree t = MondrianTree::sample(
          store, std::span<const std::uint32_t>(order.data(), prefix), config,
          std::move(rng));
      for (std::size_t i = prefix; i < order.size(); ++i) t.extend(order[i], faults);
      return t;
    }();
    const TreeStats stats = tree.stats();
    samples.num_leaves.push_back(static_cast<double>(stats.num_leaves));
    samples.max_depth.push_back(static_cast<double>(stats.max_depth));
    samples.root_time.push_back(tree.node(tree.root()).split_time);
  }
  return samples;
}

KsTriple ks_compare(const StatSamples& a, const StatSamples& b) {
  KsTriple out;
  out.num_leaves = ks_two_sample(a.num_leaves, b.num_leaves);
  out.max_depth = ks_two_sample(a.max_depth, b.max_depth);
  out.root_time = ks_two_sample(a.root_time, b.root_time);
  return out;
}

EquivalenceReport run_equivalence(const EquivalenceOptions& opt) {
  const Dataset data = make_uniform_classification(opt.num_points, opt.dim,
                                                   opt.num_classes, opt.data_seed);

  TreeStatOptions first;
  first.lifetime = opt.lifetime;
  first.num_seeds = opt.num_seeds;
  first.seed_base = opt.seed_base;
  TreeStatOptions second = first;

  switch (opt.mode) {
    case EquivalenceOptions::Mode::kOnlineVsBatch:
      first.online = false;
      first.stream_salt = 0x0ba7c4;
      second.online = true;
      second.stream_salt = 0x0a11e;
      break;
    case EquivalenceOptions::Mode::kBrokenSelfCheck:
      first.online = false;
      first.stream_salt = 0x0ba7c4;
      second.online = true;
      second.stream_salt = 0x0a11e;
      second.broken_extend = true;
      break;
    case EquivalenceOptions::Mode::kOrderInvariance: {
      first.online = true;
      first.stream_salt = 0x07de7a;
      second.online = true;
      second.stream_salt = 0x07de7b;
      // Fixed random permutation for the second run.
      std::vector<std::uint32_t> order(data.num_rows);
      for (std::size_t i = 0; i < order.size(); ++i)
        order[i] = static_cast<std::uint32_t>(i);
      RngStream rng(opt.data_seed ^ 0x5eed, 1);
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        const std::size_t j = static_cast<std::size_t>(
            rng.next_uniform() * static_cast<double>(i + 1));
        std::swap(order[i], order[j]);
      }
      second.order = std::move(order);
      break;
    }
  }

  EquivalenceReport report;
  report.insufficient = opt.num_seeds < 100;
  report.ks = ks_compare(collect_tree_stats(data, first),
                         collect_tree_stats(data, second));
  report.all_pass = report.ks.all_pass(opt.alpha);
  return report;
}

double evaluate_accuracy(const MondrianForest& forest, const Dataset& test,
                         unsigned num_threads) {
  if (test.num_rows == 0)
    throw std::invalid_argument("evaluate_accuracy: empty test split");
  std::vector<std::uint8_t> correct(test.num_rows, 0);
  parallel_for(test.num_rows, num_threads, [&](std::size_t i) {
    correct[i] = forest.predict(test.row(i)) == test.labels[i] ? 1 : 0;
  });
  std::size_t hits = 0;
  for (const std::uint8_t c : correct) hits += c;
  return static_cast<double>(hits) / static_cast<double>(test.num_rows);
}

namespace {

void gather_rows(const Dataset& data, std::span<const std::uint32_t> rows,
                 std::vector<double>& features, std::vector<std::uint32_t>& labels) {
  features.clear();
  labels.clear();
  for (const std::uint32_t r : rows) {
    const auto row = data.row(r);
    features.insert(features.end(), row.begin(), row.end());
    labels.push_back(data.labels[r]);
  }
}

}  // namespace

std::vector<RunRecord> evaluate_online(const Dataset& train, const Dataset& test,
                                       const EvalOptions& opt,
                                       MondrianForest* final_forest) {
  const MiniBatches batches = make_minibatches(train.num_rows, opt.num_batches,
                                               opt.shuffle_seed, opt.shuffle);
  MondrianForest forest(opt.config);
  forest.set_num_threads(opt.num_threads);

  std::vector<RunRecord> records;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;
  std::size_t seen = 0;
  double train_seconds = 0.0;
  for (const auto& [begin, end] : batches.ranges) {
    gather_rows(train,
                {batches.order.data() + begin, static_cast<std::size_t>(end - begin)},
                features, labels);
    const auto t0 = Clock::now();
    forest.partial_fit(features, labels);
    train_seconds += seconds_since(t0);
    seen += labels.size();

    RunRecord record;
    record.seed = opt.config.seed;
    record.fraction_seen = static_cast<double>(seen) / train.num_rows;
    record.cumulative_train_seconds = train_seconds;
    record.test_accuracy = evaluate_accuracy(forest, test, opt.num_threads);
    record.mean_weighted_depth = forest.mean_weighted_depth();
    records.push_back(record);
  }
  if (final_forest) *final_forest = std::move(forest);
  return records;
}

std::vector<RunRecord> evaluate_batch_fractions(const Dataset& train,
                                                const Dataset& test,
                                                const EvalOptions& opt,
                                                std::span<const double> fractions) {
  const MiniBatches batches =
      make_minibatches(train.num_rows, 1, opt.shuffle_seed, opt.shuffle);
  std::vector<RunRecord> records;
  std::vector<double> features;
  std::vector<std::uint32_t> labels;
  for (const double fraction : fractions) {
    if (!(fraction > 0.0) || fraction > 1.0)
      throw std::invalid_argument("evaluate_batch_fractions: fraction out of (0,1]");
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::llround(fraction * train.num_rows)), 1,
        train.num_rows);
    gather_rows(train, {batches.order.data(), count}, features, labels);

    MondrianForest forest(opt.config);
    forest.set_num_threads(opt.num_threads);
    const auto t0 = Clock::now();
    forest.fit(features, labels);
    const double fit_seconds = seconds_since(t0);

    RunRecord record;
    record.seed = opt.config.seed;
    record.fraction_seen = static_cast<double>(count) / train.num_rows;
    record.cumulative_train_seconds = fit_seconds;
    record.test_accuracy = evaluate_accuracy(forest, test, opt.num_threads);
    record.mean_weighted_depth = forest.mean_weighted_depth();
    records.push_back(record);
  }
  return records;
}

const char* const kRunRecordCsvHeader =
    "seed,fraction_seen,cumulative_train_seconds,test_accuracy,mean_weighted_depth";

void write_records_csv(std::ostream& out, std::span<const RunRecord> records) {
  out << kRunRecordCsvHeader << '\n';
  char buffer[256];
  for (const RunRecord& r : records) {
    std::snprintf(buffer, sizeof(buffer), "%llu,%.10g,%.6g,%.10g,%.10g",
                  static_cast<unsigned long long>(r.seed), r.fraction_seen,
                  r.cumulative_train_seconds, r.test_accuracy,
                  r.mean_weighted_depth);
    out << buffer << '\n';
  }
}

McCheckReport run_mc_check(const McCheckOptions& opt) {
  McCheckReport report;
  RngStream point_rng(opt.seed, 0x9017);
  const std::size_t total = opt.num_exterior + opt.num_interior;
  std::size_t exterior_done = 0, interior_done = 0;
  for (std::size_t f = 0; f < total; ++f) {
    const bool want_exterior = exterior_done < opt.num_exterior;
    const std::size_t n = 30 + (f % 4) * 10;
    const double lifetimes[] = {kInfinity, 1.0, 2.5};
    const Dataset data =
        make_blobs_classification(n, 2, 3, opt.seed + 101 * f, 0.1);
    const auto store = store_from(data);
    std::vector<std::uint32_t> ids(n);
    for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
    const TreeConfig config{2, 3, lifetimes[f % 3], f % 2 == 0};
    MondrianTree tree =
        MondrianTree::sample(store, ids, config, RngStream(opt.seed, 7000 + f));

    // Exterior points sit outside their leaf's extent; interior points are
    // training locations, which always sit inside.
    std::vector<double> x(2);
    bool exterior = false;
    for (int attempt = 0; attempt < 256; ++attempt) {
      if (want_exterior) {
        for (double& v : x) v = -0.4 + 1.8 * point_rng.next_uniform();
      } else {
        const auto row = data.row(static_cast<std::size_t>(
            point_rng.next_uniform() * static_cast<double>(n)));
        x.assign(row.begin(), row.end());
      }
      exterior = branch_off_probability(tree, tree.route_to_leaf(x), x).eta > 0.0;
      if (exterior == want_exterior) break;
    }

    const PosteriorParams params = PosteriorParams::uniform(3, 10.0 * 2);
    const auto analytic = predict_tree(tree, params, x);
    RngStream mc_rng(opt.seed, 8000 + f);
    const auto mc = predict_tree_mc_oracle(tree, params, x, opt.num_samples, mc_rng);

    McFixtureReport fixture;
    fixture.exterior = exterior;
    for (std::size_t k = 0; k < analytic.size(); ++k)
      fixture.max_abs_deviation =
          std::max(fixture.max_abs_deviation, std::abs(analytic[k] - mc[k]));
    NodeId j = tree.root();
    for (;;) {
      const auto branch = branch_off_probability(tree, j, x);
      fixture.max_branch_prob = std::max(fixture.max_branch_prob, branch.prob);
      ++fixture.path_length;
      if (tree.node(j).is_leaf()) {
        fixture.eta_at_leaf = branch.eta;
        break;
      }
      j = x[tree.node(j).split_dim] <= tree.node(j).split_loc ? tree.node(j).left
                                                              : tree.node(j).right;
    }
    report.fixtures.push_back(fixture);
    if (exterior) {
      ++exterior_done;
      report.max_deviation_exterior =
          std::max(report.max_deviation_exterior, fixture.max_abs_deviation);
    } else {
      ++interior_done;
      report.max_deviation_interior =
          std::max(report.max_deviation_interior, fixture.max_abs_deviation);
    }
  }
  return report;
}

ComplexityReport run_complexity_probe(const ComplexityOptions& opt) {
  struct Probe {
    std::size_t n;
    std::shared_ptr<PointStore> store;
    std::vector<double> times;
  };
  const auto make_probe = [&](std::size_t n, std::uint64_t salt) {
    return Probe{n, store_from(make_uniform_classification(n, 2, 2, opt.seed + salt)),
                 {}};
  };
  Probe small = make_probe(opt.small_n, 1);
  Probe large = make_probe(opt.large_n, 2);

  const TreeConfig config{2, 2, kInfinity, false};
  const auto train_trees = [&](const Probe& probe, std::size_t count,
                               std::uint64_t stream_base) {
    for (std::size_t m = 0; m < count; ++m) {
      const std::uint32_t first = 0;
      MondrianTree tree =
          MondrianTree::sample(probe.store, std::span<const std::uint32_t>(&first, 1),
                               config, RngStream(opt.seed + probe.n, stream_base + m));
      for (std::uint32_t i = 1; i < probe.n; ++i) tree.extend(i);
    }
  };
  const auto timed_run = [&](Probe& probe, std::size_t run) {
    const auto t0 = Clock::now();
    train_trees(probe, opt.trees_per_run, run * opt.trees_per_run);
    probe.times.push_back(seconds_since(t0));
  };

  // Warm the allocator and page cache, then interleave the two sizes in
  // alternating order: a slow machine phase hits both measurements of a run,
  // so the per-run ratio is insensitive to load drift.
  train_trees(small, 1, 1u << 20);
  train_trees(large, 1, 1u << 20);
  std::vector<double> ratios;
  for (std::size_t run = 0; run < opt.runs; ++run) {
    if (run % 2 == 0) {
      timed_run(small, run);
      timed_run(large, run);
    } else {
      timed_run(large, run);
      timed_run(small, run);
    }
    ratios.push_back(large.times.back() / small.times.back());
  }

  ComplexityReport report;
  report.median_small_seconds = median(std::move(small.times));
  report.median_large_seconds = median(std::move(large.times));
  report.ratio = median(std::move(ratios));
  return report;
}

namespace {
constexpr std::uint64_t kBundleMagic = 0x314c444e424d0a7fULL;
}

void save_model_bundle(const std::string& path, const MondrianForest& forest,
                       const Preprocessing* prep) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": cannot open for writing");
  io::write_u64(out, kBundleMagic);
  io::write_u8(out, prep ? 1 : 0);
  if (prep) {
    io::write_vec(out, prep->scaling.min);
    io::write_vec(out, prep->scaling.range);
    io::write_vec(out, prep->remap.originals);
  }
  forest.save(out);
  if (!out) throw std::runtime_error(path + ": write failed");
}

ModelBundle load_model_bundle(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open file");
  if (io::read_u64(in) != kBundleMagic)
    throw std::runtime_error(path + ": not a model bundle");
  std::optional<Preprocessing> prep;
  if (io::read_u8(in) != 0) {
    Preprocessing p;
    p.scaling.min = io::read_vec<double>(in);
    p.scaling.range = io::read_vec<double>(in);
    p.remap.originals = io::read_vec<long long>(in);
    prep = std::move(p);
  }
  return ModelBundle{MondrianForest::load(in), std::move(prep)};
}

}  // namespace mondrian
