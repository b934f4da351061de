// Command-line interface for training and evaluating Mondrian forests.
//
// Subcommands: eval-online, eval-batch, equivalence-test, depth-stats,
// mc-check, predict. Exit codes: 0 success, 1 validation or I/O error,
// 2 acceptance-style check failed.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mondrian/dataset.hpp"
#include "mondrian/forest.hpp"
#include "mondrian/harness.hpp"
#include "mondrian/prediction.hpp"
#include "mondrian/stats.hpp"

namespace {

using namespace mondrian;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitCheckFailed = 2;

struct CommonFlags {
  std::string format = "csv";
  bool skip_header = false;
  std::uint32_t trees = 100;
  std::string lifetime = "inf";
  double gamma_mult = 10.0;
  std::uint64_t seed = 1;
  std::size_t seeds = 5;
  std::size_t batches = 100;
  bool no_shuffle = false;
  std::string pausing = "on";
  unsigned threads = 1;
  std::string out_path;
  std::string snapshot_path;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--format", flags.format, "Input format")
      ->check(CLI::IsMember({"csv", "libsvm"}));
  cmd->add_flag("--header", flags.skip_header, "Skip one CSV header line");
  cmd->add_option("--trees", flags.trees, "Number of trees");
  cmd->add_option("--lifetime", flags.lifetime, "Tree lifetime (number or 'inf')");
  cmd->add_option("--gamma-mult", flags.gamma_mult,
                  "Discount scale multiplier (gamma = mult * D)");
  cmd->add_option("--seed", flags.seed, "Base seed");
  cmd->add_option("--seeds", flags.seeds, "Number of repeated runs");
  cmd->add_option("--batches", flags.batches, "Number of training mini-batches");
  cmd->add_flag("--no-shuffle", flags.no_shuffle,
                "Keep file order instead of a seeded shuffle");
  cmd->add_option("--pausing", flags.pausing, "Pause pure-label blocks")
      ->check(CLI::IsMember({"on", "off"}));
  cmd->add_option("--threads", flags.threads, "Worker threads for training/eval");
  cmd->add_option("--out", flags.out_path, "CSV output path (default: stdout)");
  cmd->add_option("--snapshot", flags.snapshot_path,
                  "Save the final forest (last run) to this path");
}

double parse_lifetime(const std::string& text) {
  if (text == "inf" || text == "infinity" || text == "+inf") return kInfinity;
  std::size_t pos = 0;
  const double value = std::stod(text, &pos);
  if (pos != text.size() || !(value > 0.0))
    throw std::runtime_error("--lifetime must be a positive number or 'inf'");
  return value;
}

DataFormat parse_format(const std::string& text) {
  return text == "csv" ? DataFormat::kCsv : DataFormat::kLibsvm;
}

struct LoadedSplits {
  Dataset train;
  Dataset test;
  Preprocessing prep;
};

// Loads both splits, maps labels over their union, pads LIBSVM rows to a
// common width, and min-max scales with parameters fit on the train split.
LoadedSplits load_splits(const std::string& train_path, const std::string& test_path,
                         DataFormat format, bool skip_header) {
  RawDataset raw_train = load_raw(train_path, format, skip_header);
  RawDataset raw_test = load_raw(test_path, format, skip_header);
  if (format == DataFormat::kLibsvm) {
    const std::uint32_t dim = std::max(raw_train.num_features, raw_test.num_features);
    pad_features(raw_train, dim);
    pad_features(raw_test, dim);
  }
  if (raw_train.num_features != raw_test.num_features)
    throw std::runtime_error("train and test dimensions differ");

  const RawDataset* files[] = {&raw_train, &raw_test};
  LoadedSplits splits;
  splits.prep.remap = build_label_remap(files);
  splits.train = encode_labels(raw_train, splits.prep.remap);
  splits.test = encode_labels(raw_test, splits.prep.remap);
  splits.prep.scaling = fit_scaling(splits.train);
  splits.train = apply_scaling(splits.prep.scaling, std::move(splits.train));
  splits.test = apply_scaling(splits.prep.scaling, std::move(splits.test));
  return splits;
}

ForestConfig make_config(const CommonFlags& flags, const Dataset& train) {
  ForestConfig config;
  config.num_trees = flags.trees;
  config.lifetime = parse_lifetime(flags.lifetime);
  config.gamma_multiplier = flags.gamma_mult;
  config.seed = flags.seed;
  config.use_pausing = flags.pausing == "on";
  config.num_classes = train.num_classes;
  config.num_features = train.num_features;
  return config;
}

void write_meta_file(const std::string& csv_path, const CommonFlags& flags,
                     const ForestConfig& config, const Preprocessing& prep) {
  std::ofstream meta(csv_path + ".meta");
  if (!meta) throw std::runtime_error(csv_path + ".meta: cannot open for writing");
  meta.precision(17);
  meta << "trees=" << config.num_trees << '\n'
       << "lifetime=" << config.lifetime << '\n'
       << "gamma_multiplier=" << config.gamma_multiplier << '\n'
       << "seed=" << config.seed << '\n'
       << "seeds=" << flags.seeds << '\n'
       << "batches=" << flags.batches << '\n'
       << "pausing=" << (config.use_pausing ? "on" : "off") << '\n'
       << "shuffle=" << (flags.no_shuffle ? "off" : "on") << '\n'
       << "num_classes=" << config.num_classes << '\n'
       << "num_features=" << config.num_features << '\n';
  meta << "scaling_min=";
  for (std::size_t d = 0; d < prep.scaling.min.size(); ++d)
    meta << (d ? " " : "") << prep.scaling.min[d];
  meta << "\nscaling_range=";
  for (std::size_t d = 0; d < prep.scaling.range.size(); ++d)
    meta << (d ? " " : "") << prep.scaling.range[d];
  meta << "\nlabels=";
  for (std::size_t k = 0; k < prep.remap.originals.size(); ++k)
    meta << (k ? " " : "") << prep.remap.originals[k];
  meta << '\n';
}

void emit_records(const CommonFlags& flags, const ForestConfig& config,
                  const Preprocessing& prep, std::span<const RunRecord> records) {
  if (flags.out_path.empty()) {
    write_records_csv(std::cout, records);
    return;
  }
  std::ofstream out(flags.out_path);
  if (!out) throw std::runtime_error(flags.out_path + ": cannot open for writing");
  write_records_csv(out, records);
  write_meta_file(flags.out_path, flags, config, prep);
}

int cmd_eval_online(const std::string& train_path, const std::string& test_path,
                    const CommonFlags& flags) {
  const LoadedSplits splits = load_splits(train_path, test_path,
                                          parse_format(flags.format),
                                          flags.skip_header);
  const ForestConfig base_config = make_config(flags, splits.train);

  std::vector<RunRecord> records;
  MondrianForest last_forest(base_config);
  for (std::size_t s = 0; s < flags.seeds; ++s) {
    EvalOptions opt;
    opt.config = base_config;
    opt.config.seed = flags.seed + s;
    opt.num_batches = flags.batches;
    opt.shuffle = !flags.no_shuffle;
    opt.shuffle_seed = opt.config.seed;
    opt.num_threads = flags.threads;
    auto seed_records = evaluate_online(splits.train, splits.test, opt, &last_forest);
    records.insert(records.end(), seed_records.begin(), seed_records.end());
  }
  emit_records(flags, base_config, splits.prep, records);
  if (!flags.snapshot_path.empty())
    save_model_bundle(flags.snapshot_path, last_forest, &splits.prep);
  return kExitOk;
}

int cmd_eval_batch(const std::string& train_path, const std::string& test_path,
                   const CommonFlags& flags, std::vector<double> fractions) {
  if (fractions.empty())
    for (int i = 1; i <= 10; ++i) fractions.push_back(0.1 * i);
  const LoadedSplits splits = load_splits(train_path, test_path,
                                          parse_format(flags.format),
                                          flags.skip_header);
  const ForestConfig base_config = make_config(flags, splits.train);

  std::vector<RunRecord> records;
  for (std::size_t s = 0; s < flags.seeds; ++s) {
    EvalOptions opt;
    opt.config = base_config;
    opt.config.seed = flags.seed + s;
    opt.shuffle = !flags.no_shuffle;
    opt.shuffle_seed = opt.config.seed;
    opt.num_threads = flags.threads;
    auto seed_records =
        evaluate_batch_fractions(splits.train, splits.test, opt, fractions);
    records.insert(records.end(), seed_records.begin(), seed_records.end());
  }
  emit_records(flags, base_config, splits.prep, records);
  return kExitOk;
}

void print_ks_line(const char* name, const KsTestResult& result, double alpha) {
  std::printf("  %-10s D=%.5f  p=%.5g  [%s]\n", name, result.statistic,
              result.p_value, result.p_value > alpha ? "ok" : "reject");
}

int cmd_equivalence(std::size_t num_points, std::size_t num_seeds, double alpha,
                    std::uint64_t data_seed, std::uint64_t seed,
                    const std::string& lifetime, bool order_invariance,
                    bool self_check_broken) {
  EquivalenceOptions opt;
  opt.num_points = num_points;
  opt.num_seeds = num_seeds;
  opt.alpha = alpha;
  opt.data_seed = data_seed;
  opt.seed_base = seed;
  opt.lifetime = parse_lifetime(lifetime);
  opt.mode = self_check_broken ? EquivalenceOptions::Mode::kBrokenSelfCheck
             : order_invariance ? EquivalenceOptions::Mode::kOrderInvariance
                                : EquivalenceOptions::Mode::kOnlineVsBatch;

  const char* label = self_check_broken ? "broken-extension self-check"
                      : order_invariance ? "order invariance"
                                         : "online vs batch";
  std::printf("%s: two-sample KS over %zu seeds (N=%zu, alpha=%g)\n", label,
              num_seeds, num_points, alpha);
  const EquivalenceReport report = run_equivalence(opt);
  if (report.insufficient)
    std::printf("  warning: insufficient samples for a meaningful test\n");
  print_ks_line("num_leaves", report.ks.num_leaves, alpha);
  print_ks_line("max_depth", report.ks.max_depth, alpha);
  print_ks_line("tau_root", report.ks.root_time, alpha);

  if (self_check_broken) {
    const bool detected = !report.all_pass;
    std::printf("result: %s\n", detected ? "PASS (fault detected)"
                                         : "FAIL (fault went undetected)");
    return detected ? kExitOk : kExitCheckFailed;
  }
  std::printf("result: %s\n", report.all_pass ? "PASS" : "FAIL");
  return report.all_pass ? kExitOk : kExitCheckFailed;
}

int cmd_depth_stats(const std::string& train_path, const CommonFlags& flags) {
  auto [data, remap] = load_dataset(train_path, parse_format(flags.format),
                                    flags.skip_header);
  const ScalingParams scaling = fit_scaling(data);
  data = apply_scaling(scaling, std::move(data));

  const ForestConfig config = make_config(flags, data);
  MondrianForest forest(config);
  forest.set_num_threads(flags.threads);
  forest.fit(data.features, data.labels);

  std::vector<double> depths;
  for (const TreeStats& stats : forest.tree_stats())
    depths.push_back(stats.data_weighted_depth);
  std::printf("N=%zu  log2(N)=%.2f\n", data.num_rows,
              std::log2(static_cast<double>(data.num_rows)));
  std::printf("data-weighted depth over %zu trees: %.3f +/- %.3f\n",
              depths.size(), mean(depths), sample_stddev(depths));
  return kExitOk;
}

int cmd_mc_check(std::size_t fixtures, std::size_t interior, std::size_t samples,
                 std::uint64_t seed, double tolerance) {
  McCheckOptions opt;
  opt.num_exterior = fixtures;
  opt.num_interior = interior;
  opt.num_samples = samples;
  opt.seed = seed;
  const McCheckReport report = run_mc_check(opt);
  for (std::size_t i = 0; i < report.fixtures.size(); ++i) {
    const McFixtureReport& f = report.fixtures[i];
    std::printf("fixture %2zu: %s  path=%zu  eta_leaf=%.4f  max_ps=%.4f  dev=%.6f\n",
                i, f.exterior ? "exterior" : "interior", f.path_length,
                f.eta_at_leaf, f.max_branch_prob, f.max_abs_deviation);
  }
  std::printf("max deviation: exterior=%.6f (tol %.4f), interior=%.17g (tol 0)\n",
              report.max_deviation_exterior, tolerance,
              report.max_deviation_interior);
  const bool pass = report.max_deviation_exterior < tolerance &&
                    report.max_deviation_interior == 0.0;
  std::printf("result: %s\n", pass ? "PASS" : "FAIL");
  return pass ? kExitOk : kExitCheckFailed;
}

int cmd_predict(const std::string& snapshot_path, const std::string& point_text,
                bool raw) {
  ModelBundle bundle = load_model_bundle(snapshot_path);
  std::vector<double> x;
  std::stringstream ss(point_text);
  std::string token;
  while (std::getline(ss, token, ',')) x.push_back(std::stod(token));
  if (x.size() != bundle.forest.config().num_features)
    throw std::runtime_error("point has wrong dimension");
  if (!raw && bundle.prep) {
    for (std::size_t d = 0; d < x.size(); ++d) {
      const double range = bundle.prep->scaling.range[d];
      x[d] = range == 0.0 ? 0.0 : (x[d] - bundle.prep->scaling.min[d]) / range;
    }
  }
  const auto probs = bundle.forest.predict_proba(x);
  const std::uint32_t predicted = bundle.forest.predict(x);
  std::printf("probabilities:");
  for (const double p : probs) std::printf(" %.6f", p);
  std::printf("\n");
  if (bundle.prep)
    std::printf("predicted label: %lld (class index %u)\n",
                bundle.prep->remap.decode(predicted), predicted);
  else
    std::printf("predicted class index: %u\n", predicted);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mondrian forest training, evaluation and diagnostics"};
  app.require_subcommand(1);

  std::string train_path, test_path;
  CommonFlags flags;
  std::vector<double> fractions;

  auto* online = app.add_subcommand("eval-online",
                                    "Stream mini-batches and track test accuracy");
  online->add_option("--train", train_path, "Training split")->required();
  online->add_option("--test", test_path, "Test split")->required();
  add_common_flags(online, flags);

  auto* batch = app.add_subcommand("eval-batch",
                                   "Fit fresh forests on growing fractions");
  batch->add_option("--train", train_path, "Training split")->required();
  batch->add_option("--test", test_path, "Test split")->required();
  batch->add_option("--fractions", fractions, "Training fractions in (0,1]");
  add_common_flags(batch, flags);

  std::size_t eq_points = 50, eq_seeds = 2000;
  double eq_alpha = 0.01;
  std::uint64_t eq_data_seed = 7, eq_seed = 1;
  std::string eq_lifetime = "2.0";
  bool eq_order = false, eq_broken = false;
  auto* equivalence = app.add_subcommand(
      "equivalence-test", "KS test that online and batch training agree");
  equivalence->add_option("--num-points", eq_points, "Synthetic dataset size");
  equivalence->add_option("--num-seeds", eq_seeds, "Trees per side");
  equivalence->add_option("--alpha", eq_alpha, "Rejection level");
  equivalence->add_option("--data-seed", eq_data_seed, "Synthetic data seed");
  equivalence->add_option("--seed", eq_seed, "Tree seed base");
  equivalence->add_option("--lifetime", eq_lifetime, "Tree lifetime");
  equivalence->add_flag("--order-invariance", eq_order,
                        "Compare two insertion orders instead");
  equivalence
      ->add_flag("--self-check-broken", eq_broken,
                 "Verify the test rejects a deliberately broken update")
      ->group("");  // hidden

  auto* depth = app.add_subcommand("depth-stats",
                                   "Report data-weighted tree depth");
  depth->add_option("--train", train_path, "Training split")->required();
  add_common_flags(depth, flags);

  std::size_t mc_fixtures = 20, mc_interior = 5, mc_samples = 100000;
  std::uint64_t mc_seed = 33;
  double mc_tol = 0.01;
  auto* mc = app.add_subcommand("mc-check",
                                "Compare analytic prediction to sampling");
  mc->add_option("--fixtures", mc_fixtures, "Exterior-point fixtures");
  mc->add_option("--interior", mc_interior, "Interior-point fixtures");
  mc->add_option("--samples", mc_samples, "Monte-Carlo samples per fixture");
  mc->add_option("--seed", mc_seed, "Seed");
  mc->add_option("--tol", mc_tol, "Max per-class deviation for exterior points");

  std::string snapshot_path, point_text;
  bool predict_raw = false;
  auto* predict = app.add_subcommand("predict",
                                     "Single-point inference from a snapshot");
  predict->add_option("--snapshot", snapshot_path, "Model bundle path")->required();
  predict->add_option("--point", point_text, "Comma-separated feature vector")
      ->required();
  predict->add_flag("--raw", predict_raw, "Skip the stored feature scaling");

  CLI11_PARSE(app, argc, argv);

  try {
    if (online->parsed()) return cmd_eval_online(train_path, test_path, flags);
    if (batch->parsed())
      return cmd_eval_batch(train_path, test_path, flags, fractions);
    if (equivalence->parsed())
      return cmd_equivalence(eq_points, eq_seeds, eq_alpha, eq_data_seed, eq_seed,
                             eq_lifetime, eq_order, eq_broken);
    if (depth->parsed()) return cmd_depth_stats(train_path, flags);
    if (mc->parsed())
      return cmd_mc_check(mc_fixtures, mc_interior, mc_samples, mc_seed, mc_tol);
    if (predict->parsed())
      return cmd_predict(snapshot_path, point_text, predict_raw);
  } catch (const std::exception& err) {
    std::cerr << "error: " << err.what() << '\n';
    return kExitError;
  }
  return kExitOk;
}
