#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mondrian/dataset.hpp"
#include "mondrian/forest.hpp"
#include "mondrian/stats.hpp"

namespace mondrian {

// ---------------------------------------------------------------------------
// Synthetic data generators used by the evaluation and test commands.

/// Uniform features in [0,1)^d with uniformly random labels.
Dataset make_uniform_classification(std::size_t n, std::uint32_t d,
                                    std::uint32_t k, std::uint64_t seed);

/// Gaussian blobs, one per class, centered along the unit-cube diagonal and
/// clamped to [0,1]^d; separable enough for a forest to score well.
Dataset make_blobs_classification(std::size_t n, std::uint32_t d, std::uint32_t k,
                                  std::uint64_t seed, double spread = 0.08);

// ---------------------------------------------------------------------------
// Distribution-equality experiments over tree statistics.

struct StatSamples {
  std::vector<double> num_leaves;
  std::vector<double> max_depth;
  std::vector<double> root_time;
};

struct TreeStatOptions {
  double lifetime = 2.0;
  bool pausing = false;
  bool online = false;  // batch construction otherwise
  std::size_t batch_prefix = 1;         // online mode: points fitted before extending
  std::size_t num_seeds = 2000;
  std::uint64_t seed_base = 1;
  std::uint64_t stream_salt = 0;        // keeps compared samples independent
  std::vector<std::uint32_t> order;     // online insertion order; empty = natural
  bool broken_extend = false;           // harness self-check fault
};

/// Builds one tree per seed on the fixed dataset and records
/// (num_leaves, max_depth, tau_root) for each.
StatSamples collect_tree_stats(const Dataset& data, const TreeStatOptions& opt);

struct KsTriple {
  KsTestResult num_leaves;
  KsTestResult max_depth;
  KsTestResult root_time;

  bool all_pass(double alpha) const {
    return num_leaves.p_value > alpha && max_depth.p_value > alpha &&
           root_time.p_value > alpha;
  }
};

KsTriple ks_compare(const StatSamples& a, const StatSamples& b);

struct EquivalenceOptions {
  enum class Mode {
    kOnlineVsBatch,    // the central online = batch claim
    kOrderInvariance,  // two random insertion orders
    kBrokenSelfCheck,  // batch vs deliberately broken online updates
  };
  Mode mode = Mode::kOnlineVsBatch;
  std::size_t num_points = 50;
  std::uint32_t dim = 2;
  std::uint32_t num_classes = 2;
  std::uint64_t data_seed = 7;
  double lifetime = 2.0;
  std::size_t num_seeds = 2000;
  std::uint64_t seed_base = 1;
  double alpha = 0.01;
};

struct EquivalenceReport {
  KsTriple ks;
  bool all_pass = false;       // every marginal has p > alpha
  bool insufficient = false;   // too few seeds for a meaningful test
};

EquivalenceReport run_equivalence(const EquivalenceOptions& opt);

// ---------------------------------------------------------------------------
// Streaming evaluation protocol: train on mini-batches, test after each.

struct RunRecord {
  std::uint64_t seed = 0;
  double fraction_seen = 0.0;
  double cumulative_train_seconds = 0.0;  // training only; excludes evaluation
  double test_accuracy = 0.0;
  double mean_weighted_depth = 0.0;
};

struct EvalOptions {
  ForestConfig config;
  std::size_t num_batches = 100;
  bool shuffle = true;
  std::uint64_t shuffle_seed = 0;
  unsigned num_threads = 1;
};

std::vector<RunRecord> evaluate_online(const Dataset& train, const Dataset& test,
                                       const EvalOptions& opt,
                                       MondrianForest* final_forest = nullptr);

std::vector<RunRecord> evaluate_batch_fractions(const Dataset& train,
                                                const Dataset& test,
                                                const EvalOptions& opt,
                                                std::span<const double> fractions);

/// Exact-match accuracy on the test split (argmax, ties to smaller class).
double evaluate_accuracy(const MondrianForest& forest, const Dataset& test,
                         unsigned num_threads = 1);

extern const char* const kRunRecordCsvHeader;
void write_records_csv(std::ostream& out, std::span<const RunRecord> records);

// ---------------------------------------------------------------------------
// Monte-Carlo consistency check of the analytic prediction.

struct McFixtureReport {
  bool exterior = false;
  double max_abs_deviation = 0.0;
  double eta_at_leaf = 0.0;
  double max_branch_prob = 0.0;
  std::size_t path_length = 0;
};

struct McCheckOptions {
  std::size_t num_exterior = 20;
  std::size_t num_interior = 5;
  std::size_t num_samples = 100000;
  std::uint64_t seed = 33;
};

struct McCheckReport {
  std::vector<McFixtureReport> fixtures;
  double max_deviation_exterior = 0.0;
  double max_deviation_interior = 0.0;
};

McCheckReport run_mc_check(const McCheckOptions& opt);

// ---------------------------------------------------------------------------
// Online training-cost growth probe (time N vs 2N insertions).

struct ComplexityOptions {
  std::size_t small_n = 4000;
  std::size_t large_n = 8000;
  std::size_t runs = 5;
  // Each timed run trains this many independent trees; long enough runs
  // average over bursty co-tenant load, and the per-tree cost is unchanged.
  std::size_t trees_per_run = 24;
  std::uint64_t seed = 5;
};

struct ComplexityReport {
  double median_small_seconds = 0.0;
  double median_large_seconds = 0.0;
  double ratio = 0.0;
};

ComplexityReport run_complexity_probe(const ComplexityOptions& opt);

// ---------------------------------------------------------------------------
// Model bundle: forest snapshot plus the preprocessing needed to serve raw
// inputs (feature scaling and the label alphabet).

struct Preprocessing {
  ScalingParams scaling;
  LabelRemap remap;
};

void save_model_bundle(const std::string& path, const MondrianForest& forest,
                       const Preprocessing* prep);

struct ModelBundle {
  MondrianForest forest;
  std::optional<Preprocessing> prep;
};

ModelBundle load_model_bundle(const std::string& path);

}  // namespace mondrian
