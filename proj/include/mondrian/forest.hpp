#pragma once

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "mondrian/prediction.hpp"
#include "mondrian/tree.hpp"
#include "mondrian/types.hpp"

namespace mondrian {

struct ForestConfig {
  std::uint32_t num_trees = 100;
  double lifetime = kInfinity;
  double gamma_multiplier = 10.0;  // discount scale gamma = multiplier * dim
  std::uint64_t seed = 0;
  bool use_pausing = true;
  std::uint32_t num_classes = 0;
  std::uint32_t num_features = 0;

  double gamma() const { return gamma_multiplier * num_features; }
};

/// Ensemble of independently grown Mondrian trees sharing one point store.
/// Tree m draws from stream (seed, m), so training the trees in parallel
/// produces exactly the forest that serial training would.
class MondrianForest {
 public:
  explicit MondrianForest(const ForestConfig& config);

  /// Batch fit; discards any previous state. Features are row-major.
  void fit(std::span<const double> features, std::span<const std::uint32_t> labels);

  /// Extends every tree with every point of the batch, in order. The first
  /// ever point initializes the trees; later points always extend.
  void partial_fit(std::span<const double> features,
                   std::span<const std::uint32_t> labels);

  /// Average of the per-tree predictive distributions.
  PredictiveDistribution predict_proba(std::span<const double> x) const;

  /// argmax of predict_proba; ties resolve to the smallest class index.
  std::uint32_t predict(std::span<const double> x) const;

  bool fitted() const { return !trees_.empty(); }
  std::size_t num_points() const { return store_ ? store_->size() : 0; }
  std::size_t num_trees() const { return trees_.size(); }
  const MondrianTree& tree(std::size_t m) const { return trees_[m]; }
  const ForestConfig& config() const { return config_; }
  const PosteriorParams& posterior_params() const { return params_; }

  std::vector<TreeStats> tree_stats() const;
  double mean_weighted_depth() const;

  /// Number of worker threads for training; prediction stays serial. Not
  /// part of the snapshot, and has no effect on the result.
  void set_num_threads(unsigned n) { num_threads_ = n; }
  unsigned num_threads() const { return num_threads_; }

  void save(std::ostream& out) const;
  static MondrianForest load(std::istream& in);

 private:
  void validate_batch(std::span<const double> features,
                      std::span<const std::uint32_t> labels) const;
  std::vector<std::uint32_t> append_points(std::span<const double> features,
                                           std::span<const std::uint32_t> labels);

  ForestConfig config_;
  PosteriorParams params_;
  std::shared_ptr<PointStore> store_;
  std::vector<MondrianTree> trees_;
  unsigned num_threads_ = 1;
};

}  // namespace mondrian
