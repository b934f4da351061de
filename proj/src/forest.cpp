#include "mondrian/forest.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "mondrian/binary_io.hpp"
#include "mondrian/parallel.hpp"

namespace mondrian {

namespace {
constexpr std::uint64_t kForestMagic = 0x31504e53464d0a7fULL;  // "\x7f\nMFSNP1"
constexpr std::uint32_t kForestVersion = 1;
}  // namespace

MondrianForest::MondrianForest(const ForestConfig& config)
    : config_(config),
      params_(PosteriorParams::uniform(
          config.num_classes == 0 ? 1 : config.num_classes,
          config.num_features == 0 ? 1.0 : config.gamma())) {
  if (config.num_trees < 1)
    throw std::invalid_argument("MondrianForest: need at least one tree");
  if (config.num_classes < 2)
    throw std::invalid_argument("MondrianForest: need at least two classes");
  if (config.num_features < 1)
    throw std::invalid_argument("MondrianForest: need at least one feature");
  if (!(config.lifetime > 0.0))
    throw std::invalid_argument("MondrianForest: lifetime must be positive");
  if (!(config.gamma_multiplier > 0.0))
    throw std::invalid_argument("MondrianForest: gamma multiplier must be positive");
}

void MondrianForest::validate_batch(std::span<const double> features,
                                    std::span<const std::uint32_t> labels) const {
  if (labels.empty()) return;
  if (features.size() != labels.size() * config_.num_features)
    throw std::invalid_argument("MondrianForest: feature/label size mismatch");
  for (const std::uint32_t y : labels)
    if (y >= config_.num_classes)
      throw std::invalid_argument("MondrianForest: label out of range");
  for (const double v : features)
    if (!std::isfinite(v))
      throw std::invalid_argument("MondrianForest: non-finite feature");
}

std::vector<std::uint32_t> MondrianForest::append_points(
    std::span<const double> features, std::span<const std::uint32_t> labels) {
  std::vector<std::uint32_t> ids;
  ids.reserve(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i)
    ids.push_back(store_->add(features.subspan(i * config_.num_features,
                                               config_.num_features),
                              labels[i]));
  return ids;
}

void MondrianForest::fit(std::span<const double> features,
                         std::span<const std::uint32_t> labels) {
  validate_batch(features, labels);
  if (labels.empty())
    throw std::invalid_argument("MondrianForest::fit: empty dataset");

  store_ = std::make_shared<PointStore>(config_.num_features);
  trees_.clear();
  const std::vector<std::uint32_t> ids = append_points(features, labels);

  const TreeConfig tree_config{config_.num_features, config_.num_classes,
                               config_.lifetime, config_.use_pausing};
  std::vector<std::optional<MondrianTree>> slots(config_.num_trees);
  parallel_for(config_.num_trees, num_threads_, [&](std::size_t m) {
    slots[m] = MondrianTree::sample(store_, ids, tree_config,
                                    RngStream(config_.seed, m));
  });
  trees_.reserve(config_.num_trees);
  for (auto& slot : slots) trees_.push_back(std::move(*slot));
}

void MondrianForest::partial_fit(std::span<const double> features,
                                 std::span<const std::uint32_t> labels) {
  validate_batch(features, labels);
  if (labels.empty()) return;

  if (!fitted()) {
    store_ = std::make_shared<PointStore>(config_.num_features);
    const std::vector<std::uint32_t> ids = append_points(features, labels);
    const TreeConfig tree_config{config_.num_features, config_.num_classes,
                                 config_.lifetime, config_.use_pausing};
    const std::uint32_t first = ids.front();
    std::vector<std::optional<MondrianTree>> slots(config_.num_trees);
    parallel_for(config_.num_trees, num_threads_, [&](std::size_t m) {
      MondrianTree tree = MondrianTree::sample(
          store_, std::span<const std::uint32_t>(&first, 1), tree_config,
          RngStream(config_.seed, m));
      for (std::size_t i = 1; i < ids.size(); ++i) tree.extend(ids[i]);
      slots[m] = std::move(tree);
    });
    trees_.reserve(config_.num_trees);
    for (auto& slot : slots) trees_.push_back(std::move(*slot));
    return;
  }

  const std::vector<std::uint32_t> ids = append_points(features, labels);
  parallel_for(trees_.size(), num_threads_, [&](std::size_t m) {
    for (const std::uint32_t id : ids) trees_[m].extend(id);
  });
}

PredictiveDistribution MondrianForest::predict_proba(
    std::span<const double> x) const {
  if (!fitted())
    throw std::logic_error("MondrianForest::predict_proba: forest not fitted");
  std::vector<double> mean(config_.num_classes, 0.0);
  for (const MondrianTree& tree : trees_) {
    const auto probs = predict_tree(tree, params_, x);
    for (std::uint32_t k = 0; k < config_.num_classes; ++k) mean[k] += probs[k];
  }
  const double inv = 1.0 / static_cast<double>(trees_.size());
  for (double& v : mean) v *= inv;
  return mean;
}

std::uint32_t MondrianForest::predict(std::span<const double> x) const {
  const auto probs = predict_proba(x);
  std::uint32_t best = 0;
  for (std::uint32_t k = 1; k < probs.size(); ++k)
    if (probs[k] > probs[best]) best = k;  // ties keep the smaller index
  return best;
}

std::vector<TreeStats> MondrianForest::tree_stats() const {
  std::vector<TreeStats> out;
  out.reserve(trees_.size());
  for (const MondrianTree& tree : trees_) out.push_back(tree.stats());
  return out;
}

double MondrianForest::mean_weighted_depth() const {
  if (trees_.empty()) return 0.0;
  double total = 0.0;
  for (const MondrianTree& tree : trees_) total += tree.stats().data_weighted_depth;
  return total / static_cast<double>(trees_.size());
}

void MondrianForest::save(std::ostream& out) const {
  io::write_u64(out, kForestMagic);
  io::write_u32(out, kForestVersion);
  io::write_u32(out, config_.num_trees);
  io::write_f64(out, config_.lifetime);
  io::write_f64(out, config_.gamma_multiplier);
  io::write_u64(out, config_.seed);
  io::write_u8(out, config_.use_pausing ? 1 : 0);
  io::write_u32(out, config_.num_classes);
  io::write_u32(out, config_.num_features);
  io::write_u8(out, fitted() ? 1 : 0);
  if (!fitted()) return;
  store_->save(out);
  io::write_u32(out, static_cast<std::uint32_t>(trees_.size()));
  for (const MondrianTree& tree : trees_) tree.save(out);
}

MondrianForest MondrianForest::load(std::istream& in) {
  if (io::read_u64(in) != kForestMagic)
    throw std::runtime_error("snapshot: not a forest snapshot");
  if (io::read_u32(in) != kForestVersion)
    throw std::runtime_error("snapshot: unsupported version");
  ForestConfig config;
  config.num_trees = io::read_u32(in);
  config.lifetime = io::read_f64(in);
  config.gamma_multiplier = io::read_f64(in);
  config.seed = io::read_u64(in);
  config.use_pausing = io::read_u8(in) != 0;
  config.num_classes = io::read_u32(in);
  config.num_features = io::read_u32(in);
  MondrianForest forest(config);
  if (io::read_u8(in) == 0) return forest;
  forest.store_ = std::make_shared<PointStore>(PointStore::load(in));
  const std::uint32_t num_trees = io::read_u32(in);
  forest.trees_.reserve(num_trees);
  for (std::uint32_t m = 0; m < num_trees; ++m)
    forest.trees_.push_back(MondrianTree::load(in, forest.store_));
  return forest;
}

}  // namespace mondrian
