#include "mondrian/prediction.hpp"

#include <cassert>
#include <cmath>
#include <stdexcept>

namespace mondrian {

namespace {

void check_input(const MondrianTree& tree, const PosteriorParams& params,
                 std::span<const double> x) {
  if (x.size() != tree.dim())
    throw std::invalid_argument("predict: dimension mismatch");
  if (params.base.size() != tree.num_classes())
    throw std::invalid_argument("predict: base distribution has wrong size");
  for (const double v : x)
    if (!std::isfinite(v)) throw std::invalid_argument("predict: non-finite input");
}

// Posterior mean of the would-be new node above j, whose counts are the
// capped counts min(c_j, 1), under discount d.
void add_branch_posterior(const MondrianTree& tree, NodeId j, double d,
                          std::span<const double> parent_mean, double weight,
                          std::vector<double>& accum) {
  const PosteriorCounts& post = tree.posterior();
  const std::uint32_t num_classes = post.num_classes();
  double capped_total = 0.0;
  for (std::uint32_t k = 0; k < num_classes; ++k)
    capped_total += post.count(j, k) > 0 ? 1.0 : 0.0;
  assert(capped_total > 0.0);
  const double inv_total = 1.0 / capped_total;
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    const double capped = post.count(j, k) > 0 ? 1.0 : 0.0;
    const double mean_k =
        (capped - d * capped + d * capped_total * parent_mean[k]) * inv_total;
    accum[k] += weight * mean_k;
  }
}

}  // namespace

BranchOff branch_off_probability(const MondrianTree& tree, NodeId j,
                                 std::span<const double> x) {
  BranchOff result;
  const auto lo = tree.lower(j);
  const auto hi = tree.upper(j);
  for (std::size_t d = 0; d < x.size(); ++d)
    result.eta += std::max(x[d] - hi[d], 0.0) + std::max(lo[d] - x[d], 0.0);
  const double delta = tree.node(j).split_time - tree.tau_parent(j);
  if (result.eta > 0.0 && delta > 0.0)
    result.prob = -std::expm1(-delta * result.eta);
  return result;
}

PredictiveDistribution predict_tree(const MondrianTree& tree,
                                    const PosteriorParams& params,
                                    std::span<const double> x) {
  check_input(tree, params, x);
  const std::uint32_t num_classes = tree.num_classes();
  std::vector<double> result(num_classes, 0.0);
  std::vector<double> parent_mean(params.base.begin(), params.base.end());

  double p_not_separated = 1.0;
  NodeId j = tree.root();
  for (;;) {
    const MondrianNode& node = tree.node(j);
    const BranchOff branch = branch_off_probability(tree, j, x);
    if (branch.prob > 0.0) {
      const double delta = node.split_time - tree.tau_parent(j);
      const double discount =
          expected_truncated_discount(branch.eta, params.gamma, delta);
      add_branch_posterior(tree, j, discount, parent_mean,
                           p_not_separated * branch.prob, result);
    }
    if (node.is_leaf()) {
      const auto leaf_mean = posterior_mean(tree, params, j, parent_mean);
      const double weight = p_not_separated * (1.0 - branch.prob);
      for (std::uint32_t k = 0; k < num_classes; ++k)
        result[k] += weight * leaf_mean[k];
      return result;
    }
    p_not_separated *= 1.0 - branch.prob;
    parent_mean = posterior_mean(tree, params, j, parent_mean);
    j = x[node.split_dim] <= node.split_loc ? node.left : node.right;
  }
}

PredictiveDistribution predict_tree_mc_oracle(const MondrianTree& tree,
                                              const PosteriorParams& params,
                                              std::span<const double> x,
                                              std::size_t num_samples,
                                              RngStream& rng) {
  check_input(tree, params, x);
  if (num_samples == 0)
    throw std::invalid_argument("predict_tree_mc_oracle: need num_samples >= 1");
  const std::uint32_t num_classes = tree.num_classes();

  std::vector<double> mean(num_classes, 0.0);
  std::vector<double> sample(num_classes);
  std::vector<double> parent_mean(num_classes);

  for (std::size_t s = 0; s < num_samples; ++s) {
    parent_mean.assign(params.base.begin(), params.base.end());
    NodeId j = tree.root();
    for (;;) {
      const MondrianNode& node = tree.node(j);
      const BranchOff branch = branch_off_probability(tree, j, x);
      const double split_wait = sample_exponential(rng, branch.eta);
      if (tree.tau_parent(j) + split_wait < node.split_time) {
        // x splits off below a sampled new parent; the fresh leaf holds no
        // labels, so its posterior equals the new parent's.
        const double d = std::exp(-params.gamma * split_wait);
        sample.assign(num_classes, 0.0);
        add_branch_posterior(tree, j, d, parent_mean, 1.0, sample);
        break;
      }
      if (node.is_leaf()) {
        sample = posterior_mean(tree, params, j, parent_mean);
        break;
      }
      parent_mean = posterior_mean(tree, params, j, parent_mean);
      j = x[node.split_dim] <= node.split_loc ? node.left : node.right;
    }
    // Anchored running mean: exact when every sample is identical.
    const double inv = 1.0 / static_cast<double>(s + 1);
    for (std::uint32_t k = 0; k < num_classes; ++k)
      mean[k] += (sample[k] - mean[k]) * inv;
  }
  return mean;
}

}  // namespace mondrian
