#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "mondrian/posterior.hpp"
#include "mondrian/rng.hpp"
#include "mondrian/tree.hpp"
#include "mondrian/types.hpp"

namespace mondrian {

/// Length-K probability vector; entries are >= 0 and sum to 1.
using PredictiveDistribution = std::vector<double>;

struct BranchOff {
  double eta = 0.0;   // extra linear extent of x relative to the node's block
  double prob = 0.0;  // chance the point splits off within the node's interval
};

/// eta_j(x) and p^s_j(x) = 1 - exp(-Delta_j * eta_j(x)) for node j, where
/// Delta_j is the node's split-time interval (possibly infinite at leaves).
/// prob is 0 exactly when x lies inside the node's extent or Delta_j == 0.
BranchOff branch_off_probability(const MondrianTree& tree, NodeId j,
                                 std::span<const double> x);

/// Predictive label distribution at x, marginalized analytically over every
/// way the tree could be extended to cover x: a single root-to-leaf walk
/// mixing the would-be branch-off posteriors (with the expected discount
/// over the truncated-exponential split time) and the leaf posterior.
PredictiveDistribution predict_tree(const MondrianTree& tree,
                                    const PosteriorParams& params,
                                    std::span<const double> x);

/// Monte-Carlo reference for predict_tree: samples num_samples virtual
/// extensions of the tree at x (only the root-to-leaf path matters, so no
/// copy is made), reads the label posterior at x's leaf in each, and
/// averages. The running mean is anchored so that identical samples average
/// to themselves exactly.
PredictiveDistribution predict_tree_mc_oracle(const MondrianTree& tree,
                                              const PosteriorParams& params,
                                              std::span<const double> x,
                                              std::size_t num_samples,
                                              RngStream& rng);

}  // namespace mondrian
