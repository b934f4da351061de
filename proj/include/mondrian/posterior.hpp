#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "mondrian/types.hpp"

namespace mondrian {

class MondrianTree;

/// Per-node, per-class customer and table counts for the interpolated
/// Kneser-Ney approximation of the hierarchical label posterior. Stored as
/// flat arrays with stride num_classes so they grow with the node arena.
///
/// Invariants: tab(j,k) == min(count(j,k), 1); for internal nodes
/// count(j,k) == tab(left,k) + tab(right,k); for leaves count(j,k) is the
/// number of training points with label k at the leaf.
class PosteriorCounts {
 public:
  explicit PosteriorCounts(std::uint32_t num_classes = 0)
      : num_classes_(num_classes) {}

  void ensure_size(std::size_t num_nodes);

  std::uint32_t num_classes() const { return num_classes_; }
  std::size_t num_nodes() const {
    return num_classes_ == 0 ? 0 : counts_.size() / num_classes_;
  }

  std::uint32_t count(NodeId j, std::uint32_t k) const {
    return counts_[static_cast<std::size_t>(j) * num_classes_ + k];
  }
  std::uint8_t tab(NodeId j, std::uint32_t k) const {
    return tabs_[static_cast<std::size_t>(j) * num_classes_ + k];
  }
  void set_count(NodeId j, std::uint32_t k, std::uint32_t v) {
    counts_[static_cast<std::size_t>(j) * num_classes_ + k] = v;
  }
  void set_tab(NodeId j, std::uint32_t k, std::uint8_t v) {
    tabs_[static_cast<std::size_t>(j) * num_classes_ + k] = v;
  }
  void add_count(NodeId j, std::uint32_t k, std::uint32_t dv) {
    counts_[static_cast<std::size_t>(j) * num_classes_ + k] += dv;
  }

  std::span<const std::uint32_t> counts_row(NodeId j) const {
    return {counts_.data() + static_cast<std::size_t>(j) * num_classes_,
            num_classes_};
  }
  std::span<const std::uint8_t> tabs_row(NodeId j) const {
    return {tabs_.data() + static_cast<std::size_t>(j) * num_classes_,
            num_classes_};
  }

  std::uint64_t count_total(NodeId j) const;
  std::uint32_t tab_total(NodeId j) const;

  void save(std::ostream& out) const;
  static PosteriorCounts load(std::istream& in);

  bool operator==(const PosteriorCounts&) const = default;

 private:
  std::uint32_t num_classes_;
  std::vector<std::uint32_t> counts_;
  std::vector<std::uint8_t> tabs_;
};

/// Discount time-scale and base measure of the hierarchical label prior.
struct PosteriorParams {
  double gamma = 1.0;             // > 0
  std::vector<double> base;       // H; uniform over the K classes

  static PosteriorParams uniform(std::uint32_t num_classes, double gamma);
};

/// Discount d_j = exp(-gamma * (tau_j - tau_parent)). tau_j may be +infinity
/// (a never-splitting leaf), in which case the discount is 0.
double node_discount(const PosteriorParams& params, double tau_j,
                     double tau_parent);

/// Sets the leaf's counts from its stored labels, then walks to the root
/// re-deriving internal counts from the children's table counts.
void initialize_posterior_counts(MondrianTree& tree, NodeId leaf);

/// Accounts for one new point with label y at the given leaf. Each new table
/// adds one customer to the parent restaurant; propagation stops at the
/// first node that already had a table for y.
void update_posterior_counts(MondrianTree& tree, NodeId leaf, std::uint32_t y);

/// Posterior mean label distribution at node j given the parent's posterior
/// mean (H for the root). Nodes with zero total count inherit the parent
/// mean unchanged.
std::vector<double> posterior_mean(const MondrianTree& tree,
                                   const PosteriorParams& params, NodeId j,
                                   std::span<const double> parent_mean);

}  // namespace mondrian
