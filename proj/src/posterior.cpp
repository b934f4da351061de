#include "mondrian/posterior.hpp"

#include <cassert>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "mondrian/binary_io.hpp"
#include "mondrian/tree.hpp"

namespace mondrian {

void PosteriorCounts::ensure_size(std::size_t num_nodes) {
  counts_.resize(num_nodes * num_classes_, 0);
  tabs_.resize(num_nodes * num_classes_, 0);
}

std::uint64_t PosteriorCounts::count_total(NodeId j) const {
  const auto row = counts_row(j);
  return std::accumulate(row.begin(), row.end(), std::uint64_t{0});
}

std::uint32_t PosteriorCounts::tab_total(NodeId j) const {
  const auto row = tabs_row(j);
  return std::accumulate(row.begin(), row.end(), std::uint32_t{0});
}

void PosteriorCounts::save(std::ostream& out) const {
  io::write_u32(out, num_classes_);
  io::write_vec(out, counts_);
  io::write_vec(out, tabs_);
}

PosteriorCounts PosteriorCounts::load(std::istream& in) {
  PosteriorCounts counts(io::read_u32(in));
  counts.counts_ = io::read_vec<std::uint32_t>(in);
  counts.tabs_ = io::read_vec<std::uint8_t>(in);
  if (counts.counts_.size() != counts.tabs_.size())
    throw std::runtime_error("snapshot: bad posterior count arrays");
  return counts;
}

PosteriorParams PosteriorParams::uniform(std::uint32_t num_classes, double gamma) {
  if (num_classes == 0)
    throw std::invalid_argument("PosteriorParams: need at least one class");
  if (!(gamma > 0.0))
    throw std::invalid_argument("PosteriorParams: gamma must be > 0");
  PosteriorParams params;
  params.gamma = gamma;
  params.base.assign(num_classes, 1.0 / num_classes);
  return params;
}

double node_discount(const PosteriorParams& params, double tau_j,
                     double tau_parent) {
  if (!(tau_j >= tau_parent))
    throw std::invalid_argument("node_discount: tau_j must be >= tau_parent");
  assert(std::isfinite(tau_parent));
  return std::exp(-params.gamma * (tau_j - tau_parent));
}

void initialize_posterior_counts(MondrianTree& tree, NodeId leaf) {
  PosteriorCounts& post = tree.posterior();
  const std::uint32_t num_classes = post.num_classes();

  for (std::uint32_t k = 0; k < num_classes; ++k) post.set_count(leaf, k, 0);
  for (const std::uint32_t id : tree.leaf_points(leaf))
    post.add_count(leaf, tree.store().label(id), 1);

  NodeId j = leaf;
  for (;;) {
    const MondrianNode& node = tree.node(j);
    if (!node.is_leaf()) {
      for (std::uint32_t k = 0; k < num_classes; ++k)
        post.set_count(j, k, post.tab(node.left, k) + post.tab(node.right, k));
    }
    for (std::uint32_t k = 0; k < num_classes; ++k)
      post.set_tab(j, k, post.count(j, k) > 0 ? 1 : 0);
    if (node.parent == kNoNode) return;
    j = node.parent;
  }
}

void update_posterior_counts(MondrianTree& tree, NodeId leaf, std::uint32_t y) {
  PosteriorCounts& post = tree.posterior();
  NodeId j = leaf;
  for (;;) {
    post.add_count(j, y, 1);
    if (post.tab(j, y) == 1) return;  // no new table; nothing changes above
    post.set_tab(j, y, 1);
    const NodeId parent = tree.node(j).parent;
    if (parent == kNoNode) return;
    j = parent;  // the new table is one more customer at the parent
  }
}

std::vector<double> posterior_mean(const MondrianTree& tree,
                                   const PosteriorParams& params, NodeId j,
                                   std::span<const double> parent_mean) {
  const PosteriorCounts& post = tree.posterior();
  const std::uint32_t num_classes = post.num_classes();
  assert(parent_mean.size() == num_classes);

  const std::uint64_t total = post.count_total(j);
  if (total == 0) return {parent_mean.begin(), parent_mean.end()};

  const double d = node_discount(params, tree.node(j).split_time, tree.tau_parent(j));
  const double tab_total = static_cast<double>(post.tab_total(j));
  std::vector<double> mean(num_classes);
  const double inv_total = 1.0 / static_cast<double>(total);
  for (std::uint32_t k = 0; k < num_classes; ++k) {
    mean[k] = (static_cast<double>(post.count(j, k)) -
               d * static_cast<double>(post.tab(j, k)) +
               d * tab_total * parent_mean[k]) *
              inv_total;
  }
  return mean;
}

}  // namespace mondrian
