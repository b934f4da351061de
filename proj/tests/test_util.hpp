#pragma once

// Shared fixtures and independent oracles for the test suite. Everything in
// here recomputes quantities from first principles and reports violations as
// data, so the same oracles back both the unit tests and the acceptance
// binary without sharing code paths with the library internals under test.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "mondrian/tree.hpp"

namespace testutil {

using mondrian::kNoNode;
using mondrian::MondrianTree;
using mondrian::NodeId;
using mondrian::PointStore;

// --- numeric quadrature oracle ----------------------------------------------

inline double simpson(const std::function<double(double)>& f, double a, double b) {
  const double m = 0.5 * (a + b);
  return (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b));
}

inline double adaptive_simpson(const std::function<double(double)>& f, double a,
                               double b, double eps, double whole, int depth) {
  const double m = 0.5 * (a + b);
  const double left = simpson(f, a, m);
  const double right = simpson(f, m, b);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * eps)
    return left + right + (left + right - whole) / 15.0;
  return adaptive_simpson(f, a, m, eps / 2.0, left, depth - 1) +
         adaptive_simpson(f, m, b, eps / 2.0, right, depth - 1);
}

inline double integrate(const std::function<double(double)>& f, double a, double b,
                        double eps = 1e-13) {
  return adaptive_simpson(f, a, b, eps, simpson(f, a, b), 60);
}

// E[e^{-gamma X}] for X ~ Exp(eta) truncated to [0, delta], by quadrature.
inline double truncated_discount_by_quadrature(double eta, double gamma,
                                               double delta) {
  const auto integrand = [&](double t) {
    return std::exp(-gamma * t) * eta * std::exp(-eta * t);
  };
  const double upper = std::isinf(delta) ? 60.0 / eta : delta;
  const double mass = -std::expm1(-eta * upper);
  return integrate(integrand, 0.0, upper) / mass;
}

// --- fixture helpers ---------------------------------------------------------

inline std::shared_ptr<PointStore> make_store(
    std::uint32_t dim, const std::vector<std::vector<double>>& points,
    const std::vector<std::uint32_t>& labels) {
  auto store = std::make_shared<PointStore>(dim);
  for (std::size_t i = 0; i < points.size(); ++i) store->add(points[i], labels[i]);
  return store;
}

inline std::vector<std::uint32_t> all_ids(std::size_t n) {
  std::vector<std::uint32_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<std::uint32_t>(i);
  return ids;
}

// --- structural oracle ---------------------------------------------------------

// Walks the whole arena validating link symmetry, the two-or-zero children
// rule, split-time monotonicity, extent nesting and split/extent separation.
// Returns human-readable violations; an empty list means the tree is sound.
inline std::vector<std::string> structure_violations(const MondrianTree& tree) {
  std::vector<std::string> errors;
  const auto fail = [&](NodeId j, const std::string& what) {
    errors.push_back("node " + std::to_string(j) + ": " + what);
  };

  const NodeId root = tree.root();
  if (tree.node(root).parent != kNoNode) fail(root, "root has a parent");

  std::size_t reachable = 0;
  std::vector<NodeId> stack{root};
  while (!stack.empty()) {
    const NodeId j = stack.back();
    stack.pop_back();
    ++reachable;
    const auto& node = tree.node(j);
    if ((node.left == kNoNode) != (node.right == kNoNode))
      fail(j, "one-child node");

    if (j != root) {
      const auto& parent = tree.node(node.parent);
      if (parent.left != j && parent.right != j) fail(j, "parent link broken");
      if (!(node.split_time > parent.split_time))
        fail(j, "split time not increasing");
      for (std::uint32_t d = 0; d < tree.dim(); ++d) {
        if (tree.lower(node.parent)[d] > tree.lower(j)[d] ||
            tree.upper(j)[d] > tree.upper(node.parent)[d])
          fail(j, "extent not nested in parent");
      }
    }

    for (std::uint32_t d = 0; d < tree.dim(); ++d)
      if (tree.lower(j)[d] > tree.upper(j)[d]) fail(j, "inverted extent");

    if (node.is_leaf()) {
      if (node.split_time != tree.lifetime()) fail(j, "leaf split time != lifetime");
      if (tree.leaf_points(j).empty()) fail(j, "leaf without points");
      if (node.paused) {
        const std::uint32_t first = tree.store().label(tree.leaf_points(j).front());
        for (const std::uint32_t id : tree.leaf_points(j))
          if (tree.store().label(id) != first) fail(j, "paused leaf labels differ");
      }
    } else {
      if (node.paused) fail(j, "paused internal node");
      if (!tree.leaf_points(j).empty()) fail(j, "internal node holds points");
      const std::uint32_t d = node.split_dim;
      if (node.split_loc < tree.lower(j)[d] || node.split_loc > tree.upper(j)[d])
        fail(j, "split outside extent");
      if (tree.upper(node.left)[d] > node.split_loc)
        fail(j, "left child crosses split");
      if (!(tree.lower(node.right)[d] > node.split_loc))
        fail(j, "right child touches split");
      if (tree.node(node.left).parent != j || tree.node(node.right).parent != j)
        fail(j, "child parent links broken");
      stack.push_back(node.left);
      stack.push_back(node.right);
    }
  }
  if (reachable != tree.num_nodes())
    errors.push_back("unreachable nodes in arena: " +
                     std::to_string(tree.num_nodes() - reachable));
  return errors;
}

// --- extent oracle -----------------------------------------------------------

// Recomputes every node's extent as the min/max over the training points in
// its subtree and compares with the stored bounds.
inline bool extents_match_points(const MondrianTree& tree) {
  std::map<NodeId, std::vector<std::uint32_t>> points_below;
  const std::function<std::vector<std::uint32_t>(NodeId)> gather =
      [&](NodeId j) -> std::vector<std::uint32_t> {
    const auto& node = tree.node(j);
    std::vector<std::uint32_t> ids;
    if (node.is_leaf()) {
      ids = tree.leaf_points(j);
    } else {
      ids = gather(node.left);
      const auto right = gather(node.right);
      ids.insert(ids.end(), right.begin(), right.end());
    }
    points_below[j] = ids;
    return ids;
  };
  gather(tree.root());

  for (const auto& [j, ids] : points_below) {
    if (ids.empty()) return false;
    for (std::uint32_t d = 0; d < tree.dim(); ++d) {
      double lo = tree.store().features(ids.front())[d];
      double hi = lo;
      for (const std::uint32_t id : ids) {
        lo = std::min(lo, tree.store().features(id)[d]);
        hi = std::max(hi, tree.store().features(id)[d]);
      }
      if (tree.lower(j)[d] != lo || tree.upper(j)[d] != hi) return false;
    }
  }
  return true;
}

// --- posterior count oracle ----------------------------------------------------

// From-scratch recount: leaf counts from stored labels, internal counts from
// children's capped counts.
struct RecountedPosterior {
  std::vector<std::vector<std::uint32_t>> counts;
  std::vector<std::vector<std::uint8_t>> tabs;
};

inline RecountedPosterior recount_posterior(const MondrianTree& tree) {
  const std::uint32_t num_classes = tree.num_classes();
  RecountedPosterior out;
  out.counts.assign(tree.num_nodes(), std::vector<std::uint32_t>(num_classes, 0));
  out.tabs.assign(tree.num_nodes(), std::vector<std::uint8_t>(num_classes, 0));

  const std::function<void(NodeId)> visit = [&](NodeId j) {
    const auto& node = tree.node(j);
    if (node.is_leaf()) {
      for (const std::uint32_t id : tree.leaf_points(j))
        ++out.counts[j][tree.store().label(id)];
    } else {
      visit(node.left);
      visit(node.right);
      for (std::uint32_t k = 0; k < num_classes; ++k)
        out.counts[j][k] = out.tabs[node.left][k] + out.tabs[node.right][k];
    }
    for (std::uint32_t k = 0; k < num_classes; ++k)
      out.tabs[j][k] = out.counts[j][k] > 0 ? 1 : 0;
  };
  visit(tree.root());
  return out;
}

inline bool posterior_matches_recount(const MondrianTree& tree) {
  const RecountedPosterior expected = recount_posterior(tree);
  for (NodeId j = 0; j < tree.num_nodes(); ++j)
    for (std::uint32_t k = 0; k < tree.num_classes(); ++k)
      if (tree.posterior().count(j, k) != expected.counts[j][k] ||
          tree.posterior().tab(j, k) != expected.tabs[j][k])
        return false;
  return true;
}

}  // namespace testutil
