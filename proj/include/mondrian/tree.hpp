#pragma once

#include <bit>
#include <cstdint>
#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "mondrian/posterior.hpp"
#include "mondrian/rng.hpp"
#include "mondrian/types.hpp"

namespace mondrian {

/// Append-only training point storage shared by the trees of a forest.
/// Features are row-major with a fixed dimension; points are never removed.
class PointStore {
 public:
  explicit PointStore(std::uint32_t dim) : dim_(dim) {}

  std::uint32_t add(std::span<const double> features, std::uint32_t label);

  std::span<const double> features(std::uint32_t id) const {
    return {features_.data() + static_cast<std::size_t>(id) * dim_, dim_};
  }
  std::uint32_t label(std::uint32_t id) const { return labels_[id]; }
  std::uint32_t dim() const { return dim_; }
  std::size_t size() const { return labels_.size(); }

  void save(std::ostream& out) const;
  static PointStore load(std::istream& in);

  bool operator==(const PointStore&) const = default;

 private:
  std::uint32_t dim_;
  std::vector<double> features_;
  std::vector<std::uint32_t> labels_;
};

struct MondrianNode {
  NodeId parent = kNoNode;
  NodeId left = kNoNode;
  NodeId right = kNoNode;
  std::uint32_t split_dim = 0;
  double split_loc = 0.0;
  // Time of split for internal nodes; the lifetime for leaves (paused or not).
  double split_time = 0.0;
  bool paused = false;

  bool is_leaf() const { return left == kNoNode; }
};

namespace detail {
// One arena record per node: link/split words followed by the extent bounds,
// so a root-to-leaf walk touches one contiguous block per node.
//   [0] parent | left   (two u32 bit-packed into the double's storage)
//   [1] right | split_dim+paused flag
//   [2] split_loc
//   [3] split_time
//   [4, 4+dim)          lower bounds
//   [4+dim, 4+2*dim)    upper bounds
inline constexpr std::size_t kNodeHeaderDoubles = 4;
inline constexpr std::uint32_t kPausedBit = 0x80000000u;
}  // namespace detail

struct TreeConfig {
  std::uint32_t dim = 0;
  std::uint32_t num_classes = 2;
  double lifetime = kInfinity;
  bool use_pausing = true;
};

/// Fault injection for the harness self-check; skip_new_parent makes the
/// online update ignore the "introduce new parent" branch, which breaks the
/// online/batch equivalence on purpose.
struct ExtendFaults {
  bool skip_new_parent = false;
};

struct TreeStats {
  std::size_t num_leaves = 0;
  double data_weighted_depth = 0.0;
  std::size_t max_depth = 0;
};

/// A Mondrian tree: a binary space partition with per-node split times and
/// per-node data extents, grown either in one batch pass or incrementally,
/// point by point. Both growth paths draw from the same distribution over
/// trees. Single writer, many readers: growth requires exclusive access,
/// read-only calls may run concurrently with each other.
class MondrianTree {
 public:
  /// Batch construction over the given points.
  static MondrianTree sample(std::shared_ptr<const PointStore> store,
                             std::span<const std::uint32_t> point_ids,
                             const TreeConfig& config, RngStream rng);

  /// Incorporates one more stored point; the resulting tree is distributed
  /// as if the point had been part of the batch all along.
  void extend(std::uint32_t point_id) { extend(point_id, ExtendFaults{}); }
  void extend(std::uint32_t point_id, const ExtendFaults& faults);

  /// Unique leaf whose block contains x; descends left iff x[d] <= split.
  NodeId route_to_leaf(std::span<const double> x) const;

  TreeStats stats() const;

  NodeId root() const { return root_; }
  MondrianNode node(NodeId j) const {
    const double* rec = record(j);
    const auto w0 = std::bit_cast<std::uint64_t>(rec[0]);
    const auto w1 = std::bit_cast<std::uint64_t>(rec[1]);
    MondrianNode out;
    out.parent = static_cast<NodeId>(w0);
    out.left = static_cast<NodeId>(w0 >> 32);
    out.right = static_cast<NodeId>(w1);
    const auto dim_word = static_cast<std::uint32_t>(w1 >> 32);
    out.split_dim = dim_word & ~detail::kPausedBit;
    out.paused = (dim_word & detail::kPausedBit) != 0;
    out.split_loc = rec[2];
    out.split_time = rec[3];
    return out;
  }
  std::size_t num_nodes() const { return num_nodes_; }
  std::size_t num_points() const { return num_points_; }
  std::uint32_t dim() const { return config_.dim; }
  std::uint32_t num_classes() const { return config_.num_classes; }
  double lifetime() const { return config_.lifetime; }
  bool pausing_enabled() const { return config_.use_pausing; }
  const TreeConfig& config() const { return config_; }
  const PointStore& store() const { return *store_; }

  // Extent of the training data seen at node j, one bound per dimension.
  std::span<const double> lower(NodeId j) const {
    return {record(j) + detail::kNodeHeaderDoubles, config_.dim};
  }
  std::span<const double> upper(NodeId j) const {
    return {record(j) + detail::kNodeHeaderDoubles + config_.dim, config_.dim};
  }

  /// Ids of training points held at a leaf (empty for internal nodes).
  const std::vector<std::uint32_t>& leaf_points(NodeId j) const {
    return leaf_points_[j];
  }

  double tau_parent(NodeId j) const {
    const NodeId parent = parent_of(j);
    return parent == kNoNode ? 0.0 : record(parent)[3];
  }

  const PosteriorCounts& posterior() const { return posterior_; }
  PosteriorCounts& posterior() { return posterior_; }

  void save(std::ostream& out) const;
  static MondrianTree load(std::istream& in,
                           std::shared_ptr<const PointStore> store);

 private:
  MondrianTree(std::shared_ptr<const PointStore> store, const TreeConfig& config,
               RngStream rng);

  NodeId add_node(NodeId parent);
  void set_extents_from_points(NodeId j, std::span<const std::uint32_t> ids);
  void grow_extents(NodeId j, std::span<const double> x);
  bool labels_identical(std::span<const std::uint32_t> ids) const;

  /// Recursive block expansion: computes extents, draws the split clock and,
  /// while the clock beats the lifetime (and labels are mixed when pausing),
  /// installs a split and recurses; otherwise finalizes a leaf.
  void expand_block(NodeId start, std::vector<std::uint32_t> ids);

  void insert_parent_and_sibling(NodeId j, std::uint32_t point_id,
                                 std::span<const double> x,
                                 std::span<const double> extra_extent,
                                 double new_time);

  std::size_t record_stride() const {
    return detail::kNodeHeaderDoubles + 2 * config_.dim;
  }
  const double* record(NodeId j) const {
    return arena_.data() + static_cast<std::size_t>(j) * record_stride();
  }
  double* record(NodeId j) {
    return arena_.data() + static_cast<std::size_t>(j) * record_stride();
  }
  NodeId parent_of(NodeId j) const {
    return static_cast<NodeId>(std::bit_cast<std::uint64_t>(record(j)[0]));
  }
  void set_parent(NodeId j, NodeId parent);
  void set_children(NodeId j, NodeId left, NodeId right);
  void set_split(NodeId j, std::uint32_t dim, double loc, double time);
  void set_leaf_marker(NodeId j, double time, bool paused);
  double* lower_mut(NodeId j) { return record(j) + detail::kNodeHeaderDoubles; }
  double* upper_mut(NodeId j) {
    return record(j) + detail::kNodeHeaderDoubles + config_.dim;
  }

  TreeConfig config_;
  std::shared_ptr<const PointStore> store_;
  RngStream rng_;
  NodeId root_ = kNoNode;
  std::size_t num_nodes_ = 0;
  std::vector<double> arena_;  // one record per node, see detail above
  std::vector<std::vector<std::uint32_t>> leaf_points_;
  PosteriorCounts posterior_;
  std::size_t num_points_ = 0;
};

}  // namespace mondrian
