#include "mondrian/tree.hpp"

#include <algorithm>
#include <bit>
#include <cassert>
#include <cmath>
#include <stdexcept>

#include "mondrian/binary_io.hpp"

namespace mondrian {

namespace {

double pack_words(std::uint32_t lo, std::uint32_t hi) {
  return std::bit_cast<double>(static_cast<std::uint64_t>(lo) |
                               (static_cast<std::uint64_t>(hi) << 32));
}

}  // namespace

std::uint32_t PointStore::add(std::span<const double> features,
                              std::uint32_t label) {
  if (features.size() != dim_)
    throw std::invalid_argument("PointStore::add: dimension mismatch");
  for (const double v : features)
    if (!std::isfinite(v))
      throw std::invalid_argument("PointStore::add: non-finite feature");
  features_.insert(features_.end(), features.begin(), features.end());
  labels_.push_back(label);
  return static_cast<std::uint32_t>(labels_.size() - 1);
}

void PointStore::save(std::ostream& out) const {
  io::write_u32(out, dim_);
  io::write_vec(out, features_);
  io::write_vec(out, labels_);
}

PointStore PointStore::load(std::istream& in) {
  PointStore store(io::read_u32(in));
  store.features_ = io::read_vec<double>(in);
  store.labels_ = io::read_vec<std::uint32_t>(in);
  if (store.dim_ == 0 || store.features_.size() != store.labels_.size() * store.dim_)
    throw std::runtime_error("snapshot: inconsistent point store");
  return store;
}

MondrianTree::MondrianTree(std::shared_ptr<const PointStore> store,
                           const TreeConfig& config, RngStream rng)
    : config_(config),
      store_(std::move(store)),
      rng_(std::move(rng)),
      posterior_(config.num_classes) {}

MondrianTree MondrianTree::sample(std::shared_ptr<const PointStore> store,
                                  std::span<const std::uint32_t> point_ids,
                                  const TreeConfig& config, RngStream rng) {
  if (point_ids.empty())
    throw std::invalid_argument("MondrianTree::sample: empty dataset");
  if (config.dim == 0 || config.dim != store->dim())
    throw std::invalid_argument("MondrianTree::sample: dimension mismatch");
  MondrianTree tree(std::move(store), config, std::move(rng));
  for (const std::uint32_t id : point_ids)
    if (tree.store_->label(id) >= config.num_classes)
      throw std::invalid_argument("MondrianTree::sample: label out of range");
  tree.root_ = tree.add_node(kNoNode);
  tree.expand_block(tree.root_,
                    std::vector<std::uint32_t>(point_ids.begin(), point_ids.end()));
  tree.num_points_ = point_ids.size();
  return tree;
}

NodeId MondrianTree::add_node(NodeId parent) {
  const NodeId id = static_cast<NodeId>(num_nodes_++);
  arena_.resize(num_nodes_ * record_stride(), 0.0);
  double* rec = record(id);
  rec[0] = pack_words(parent, kNoNode);
  rec[1] = pack_words(kNoNode, 0);
  leaf_points_.emplace_back();
  posterior_.ensure_size(num_nodes_);
  return id;
}

void MondrianTree::set_parent(NodeId j, NodeId parent) {
  double* rec = record(j);
  const auto w0 = std::bit_cast<std::uint64_t>(rec[0]);
  rec[0] = pack_words(parent, static_cast<std::uint32_t>(w0 >> 32));
}

void MondrianTree::set_children(NodeId j, NodeId left, NodeId right) {
  double* rec = record(j);
  const auto w0 = std::bit_cast<std::uint64_t>(rec[0]);
  const auto w1 = std::bit_cast<std::uint64_t>(rec[1]);
  rec[0] = pack_words(static_cast<std::uint32_t>(w0), left);
  rec[1] = pack_words(right, static_cast<std::uint32_t>(w1 >> 32));
}

void MondrianTree::set_split(NodeId j, std::uint32_t dim, double loc, double time) {
  double* rec = record(j);
  const auto w1 = std::bit_cast<std::uint64_t>(rec[1]);
  rec[1] = pack_words(static_cast<std::uint32_t>(w1), dim);
  rec[2] = loc;
  rec[3] = time;
}

void MondrianTree::set_leaf_marker(NodeId j, double time, bool paused) {
  double* rec = record(j);
  rec[0] = pack_words(parent_of(j), kNoNode);
  rec[1] = pack_words(kNoNode, paused ? detail::kPausedBit : 0);
  rec[3] = time;
}

void MondrianTree::set_extents_from_points(NodeId j,
                                           std::span<const std::uint32_t> ids) {
  double* lo = lower_mut(j);
  double* hi = upper_mut(j);
  const auto first = store_->features(ids.front());
  std::copy(first.begin(), first.end(), lo);
  std::copy(first.begin(), first.end(), hi);
  for (std::size_t i = 1; i < ids.size(); ++i) {
    const auto x = store_->features(ids[i]);
    for (std::uint32_t d = 0; d < config_.dim; ++d) {
      lo[d] = std::min(lo[d], x[d]);
      hi[d] = std::max(hi[d], x[d]);
    }
  }
}

void MondrianTree::grow_extents(NodeId j, std::span<const double> x) {
  double* lo = lower_mut(j);
  double* hi = upper_mut(j);
  for (std::uint32_t d = 0; d < config_.dim; ++d) {
    lo[d] = std::min(lo[d], x[d]);
    hi[d] = std::max(hi[d], x[d]);
  }
}

bool MondrianTree::labels_identical(std::span<const std::uint32_t> ids) const {
  const std::uint32_t first = store_->label(ids.front());
  for (const std::uint32_t id : ids)
    if (store_->label(id) != first) return false;
  return true;
}

void MondrianTree::expand_block(NodeId start, std::vector<std::uint32_t> ids) {
  struct Item {
    NodeId node;
    std::vector<std::uint32_t> ids;
  };
  std::vector<Item> stack;
  stack.push_back({start, std::move(ids)});
  std::vector<double> lengths(config_.dim);

  while (!stack.empty()) {
    Item item = std::move(stack.back());
    stack.pop_back();
    const NodeId j = item.node;
    assert(!item.ids.empty());
    set_extents_from_points(j, item.ids);

    bool make_leaf = false;
    bool paused = false;
    double split_time = 0.0;
    if (config_.use_pausing && labels_identical(item.ids)) {
      make_leaf = true;
      paused = true;
    } else {
      double rate = 0.0;
      for (std::uint32_t d = 0; d < config_.dim; ++d) {
        lengths[d] = upper(j)[d] - lower(j)[d];
        rate += lengths[d];
      }
      split_time = tau_parent(j) + sample_exponential(rng_, rate);
      if (!(split_time < config_.lifetime)) make_leaf = true;
    }

    if (make_leaf) {
      set_leaf_marker(j, config_.lifetime, paused);
      leaf_points_[j] = std::move(item.ids);
      initialize_posterior_counts(*this, j);
      continue;
    }

    const std::size_t delta = sample_categorical_proportional(rng_, lengths);
    const double lo = lower(j)[delta];
    const double hi = upper(j)[delta];
    double xi = sample_uniform_interval(rng_, lo, hi);
    if (!(xi < hi)) xi = std::nextafter(hi, lo);  // keep the right child nonempty

    std::vector<std::uint32_t> left_ids, right_ids;
    for (const std::uint32_t id : item.ids) {
      if (store_->features(id)[delta] <= xi)
        left_ids.push_back(id);
      else
        right_ids.push_back(id);
    }
    assert(!left_ids.empty() && !right_ids.empty());

    const NodeId l = add_node(j);
    const NodeId r = add_node(j);
    set_children(j, l, r);
    set_split(j, static_cast<std::uint32_t>(delta), xi, split_time);
    leaf_points_[j].clear();
    leaf_points_[j].shrink_to_fit();

    stack.push_back({r, std::move(right_ids)});
    stack.push_back({l, std::move(left_ids)});
  }
}

void MondrianTree::extend(std::uint32_t point_id, const ExtendFaults& faults) {
  if (num_nodes_ == 0) throw std::logic_error("MondrianTree::extend: unfitted tree");
  if (point_id >= store_->size())
    throw std::invalid_argument("MondrianTree::extend: unknown point id");
  const auto x = store_->features(point_id);
  const std::uint32_t y = store_->label(point_id);
  if (y >= config_.num_classes)
    throw std::invalid_argument("MondrianTree::extend: label out of range");

  ++num_points_;
  std::vector<double> extra(config_.dim);
  NodeId j = root_;
  for (;;) {
    const MondrianNode node = this->node(j);
    if (node.paused) {
      // Paused leaf: the split clock is suspended while labels stay pure.
      grow_extents(j, x);
      const std::uint32_t block_label = store_->label(leaf_points_[j].front());
      leaf_points_[j].push_back(point_id);
      if (y == block_label) {
        update_posterior_counts(*this, j, y);
        return;
      }
      // A second label arrived: re-expand the block over all of its points.
      std::vector<std::uint32_t> ids = std::move(leaf_points_[j]);
      leaf_points_[j] = {};
      expand_block(j, std::move(ids));
      return;
    }

    double rate = 0.0;
    for (std::uint32_t d = 0; d < config_.dim; ++d) {
      extra[d] = std::max(lower(j)[d] - x[d], 0.0) + std::max(x[d] - upper(j)[d], 0.0);
      rate += extra[d];
    }
    const double e = sample_exponential(rng_, rate);
    const double t_parent = tau_parent(j);
    if (!faults.skip_new_parent && t_parent + e < node.split_time) {
      insert_parent_and_sibling(j, point_id, x, extra, t_parent + e);
      return;
    }

    grow_extents(j, x);
    if (node.is_leaf()) {
      leaf_points_[j].push_back(point_id);
      update_posterior_counts(*this, j, y);
      return;
    }
    j = x[node.split_dim] <= node.split_loc ? node.left : node.right;
  }
}

void MondrianTree::insert_parent_and_sibling(NodeId j, std::uint32_t point_id,
                                             std::span<const double> x,
                                             std::span<const double> extra_extent,
                                             double new_time) {
  const std::size_t delta = sample_categorical_proportional(rng_, extra_extent);
  const double lo_j = lower(j)[delta];
  const double hi_j = upper(j)[delta];
  assert(x[delta] > hi_j || x[delta] < lo_j);

  // The split goes in the gap between the block and the point, so it cannot
  // slice through the block's extent.
  double xi;
  if (x[delta] > hi_j) {
    xi = sample_uniform_interval(rng_, hi_j, x[delta]);
    if (!(xi < x[delta])) xi = std::nextafter(x[delta], hi_j);
  } else {
    xi = sample_uniform_interval(rng_, x[delta], lo_j);
    if (!(xi < lo_j)) xi = std::nextafter(lo_j, x[delta]);
  }

  const NodeId old_parent = parent_of(j);
  const NodeId jp = add_node(old_parent);
  const NodeId sibling = add_node(jp);

  for (std::uint32_t d = 0; d < config_.dim; ++d) {
    lower_mut(jp)[d] = std::min(lower(j)[d], x[d]);
    upper_mut(jp)[d] = std::max(upper(j)[d], x[d]);
  }
  if (x[delta] <= xi)
    set_children(jp, sibling, j);
  else
    set_children(jp, j, sibling);
  set_split(jp, static_cast<std::uint32_t>(delta), xi, new_time);
  set_parent(j, jp);
  if (old_parent == kNoNode) {
    root_ = jp;
  } else {
    const MondrianNode grandparent = node(old_parent);
    set_children(old_parent, grandparent.left == j ? jp : grandparent.left,
                 grandparent.right == j ? jp : grandparent.right);
  }

  expand_block(sibling, {point_id});
}

NodeId MondrianTree::route_to_leaf(std::span<const double> x) const {
  if (x.size() != config_.dim)
    throw std::invalid_argument("MondrianTree::route_to_leaf: dimension mismatch");
  NodeId j = root_;
  for (;;) {
    const MondrianNode node = this->node(j);
    if (node.is_leaf()) return j;
    j = x[node.split_dim] <= node.split_loc ? node.left : node.right;
  }
}

TreeStats MondrianTree::stats() const {
  TreeStats out;
  if (num_nodes_ == 0) return out;
  struct Item {
    NodeId node;
    std::size_t depth;
  };
  std::vector<Item> stack{{root_, 0}};
  const double n = static_cast<double>(num_points_);
  while (!stack.empty()) {
    const Item item = stack.back();
    stack.pop_back();
    const MondrianNode node = this->node(item.node);
    if (node.is_leaf()) {
      ++out.num_leaves;
      out.max_depth = std::max(out.max_depth, item.depth);
      out.data_weighted_depth += static_cast<double>(leaf_points_[item.node].size()) /
                                 n * static_cast<double>(item.depth);
    } else {
      stack.push_back({node.left, item.depth + 1});
      stack.push_back({node.right, item.depth + 1});
    }
  }
  return out;
}

void MondrianTree::save(std::ostream& out) const {
  io::write_u32(out, config_.dim);
  io::write_u32(out, config_.num_classes);
  io::write_f64(out, config_.lifetime);
  io::write_u8(out, config_.use_pausing ? 1 : 0);
  io::write_u32(out, root_);
  io::write_u64(out, num_nodes_);
  for (NodeId j = 0; j < num_nodes_; ++j) {
    const MondrianNode node = this->node(j);
    io::write_u32(out, node.parent);
    io::write_u32(out, node.left);
    io::write_u32(out, node.right);
    io::write_u32(out, node.split_dim);
    io::write_f64(out, node.split_loc);
    io::write_f64(out, node.split_time);
    io::write_u8(out, node.paused ? 1 : 0);
    io::write_bytes(out, record(j) + detail::kNodeHeaderDoubles,
                    2 * config_.dim * sizeof(double));
  }
  io::write_u64(out, num_points_);
  for (const auto& ids : leaf_points_) io::write_vec(out, ids);
  posterior_.save(out);
  rng_.save(out);
}

MondrianTree MondrianTree::load(std::istream& in,
                                std::shared_ptr<const PointStore> store) {
  TreeConfig config;
  config.dim = io::read_u32(in);
  config.num_classes = io::read_u32(in);
  config.lifetime = io::read_f64(in);
  config.use_pausing = io::read_u8(in) != 0;
  if (config.dim != store->dim())
    throw std::runtime_error("snapshot: tree/store dimension mismatch");
  MondrianTree tree(std::move(store), config, RngStream{});
  tree.root_ = io::read_u32(in);
  const std::uint64_t n = io::read_u64(in);
  tree.num_nodes_ = n;
  tree.arena_.resize(n * tree.record_stride(), 0.0);
  for (NodeId j = 0; j < n; ++j) {
    const NodeId parent = io::read_u32(in);
    const NodeId left = io::read_u32(in);
    const NodeId right = io::read_u32(in);
    const std::uint32_t split_dim = io::read_u32(in);
    const double split_loc = io::read_f64(in);
    const double split_time = io::read_f64(in);
    const bool paused = io::read_u8(in) != 0;
    double* rec = tree.record(j);
    rec[0] = pack_words(parent, left);
    rec[1] = pack_words(right, split_dim | (paused ? detail::kPausedBit : 0));
    rec[2] = split_loc;
    rec[3] = split_time;
    io::read_bytes(in, rec + detail::kNodeHeaderDoubles,
                   2 * config.dim * sizeof(double));
  }
  tree.num_points_ = io::read_u64(in);
  tree.leaf_points_.resize(n);
  for (auto& ids : tree.leaf_points_) ids = io::read_vec<std::uint32_t>(in);
  tree.posterior_ = PosteriorCounts::load(in);
  if (tree.posterior_.num_classes() != config.num_classes ||
      tree.posterior_.num_nodes() != n)
    throw std::runtime_error("snapshot: bad posterior counts");
  tree.rng_ = RngStream::load(in);
  return tree;
}

}  // namespace mondrian
