#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "tcl/ingest.hpp"

namespace tcl {

using InstanceId = std::int32_t;
inline constexpr InstanceId kNullInstance = -1;

/// A node at the moment of one of its interactions (u_t).
struct NodeInstance {
  NodeId node = kNullNode;
  double time = 0.0;
  /// The node's own previous instance, or kNullInstance on first appearance.
  InstanceId dep1 = kNullInstance;
  /// The partner instance of that previous interaction.
  InstanceId dep2 = kNullInstance;
  /// The other instance created by the same interaction (interaction edge).
  InstanceId partner = kNullInstance;
  /// time - time of the node's previous interaction; 0 on first appearance.
  double delta = 0.0;

  bool first_appearance() const { return dep1 == kNullInstance; }
};

struct DependencyPair {
  InstanceId first = kNullInstance;
  InstanceId second = kNullInstance;
};

/// Temporal Dependency Interaction Graph. Append-only; every interaction adds
/// two instances joined by an interaction edge, each with two dependency edges
/// pointing at the instances of its node's previous interaction.
class Tdig {
 public:
  Tdig() = default;

  /// Appends an interaction. Timestamps must be non-decreasing.
  std::pair<InstanceId, InstanceId> append(const Interaction& event);

  const NodeInstance& instance(InstanceId id) const;
  std::span<const NodeInstance> instances() const { return instances_; }
  std::size_t size() const { return instances_.size(); }
  bool empty() const { return instances_.empty(); }

  std::optional<InstanceId> last_instance(NodeId node) const;
  /// The instances a new interaction of `node` would depend on right now:
  /// its latest instance and that instance's partner, or two NULLs.
  DependencyPair dependencies_of(NodeId node) const;
  double last_time() const { return last_time_; }

 private:
  std::vector<NodeInstance> instances_;
  std::vector<InstanceId> last_;
  double last_time_ = -std::numeric_limits<double>::infinity();
};

struct DepthConfig {
  int k = 5;
  int max_seq_len = 63;

  static DepthConfig for_depth(int k);
  /// 2^(k+1) - 1, the size of a full binary dependency tree of depth k.
  static std::size_t full_tree_size(int k);
  void validate() const;
};

struct SubGraphNode {
  /// kNullInstance marks a NULL sentinel leaf (one per empty dependency slot).
  InstanceId instance = kNullInstance;
  NodeId node = kNullNode;
  int depth = 0;
  double delta = 0.0;
  /// Entry indices of dep1/dep2 inside the sub-graph, -1 when absent.
  std::array<int, 2> children{-1, -1};

  bool is_null() const { return instance == kNullInstance; }
};

/// Dependency ancestors of a root instance within k hops, stored in BFS order
/// (root first, dep1 expanded before dep2). A shared ancestor appears once.
struct SubGraph {
  std::vector<SubGraphNode> nodes;
  int k = 0;

  const SubGraphNode& root() const { return nodes.front(); }
  std::size_t size() const { return nodes.size(); }
};

/// m x m structure mask; visible(i, j) means query i may attend to key j.
class AttentionMask {
 public:
  AttentionMask() = default;
  explicit AttentionMask(std::size_t size);

  std::size_t size() const { return size_; }
  bool visible(std::size_t i, std::size_t j) const { return bits_[i * size_ + j] != 0; }
  void set_visible(std::size_t i, std::size_t j, bool v = true) { bits_[i * size_ + j] = v ? 1 : 0; }
  /// Additive form: 0 where visible, -infinity otherwise.
  double value(std::size_t i, std::size_t j) const {
    return visible(i, j) ? 0.0 : -std::numeric_limits<double>::infinity();
  }

  /// Extends to n >= size() positions; padding keys are invisible to every query.
  AttentionMask padded(std::size_t n) const;
  /// Packs two masks along the diagonal; cross-block entries are invisible.
  static AttentionMask block_diagonal(const AttentionMask& a, const AttentionMask& b);

  friend bool operator==(const AttentionMask&, const AttentionMask&) = default;

 private:
  std::size_t size_ = 0;
  std::vector<std::uint8_t> bits_;
};

/// BFS-serialized sub-graph ready for the encoder.
struct NodeSequence {
  std::vector<NodeId> ids;
  std::vector<int> depths;
  std::vector<double> deltas;
  std::vector<InstanceId> instances;
  /// Sequence positions of each entry's dependencies, -1 when absent or truncated.
  std::vector<std::array<int, 2>> children;
  AttentionMask mask;

  std::size_t size() const { return ids.size(); }
};

SubGraph extract_subgraph(const Tdig& tdig, InstanceId root, int k);

/// Root-first BFS listing, truncated to the `max_seq_len` shallowest entries.
/// The returned mask is empty; see attention_mask.
NodeSequence serialize_bfs(const SubGraph& sub, std::size_t max_seq_len = std::numeric_limits<std::size_t>::max());

/// Visible(i, j) iff j is i itself or a dependency descendant of i among the
/// sequence's entries.
AttentionMask attention_mask(const NodeSequence& order);

/// extract_subgraph + serialize_bfs + attention_mask.
NodeSequence build_sequence(const Tdig& tdig, InstanceId root, const DepthConfig& depth);

}  // namespace tcl
