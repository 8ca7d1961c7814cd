#include "tcl/tdig.hpp"

#include <deque>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace tcl {

// ---------------------------------------------------------------------------
// Tdig

std::pair<InstanceId, InstanceId> Tdig::append(const Interaction& event) {
  if (event.timestamp < last_time_) {
    throw std::invalid_argument("Tdig::append: timestamp " + std::to_string(event.timestamp) +
                                " precedes last appended time " + std::to_string(last_time_));
  }
  if (event.source == kNullNode || event.target == kNullNode) {
    throw std::invalid_argument("Tdig::append: NULL sentinel cannot take part in an interaction");
  }
  const DependencyPair du = dependencies_of(event.source);
  const DependencyPair dv = dependencies_of(event.target);

  auto delta_of = [&](const DependencyPair& deps) {
    return deps.first == kNullInstance ? 0.0 : event.timestamp - instances_[deps.first].time;
  };

  const auto iu = static_cast<InstanceId>(instances_.size());
  const InstanceId iv = iu + 1;
  instances_.push_back({event.source, event.timestamp, du.first, du.second, iv, delta_of(du)});
  instances_.push_back({event.target, event.timestamp, dv.first, dv.second, iu, delta_of(dv)});

  const auto needed = static_cast<std::size_t>(std::max(event.source, event.target)) + 1;
  if (last_.size() < needed) last_.resize(needed, kNullInstance);
  last_[static_cast<std::size_t>(event.source)] = iu;
  last_[static_cast<std::size_t>(event.target)] = iv;
  last_time_ = event.timestamp;
  return {iu, iv};
}

const NodeInstance& Tdig::instance(InstanceId id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= instances_.size()) {
    throw std::out_of_range("Tdig: instance " + std::to_string(id) + " does not exist");
  }
  return instances_[static_cast<std::size_t>(id)];
}

std::optional<InstanceId> Tdig::last_instance(NodeId node) const {
  if (node < 0 || static_cast<std::size_t>(node) >= last_.size()) return std::nullopt;
  const InstanceId id = last_[static_cast<std::size_t>(node)];
  if (id == kNullInstance) return std::nullopt;
  return id;
}

DependencyPair Tdig::dependencies_of(NodeId node) const {
  const auto last = last_instance(node);
  if (!last) return {};
  return {*last, instances_[static_cast<std::size_t>(*last)].partner};
}

// ---------------------------------------------------------------------------
// DepthConfig

std::size_t DepthConfig::full_tree_size(int k) { return (std::size_t{1} << (k + 1)) - 1; }

DepthConfig DepthConfig::for_depth(int k) {
  DepthConfig cfg{k, 0};
  if (k < 1 || k > 20) throw std::invalid_argument("sub-graph depth must lie in [1, 20]");
  cfg.max_seq_len = static_cast<int>(full_tree_size(k));
  return cfg;
}

void DepthConfig::validate() const {
  if (k < 1 || k > 20) throw std::invalid_argument("sub-graph depth must lie in [1, 20]");
  if (max_seq_len < 1) throw std::invalid_argument("max_seq_len must be positive");
}

// ---------------------------------------------------------------------------
// Extraction and serialization

SubGraph extract_subgraph(const Tdig& tdig, InstanceId root, int k) {
  if (k < 1) throw std::invalid_argument("extract_subgraph: k must be >= 1");
  SubGraph sub;
  sub.k = k;
  if (root == kNullInstance) {
    sub.nodes.push_back({});
    return sub;
  }
  const NodeInstance& root_inst = tdig.instance(root);

  std::unordered_map<InstanceId, int> entry_of;
  sub.nodes.push_back({root, root_inst.node, 0, root_inst.delta, {-1, -1}});
  entry_of.emplace(root, 0);

  for (std::size_t head = 0; head < sub.nodes.size(); ++head) {
    if (sub.nodes[head].is_null() || sub.nodes[head].depth >= k) continue;
    const NodeInstance& inst = tdig.instance(sub.nodes[head].instance);
    const int child_depth = sub.nodes[head].depth + 1;
    const std::array<InstanceId, 2> deps{inst.dep1, inst.dep2};
    for (int slot = 0; slot < 2; ++slot) {
      const InstanceId dep = deps[static_cast<std::size_t>(slot)];
      int child = -1;
      if (dep == kNullInstance) {
        child = static_cast<int>(sub.nodes.size());
        sub.nodes.push_back({kNullInstance, kNullNode, child_depth, 0.0, {-1, -1}});
      } else if (auto it = entry_of.find(dep); it != entry_of.end()) {
        child = it->second;
      } else {
        const NodeInstance& d = tdig.instance(dep);
        child = static_cast<int>(sub.nodes.size());
        sub.nodes.push_back({dep, d.node, child_depth, d.delta, {-1, -1}});
        entry_of.emplace(dep, child);
      }
      sub.nodes[head].children[static_cast<std::size_t>(slot)] = child;
    }
  }

  // Entries at depth k are not expanded, but an edge to an ancestor that made
  // it into the set through a shorter path is still a dependency edge.
  for (auto& entry : sub.nodes) {
    if (entry.is_null() || entry.depth < k) continue;
    const NodeInstance& inst = tdig.instance(entry.instance);
    const std::array<InstanceId, 2> deps{inst.dep1, inst.dep2};
    for (std::size_t slot = 0; slot < 2; ++slot) {
      if (deps[slot] == kNullInstance) continue;
      if (auto it = entry_of.find(deps[slot]); it != entry_of.end()) entry.children[slot] = it->second;
    }
  }
  return sub;
}

NodeSequence serialize_bfs(const SubGraph& sub, std::size_t max_seq_len) {
  if (sub.nodes.empty()) throw std::invalid_argument("serialize_bfs: empty sub-graph");
  if (max_seq_len == 0) throw std::invalid_argument("serialize_bfs: max_seq_len must be positive");
  // Entries are already in BFS order, which is sorted by depth, so keeping a
  // prefix drops the deepest and then the latest-visited entries first.
  const std::size_t m = std::min(sub.nodes.size(), max_seq_len);
  NodeSequence seq;
  seq.ids.reserve(m);
  seq.depths.reserve(m);
  seq.deltas.reserve(m);
  seq.instances.reserve(m);
  seq.children.reserve(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto& n = sub.nodes[i];
    seq.ids.push_back(n.node);
    seq.depths.push_back(n.depth);
    seq.deltas.push_back(n.delta);
    seq.instances.push_back(n.instance);
    std::array<int, 2> ch = n.children;
    for (auto& c : ch) {
      if (c >= static_cast<int>(m)) c = -1;
    }
    seq.children.push_back(ch);
  }
  return seq;
}

AttentionMask attention_mask(const NodeSequence& order) {
  const std::size_t m = order.size();
  AttentionMask mask(m);
  std::vector<int> stack;
  std::vector<std::uint8_t> seen(m);
  for (std::size_t i = 0; i < m; ++i) {
    std::fill(seen.begin(), seen.end(), 0);
    stack.assign(1, static_cast<int>(i));
    seen[i] = 1;
    while (!stack.empty()) {
      const auto cur = static_cast<std::size_t>(stack.back());
      stack.pop_back();
      mask.set_visible(i, cur);
      for (int c : order.children[cur]) {
        if (c >= 0 && !seen[static_cast<std::size_t>(c)]) {
          seen[static_cast<std::size_t>(c)] = 1;
          stack.push_back(c);
        }
      }
    }
  }
  return mask;
}

NodeSequence build_sequence(const Tdig& tdig, InstanceId root, const DepthConfig& depth) {
  depth.validate();
  NodeSequence seq = serialize_bfs(extract_subgraph(tdig, root, depth.k), static_cast<std::size_t>(depth.max_seq_len));
  seq.mask = attention_mask(seq);
  return seq;
}

// ---------------------------------------------------------------------------
// AttentionMask

AttentionMask::AttentionMask(std::size_t size) : size_(size), bits_(size * size, 0) {}

AttentionMask AttentionMask::padded(std::size_t n) const {
  if (n < size_) throw std::invalid_argument("AttentionMask::padded: target smaller than mask");
  AttentionMask out(n);
  for (std::size_t i = 0; i < size_; ++i) {
    for (std::size_t j = 0; j < size_; ++j) out.set_visible(i, j, visible(i, j));
  }
  return out;
}

AttentionMask AttentionMask::block_diagonal(const AttentionMask& a, const AttentionMask& b) {
  AttentionMask out = a.padded(a.size() + b.size());
  for (std::size_t i = 0; i < b.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out.set_visible(a.size() + i, a.size() + j, b.visible(i, j));
  }
  return out;
}

}  // namespace tcl
