#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace tcl {

/// Dense node index. Index 0 is reserved for the NULL dependency sentinel.
using NodeId = std::int32_t;
inline constexpr NodeId kNullNode = 0;

class ParseError : public std::runtime_error {
 public:
  ParseError(std::size_t line, const std::string& detail, const std::string& source = {})
      : std::runtime_error((source.empty() ? "" : source + ": ") + "line " + std::to_string(line) + ": " + detail),
        line_(line),
        detail_(detail) {}
  std::size_t line() const { return line_; }
  const std::string& detail() const { return detail_; }

 private:
  std::size_t line_;
  std::string detail_;
};

/// Maps external string identifiers to dense NodeIds.
///
/// In bipartite mode sources and targets live in separate namespaces, so a
/// source "42" and a target "42" are distinct nodes.
class Vocabulary {
 public:
  enum class Role { kSource, kTarget };

  explicit Vocabulary(bool bipartite = false);

  NodeId intern(std::string_view name, Role role);
  std::optional<NodeId> find(std::string_view name, Role role) const;

  /// Name of a node; "<null>" for the sentinel.
  const std::string& name(NodeId id) const;
  /// Number of rows an embedding table needs (all nodes plus the sentinel).
  std::size_t table_size() const { return names_.size(); }
  std::size_t node_count() const { return names_.size() - 1; }
  bool bipartite() const { return bipartite_; }
  /// Names in NodeId order, excluding the sentinel.
  std::vector<std::string> names() const;

 private:
  std::string key(std::string_view name, Role role) const;

  bool bipartite_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, NodeId> index_;
};

struct Interaction {
  NodeId source = kNullNode;
  NodeId target = kNullNode;
  double timestamp = 0.0;

  friend bool operator==(const Interaction&, const Interaction&) = default;
};

/// Chronologically sorted interaction events plus the shared vocabulary.
/// Splits of a log share the parent's vocabulary and source/target sets.
class InteractionLog {
 public:
  InteractionLog() = default;
  InteractionLog(std::vector<Interaction> events, std::shared_ptr<const Vocabulary> vocab,
                 std::shared_ptr<const std::vector<NodeId>> sources,
                 std::shared_ptr<const std::vector<NodeId>> targets);

  std::span<const Interaction> events() const { return events_; }
  std::size_t size() const { return events_.size(); }
  bool empty() const { return events_.empty(); }
  const Interaction& operator[](std::size_t i) const { return events_[i]; }

  const Vocabulary& vocabulary() const { return *vocab_; }
  std::shared_ptr<const Vocabulary> shared_vocabulary() const { return vocab_; }
  /// Sorted ids that appear as a source anywhere in the originating dataset.
  std::span<const NodeId> source_vocab() const { return *sources_; }
  /// Sorted ids that appear as a target anywhere in the originating dataset.
  std::span<const NodeId> target_vocab() const { return *targets_; }

  /// max timestamp - min timestamp, 0 for an empty log.
  double duration() const;

  /// A log over a contiguous range of this log's events, sharing vocabularies.
  InteractionLog slice(std::size_t begin, std::size_t end) const;
  /// Events of this log followed by events of `other` (same vocabulary required).
  InteractionLog concat(const InteractionLog& other) const;

 private:
  std::vector<Interaction> events_;
  std::shared_ptr<const Vocabulary> vocab_;
  std::shared_ptr<const std::vector<NodeId>> sources_;
  std::shared_ptr<const std::vector<NodeId>> targets_;
};

/// Accumulates raw (source, target, time) rows and produces a sorted log.
class LogBuilder {
 public:
  explicit LogBuilder(bool bipartite = false);

  void add(std::string_view source, std::string_view target, double timestamp);
  std::size_t size() const { return events_.size(); }

  /// Stable sort by timestamp (ties keep insertion order).
  InteractionLog build() &&;

 private:
  std::shared_ptr<Vocabulary> vocab_;
  std::vector<Interaction> events_;
};

struct ColumnSpec {
  std::size_t source = 0;
  std::size_t target = 1;
  std::size_t timestamp = 2;
  /// 0 means "split on any run of whitespace, commas or tabs".
  char delimiter = 0;
  bool skip_header = false;
  bool bipartite = false;
};

InteractionLog load_interactions(const std::filesystem::path& path, const ColumnSpec& format = {});
/// Same as load_interactions but reads from an in-memory buffer.
InteractionLog parse_interactions(std::string_view text, const ColumnSpec& format = {});

struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;

  /// Parses "60/20/20" (percent) or "0.6/0.2/0.2".
  static SplitSpec parse(std::string_view text);
};

struct Splits {
  InteractionLog train;
  InteractionLog val;
  InteractionLog test;
};

Splits chronological_split(const InteractionLog& log, const SplitSpec& spec);

struct DatasetStats {
  std::size_t n_sources = 0;
  std::size_t n_targets = 0;
  std::size_t n_interactions = 0;
  double repetition_density = 0.0;
  double duration_days = 0.0;
};

/// Repetition density counts test events (with multiplicity) whose
/// (source, target) pair already occurs in `train`.
DatasetStats dataset_stats(const InteractionLog& train, const InteractionLog& test,
                           const InteractionLog& full, double time_units_per_day = 86400.0);

}  // namespace tcl
