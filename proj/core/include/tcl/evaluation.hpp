#pragma once

#include <cstdint>
#include <span>
#include <unordered_map>
#include <vector>

#include "tcl/autodiff.hpp"
#include "tcl/encoder.hpp"
#include "tcl/ingest.hpp"
#include "tcl/tdig.hpp"

namespace tcl {

struct Metrics {
  double mean_rank = 0.0;
  double hit_at_10 = 0.0;
  std::size_t n_events = 0;
};

/// 1 + number of other candidates scoring at least as high as the target.
std::int64_t rank_from_scores(std::span<const double> scores, std::size_t target_index);

/// Mean rank and top-10 fraction. An empty span yields zeroed metrics.
Metrics aggregate_ranks(std::span<const std::int64_t> ranks);

/// Sim(query, row) for every row of `candidates` (n x d); query is 1 x d.
std::vector<double> score_candidates(const ModelParams& params, const ad::Matrix& query,
                                     const ad::Matrix& candidates);

/// Predictive embedding of `node` in inference mode (no dropout, no gradients).
ad::Matrix infer_embedding(const Tdig& graph, NodeId node, ModelParams& params);

/// Per-node predictive embeddings valid for the dependency state at
/// `refreshed_at`. Entries go stale only when their node takes part in an event.
class EmbeddingCache {
 public:
  struct Entry {
    ad::Matrix embedding;
    double refreshed_at = 0.0;
  };

  const Entry* find(NodeId node) const;
  void store(NodeId node, ad::Matrix embedding, double time);
  void invalidate(NodeId node);
  void clear() { entries_.clear(); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::unordered_map<NodeId, Entry> entries_;
};

struct EvalOptions {
  /// false recomputes every candidate embedding for every event.
  bool use_cache = true;
};

/// Replays a stream on top of a history graph, ranking each event's true target
/// among all candidates before appending it.
class Evaluator {
 public:
  Evaluator(ModelParams& params, Tdig history, std::vector<NodeId> candidates, EvalOptions options = {});

  /// Rank of event.target among the candidates, then appends the event.
  std::int64_t rank_event(const Interaction& event);
  Metrics evaluate(std::span<const Interaction> events);

  std::span<const std::int64_t> ranks() const { return ranks_; }
  const Tdig& graph() const { return graph_; }
  const EmbeddingCache& cache() const { return cache_; }

 private:
  void refresh_candidates(double now);

  ModelParams& params_;
  Tdig graph_;
  std::vector<NodeId> candidates_;
  std::unordered_map<NodeId, std::size_t> index_;
  ad::Matrix candidate_matrix_;
  EmbeddingCache cache_;
  EvalOptions options_;
  std::vector<std::int64_t> ranks_;
};

/// Builds the history graph from `history` and evaluates `test` against the
/// full target vocabulary of `test`.
Metrics evaluate(ModelParams& params, const InteractionLog& history, const InteractionLog& test,
                 EvalOptions options = {});

}  // namespace tcl
