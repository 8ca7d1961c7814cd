#include "tcl/evaluation.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "tcl/objective.hpp"

namespace tcl {

using ad::Matrix;
using ad::Real;

std::int64_t rank_from_scores(std::span<const double> scores, std::size_t target_index) {
  if (target_index >= scores.size()) throw std::out_of_range("rank_from_scores: target index out of range");
  const double target = scores[target_index];
  std::int64_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i != target_index && scores[i] >= target) ++rank;
  }
  return rank;
}

Metrics aggregate_ranks(std::span<const std::int64_t> ranks) {
  Metrics m;
  m.n_events = ranks.size();
  if (ranks.empty()) return m;
  double total = 0.0;
  std::size_t hits = 0;
  for (auto r : ranks) {
    total += static_cast<double>(r);
    if (r <= 10) ++hits;
  }
  m.mean_rank = total / static_cast<double>(ranks.size());
  m.hit_at_10 = static_cast<double>(hits) / static_cast<double>(ranks.size());
  return m;
}

std::vector<double> score_candidates(const ModelParams& params, const Matrix& query, const Matrix& candidates) {
  if (query.rows() != 1 || query.cols() != candidates.cols()) {
    throw ad::ShapeError("score_candidates: query " + ad::shape_string(query) + " vs candidates " +
                         ad::shape_string(candidates));
  }
  const Matrix& w_add = params.w_add.value;
  const Matrix& w_mul = params.w_mul.value;
  const Real query_term = (w_add.array() * query.array()).sum();
  // w_add.(q + c) + w_mul.(q * c) = w_add.q + c.(w_add + w_mul * q)
  const Matrix mixed = (w_add.array() + w_mul.array() * query.array()).matrix();
  const Eigen::Matrix<Real, Eigen::Dynamic, 1> logits = candidates * mixed.transpose();
  std::vector<double> out(static_cast<std::size_t>(candidates.rows()));
  for (Eigen::Index i = 0; i < candidates.rows(); ++i) {
    const Real x = logits(i) + query_term;
    const Real sp = x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    out[static_cast<std::size_t>(i)] = static_cast<double>(sp);
  }
  return out;
}

Matrix infer_embedding(const Tdig& graph, NodeId node, ModelParams& params) {
  ad::Tape tape(false);
  return predictive_embedding(tape, graph, node, params, nullptr).value();
}

const EmbeddingCache::Entry* EmbeddingCache::find(NodeId node) const {
  auto it = entries_.find(node);
  return it == entries_.end() ? nullptr : &it->second;
}

void EmbeddingCache::store(NodeId node, Matrix embedding, double time) {
  entries_[node] = Entry{std::move(embedding), time};
}

void EmbeddingCache::invalidate(NodeId node) { entries_.erase(node); }

Evaluator::Evaluator(ModelParams& params, Tdig history, std::vector<NodeId> candidates, EvalOptions options)
    : params_(params), graph_(std::move(history)), candidates_(std::move(candidates)), options_(options) {
  if (candidates_.empty()) throw std::invalid_argument("Evaluator: empty candidate set");
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (!index_.emplace(candidates_[i], i).second) {
      throw std::invalid_argument("Evaluator: duplicate candidate " + std::to_string(candidates_[i]));
    }
  }
  candidate_matrix_ = Matrix::Zero(static_cast<Eigen::Index>(candidates_.size()), params_.config().dim);
}

void Evaluator::refresh_candidates(double now) {
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    const NodeId w = candidates_[i];
    const auto row = static_cast<Eigen::Index>(i);
    if (options_.use_cache) {
      if (cache_.find(w) != nullptr) continue;
      Matrix h = infer_embedding(graph_, w, params_);
      candidate_matrix_.row(row) = h;
      cache_.store(w, std::move(h), now);
    } else {
      candidate_matrix_.row(row) = infer_embedding(graph_, w, params_);
    }
  }
}

std::int64_t Evaluator::rank_event(const Interaction& event) {
  auto it = index_.find(event.target);
  if (it == index_.end()) {
    throw std::invalid_argument("rank_event: target " + std::to_string(event.target) + " is not a candidate");
  }
  refresh_candidates(event.timestamp);
  const Matrix query = infer_embedding(graph_, event.source, params_);
  const auto scores = score_candidates(params_, query, candidate_matrix_);
  const std::int64_t rank = rank_from_scores(scores, it->second);
  graph_.append(event);
  cache_.invalidate(event.source);
  cache_.invalidate(event.target);
  ranks_.push_back(rank);
  return rank;
}

Metrics Evaluator::evaluate(std::span<const Interaction> events) {
  std::vector<std::int64_t> ranks;
  ranks.reserve(events.size());
  for (const auto& ev : events) ranks.push_back(rank_event(ev));
  return aggregate_ranks(ranks);
}

Metrics evaluate(ModelParams& params, const InteractionLog& history, const InteractionLog& test, EvalOptions options) {
  if (test.empty()) throw std::invalid_argument("evaluate: empty test log");
  Tdig graph;
  for (const auto& ev : history.events()) graph.append(ev);
  const auto targets = test.target_vocab();
  Evaluator evaluator(params, std::move(graph), std::vector<NodeId>(targets.begin(), targets.end()), options);
  return evaluator.evaluate(test.events());
}

}  // namespace tcl
