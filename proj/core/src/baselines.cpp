#include "tcl/baselines.hpp"

#include <map>
#include <stdexcept>
#include <unordered_map>
#include <utility>

namespace tcl {

Metrics popularity_baseline(const InteractionLog& history, const InteractionLog& test, PopularityKind kind) {
  if (test.empty()) throw std::invalid_argument("popularity_baseline: empty test log");
  const auto candidates = test.target_vocab();
  std::unordered_map<NodeId, std::size_t> index;
  for (std::size_t i = 0; i < candidates.size(); ++i) index.emplace(candidates[i], i);

  std::vector<double> global(candidates.size(), 0.0);
  std::map<NodeId, std::vector<double>> per_source;
  auto record = [&](const Interaction& ev) {
    auto it = index.find(ev.target);
    if (it == index.end()) return;
    global[it->second] += 1.0;
    auto& row = per_source[ev.source];
    if (row.empty()) row.assign(candidates.size(), 0.0);
    row[it->second] += 1.0;
  };
  for (const auto& ev : history.events()) record(ev);

  const std::vector<double> empty(candidates.size(), 0.0);
  std::vector<std::int64_t> ranks;
  ranks.reserve(test.size());
  for (const auto& ev : test.events()) {
    const std::size_t target = index.at(ev.target);
    if (kind == PopularityKind::global) {
      ranks.push_back(rank_from_scores(global, target));
    } else {
      auto it = per_source.find(ev.source);
      ranks.push_back(rank_from_scores(it == per_source.end() ? empty : it->second, target));
    }
    record(ev);
  }
  return aggregate_ranks(ranks);
}

}  // namespace tcl
