#pragma once

#include "tcl/evaluation.hpp"
#include "tcl/ingest.hpp"

namespace tcl {

enum class PopularityKind {
  /// Score = how often the item was a target so far.
  global,
  /// Score = how often this source picked the item so far.
  per_source,
};

/// Ranks each test target by interaction counts from `history` plus the test
/// events already replayed. Same candidate set and tie rule as `evaluate`.
Metrics popularity_baseline(const InteractionLog& history, const InteractionLog& test, PopularityKind kind);

}  // namespace tcl
