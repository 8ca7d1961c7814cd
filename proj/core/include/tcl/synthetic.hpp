#pragma once

#include <cstdint>
#include <random>

#include "tcl/ingest.hpp"

namespace tcl {

/// Users repeatedly pick from a small personal item set. Item sets partition
/// the catalogue, so every item is somebody's favourite.
struct PlantedConfig {
  int users = 20;
  int items = 60;
  int items_per_user = 3;
  int events_per_user = 100;
  /// Gap between consecutive events.
  double time_step = 60.0;
  std::uint64_t seed = 0;
};

InteractionLog planted_log(const PlantedConfig& config);

/// Users form groups that share a drifting window of items: every
/// `shift_every` group events the window slides by one item, so what a user
/// picks next is best predicted by what the rest of the group picked lately.
struct DriftConfig {
  int users = 20;
  int items = 60;
  int group_size = 2;
  int window = 3;
  int shift_every = 20;
  int events_per_user = 100;
  double time_step = 60.0;
  std::uint64_t seed = 0;
};

InteractionLog cross_correlated_log(const DriftConfig& config);

/// Uniformly random unipartite stream over `nodes` ids without self loops.
/// Timestamps repeat the previous one with probability `tie_probability`.
InteractionLog random_log(std::mt19937_64& rng, std::size_t events, int nodes, double tie_probability = 0.0);

}  // namespace tcl
