#include "tcl/synthetic.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace tcl {

namespace {

std::string user_name(int u) { return "u" + std::to_string(u); }
std::string item_name(int i) { return "i" + std::to_string(i); }

// Interleaves `per_user` slots of every user in random order.
std::vector<int> shuffled_schedule(int users, int per_user, std::mt19937_64& rng) {
  std::vector<int> schedule;
  schedule.reserve(static_cast<std::size_t>(users) * static_cast<std::size_t>(per_user));
  for (int u = 0; u < users; ++u) schedule.insert(schedule.end(), static_cast<std::size_t>(per_user), u);
  std::shuffle(schedule.begin(), schedule.end(), rng);
  return schedule;
}

}  // namespace

InteractionLog planted_log(const PlantedConfig& c) {
  if (c.users < 1 || c.items_per_user < 1 || c.events_per_user < 1) {
    throw std::invalid_argument("planted_log: counts must be positive");
  }
  if (c.users * c.items_per_user != c.items) {
    throw std::invalid_argument("planted_log: users * items_per_user must equal items");
  }
  std::mt19937_64 rng(c.seed);
  std::vector<int> catalogue(static_cast<std::size_t>(c.items));
  std::iota(catalogue.begin(), catalogue.end(), 0);
  std::shuffle(catalogue.begin(), catalogue.end(), rng);

  LogBuilder builder(true);
  std::uniform_int_distribution<int> pick(0, c.items_per_user - 1);
  const auto schedule = shuffled_schedule(c.users, c.events_per_user, rng);
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const int u = schedule[t];
    const int item = catalogue[static_cast<std::size_t>(u * c.items_per_user + pick(rng))];
    builder.add(user_name(u), item_name(item), static_cast<double>(t) * c.time_step);
  }
  return std::move(builder).build();
}

InteractionLog cross_correlated_log(const DriftConfig& c) {
  if (c.users < 1 || c.group_size < 1 || c.users % c.group_size != 0) {
    throw std::invalid_argument("cross_correlated_log: users must split evenly into groups");
  }
  const int groups = c.users / c.group_size;
  if (c.items % groups != 0 || c.window < 1 || c.window > c.items / groups || c.shift_every < 1) {
    throw std::invalid_argument("cross_correlated_log: items must split evenly into group pools wider than the window");
  }
  const int pool = c.items / groups;
  std::mt19937_64 rng(c.seed);
  std::vector<int> catalogue(static_cast<std::size_t>(c.items));
  std::iota(catalogue.begin(), catalogue.end(), 0);
  std::shuffle(catalogue.begin(), catalogue.end(), rng);

  LogBuilder builder(true);
  std::vector<int> group_events(static_cast<std::size_t>(groups), 0);
  std::uniform_int_distribution<int> pick(0, c.window - 1);
  const auto schedule = shuffled_schedule(c.users, c.events_per_user, rng);
  for (std::size_t t = 0; t < schedule.size(); ++t) {
    const int u = schedule[t];
    const int g = u / c.group_size;
    const int offset = group_events[static_cast<std::size_t>(g)]++ / c.shift_every;
    const int slot = (offset + pick(rng)) % pool;
    const int item = catalogue[static_cast<std::size_t>(g * pool + slot)];
    builder.add(user_name(u), item_name(item), static_cast<double>(t) * c.time_step);
  }
  return std::move(builder).build();
}

InteractionLog random_log(std::mt19937_64& rng, std::size_t events, int nodes, double tie_probability) {
  if (nodes < 2) throw std::invalid_argument("random_log: need at least two nodes");
  LogBuilder builder(false);
  std::uniform_int_distribution<int> node(0, nodes - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::exponential_distribution<double> gap(1.0);
  double t = 0.0;
  for (std::size_t i = 0; i < events; ++i) {
    if (i > 0 && unit(rng) >= tie_probability) t += 1.0 + gap(rng);
    const int a = node(rng);
    int b = node(rng);
    while (b == a) b = node(rng);
    builder.add("n" + std::to_string(a), "n" + std::to_string(b), t);
  }
  return std::move(builder).build();
}

}  // namespace tcl
