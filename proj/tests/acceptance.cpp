// Acceptance runner: one PASS/FAIL/SKIP line per criterion.
//
//   acceptance                  run every criterion
//   acceptance --criterion N    run one (exit 0 pass, 1 fail, 77 skip)
//
// Criterion 9 needs the CollegeMsg file, via --collegemsg or TCL_COLLEGEMSG.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "oracles.hpp"
#include "tcl/baselines.hpp"
#include "tcl/checkpoint.hpp"
#include "tcl/evaluation.hpp"
#include "tcl/objective.hpp"
#include "tcl/synthetic.hpp"

using namespace tcl;
using ad::Matrix;
using ad::Real;
using ad::Tape;
using ad::Var;

namespace {

// Pinned tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
// Near the roundoff/truncation optimum (3u)^(1/3) for central differences;
// 1e-6 leaves ~1e-10 of roundoff on gradients as small as 5e-7.
constexpr double kGradEps = 1e-5;
constexpr double kGradBudgetS = 30.0;
constexpr double kOracleBudgetS = 60.0;
constexpr double kClosedFormTolerance = 1e-12;
constexpr double kPermutationTolerance = 1e-9;
constexpr double kShiftTolerance = 1e-12;
constexpr double kCacheTolerance = 1e-9;
constexpr double kPlantedMrLimit = 0.5 * (60 + 1) / 2.0;  // half the random-ranking MR
constexpr double kPlantedHitLimit = 0.60;
constexpr double kPlantedBudgetS = 300.0;
constexpr double kAblationSlack = 0.05;
constexpr double kCollegeHitLimit = 0.20;

enum class Status { pass, fail, skip };

struct Outcome {
  Status status;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double x, int precision = 4) {
  std::ostringstream s;
  s << std::setprecision(precision) << x;
  return s.str();
}

Tdig graph_of(std::span<const Interaction> events) {
  Tdig g;
  for (const auto& e : events) g.append(e);
  return g;
}

// ---------------------------------------------------------------------------

Outcome gradient_fidelity() {
  const auto t0 = Clock::now();
  EncoderConfig cfg;
  cfg.dim = 4;
  cfg.heads = 2;
  cfg.depth = 2;  // sequences of 3 to 7 entries
  cfg.dropout = 0.0;
  double worst = 0.0;
  int checks = 0;
  std::size_t shortest = 100, longest = 0;
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    std::mt19937_64 rng(100 + seed);
    const InteractionLog log = random_log(rng, 14, 5);
    cfg.seed = seed;
    ModelParams params(cfg, log.vocabulary().table_size());
    const auto ps = params.parameters();
    for (std::size_t e = log.size() - 4; e < log.size(); ++e) {
      const Tdig g = graph_of(log.events().subspan(0, e));
      const Interaction& ev = log[e];
      // Negatives with history so every stream is a real sub-graph.
      std::vector<NodeId> warm;
      for (NodeId n : log.target_vocab())
        if (n != ev.target && g.last_instance(n)) warm.push_back(n);
      if (!g.last_instance(ev.source) || !g.last_instance(ev.target) || warm.size() < 2) continue;
      const auto negs = sample_negatives(rng, warm, ev.target, 2);
      for (NodeId n : {ev.source, ev.target, negs[0], negs[1]}) {
        const auto deps = g.dependencies_of(n);
        for (InstanceId root : {deps.first, deps.second}) {
          const std::size_t m = build_sequence(g, root, cfg.depth_config()).size();
          shortest = std::min(shortest, m);
          longest = std::max(longest, m);
        }
      }
      const Real err =
          ad::grad_check_parameters([&](Tape& t) { return event_loss(t, g, ev, negs, params, nullptr); }, ps, kGradEps);
      worst = std::max(worst, static_cast<double>(err));
      ++checks;
    }
  }
  const double elapsed = seconds_since(t0);
  const bool ok = checks > 0 && worst < kGradTolerance && elapsed < kGradBudgetS && shortest >= 3 && longest <= 7;
  return {ok ? Status::pass : Status::fail,
          std::to_string(checks) + " events, sequence sizes " + std::to_string(shortest) + ".." +
              std::to_string(longest) + ", max rel err " + fmt(worst, 3) + " (< " + fmt(kGradTolerance) + "), " +
              fmt(elapsed, 3) + " s"};
}

// ---------------------------------------------------------------------------

// Checks one extracted sequence against the oracle; returns a description of
// the first mismatch or an empty string.
std::string compare_sequence(const Tdig& g, const std::vector<oracle::Instance>& truth, InstanceId root, int k,
                             std::size_t max_len) {
  const SubGraph sub = extract_subgraph(g, root, k);
  const NodeSequence seq = [&] {
    NodeSequence s = serialize_bfs(sub, max_len);
    s.mask = attention_mask(s);
    return s;
  }();
  std::vector<oracle::Entry> want = oracle::subgraph(truth, root, k);
  if (want.size() > max_len) want.resize(max_len);
  if (seq.size() != want.size()) return "size " + std::to_string(seq.size()) + " vs " + std::to_string(want.size());
  for (std::size_t i = 0; i < want.size(); ++i) {
    if (seq.instances[i] != want[i].instance) return "instance at " + std::to_string(i);
    if (seq.depths[i] != want[i].depth) return "depth at " + std::to_string(i);
    if (want[i].instance != oracle::kNone) {
      const auto& in = truth[static_cast<std::size_t>(want[i].instance)];
      if (seq.ids[i] != in.node || seq.deltas[i] != in.delta) return "features at " + std::to_string(i);
    } else if (want[i].null_parent != oracle::kNone) {
      const auto parent = static_cast<std::size_t>(want[i].null_parent);
      if (seq.children[parent][static_cast<std::size_t>(want[i].null_slot)] != static_cast<int>(i))
        return "null leaf parent at " + std::to_string(i);
    }
  }
  const auto reach = oracle::reachability(truth, want);
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t j = 0; j < want.size(); ++j)
      if (seq.mask.visible(i, j) != reach[i][j]) return "mask (" + std::to_string(i) + "," + std::to_string(j) + ")";
  return {};
}

Outcome oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(2024);
  std::size_t sequences = 0, entries = 0, largest = 0;
  for (int stream = 0; stream < 1000; ++stream) {
    const std::size_t n_events = 1 + rng() % 200;
    const int nodes = 2 + static_cast<int>(rng() % 30);
    const InteractionLog log = random_log(rng, n_events, nodes, 0.2);
    const Tdig g = graph_of(log.events());
    const auto truth = oracle::materialize(log.events());
    for (std::size_t i = 0; i < truth.size(); ++i) {
      const auto& got = g.instance(static_cast<InstanceId>(i));
      if (got.dep1 != truth[i].dep1 || got.dep2 != truth[i].dep2 || got.delta != truth[i].delta)
        return {Status::fail, "stream " + std::to_string(stream) + ": dependencies of instance " + std::to_string(i)};
    }
    for (int probe = 0; probe < 10; ++probe) {
      const auto root = static_cast<InstanceId>(rng() % g.size());
      const int k = 1 + static_cast<int>(rng() % 5);
      // Every other probe also truncates the BFS listing.
      const std::size_t max_len =
          probe % 2 ? 1 + rng() % DepthConfig::full_tree_size(k) : DepthConfig::full_tree_size(k);
      const std::string diff = compare_sequence(g, truth, root, k, max_len);
      if (!diff.empty())
        return {Status::fail, "stream " + std::to_string(stream) + " root " + std::to_string(root) + " k " +
                                  std::to_string(k) + ": " + diff};
      ++sequences;
      const std::size_t m = std::min(max_len, oracle::subgraph(truth, root, k).size());
      entries += m;
      largest = std::max(largest, m);
    }
  }
  const double elapsed = seconds_since(t0);
  return {elapsed < kOracleBudgetS ? Status::pass : Status::fail,
          "1000 streams, " + std::to_string(sequences) + " sub-graphs and masks identical (mean " +
              fmt(static_cast<double>(entries) / static_cast<double>(sequences), 3) + " entries, max " +
              std::to_string(largest) + "), " + fmt(elapsed, 3) + " s"};
}

// ---------------------------------------------------------------------------

Outcome closed_form_losses() {
  double worst_loss = 0.0;
  for (int n_neg : {1, 2, 5, 10}) {
    for (double score : {-3.0, 0.0, 0.7, 12.0}) {
      Tape t;
      std::vector<Var> negs;
      for (int i = 0; i < n_neg; ++i) negs.push_back(t.constant(Matrix::Constant(1, 1, score)));
      const Var loss = contrastive_loss(t.constant(Matrix::Constant(1, 1, score)), negs);
      worst_loss = std::max(worst_loss, std::abs(loss.scalar() - std::log1p(static_cast<double>(n_neg))));
    }
  }
  // Uniform scores out of the full model: equal embeddings for every candidate.
  EncoderConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  cfg.depth = 2;
  cfg.dropout = 0.0;
  ModelParams p(cfg, 12);
  Tape t;
  const Tdig empty;
  const std::vector<NodeId> negs{2, 3, 4, 5, 6};
  const double model_loss = event_loss(t, empty, {1, 7, 0.0}, negs, p, nullptr).scalar();
  worst_loss = std::max(worst_loss, std::abs(model_loss - std::log(6.0)));

  p.w_add.value.setZero();
  p.w_mul.value.setZero();
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0, 3);
  double worst_sim = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    Matrix a(1, 8), b(1, 8);
    for (Eigen::Index i = 0; i < 8; ++i) {
      a(0, i) = g(rng);
      b(0, i) = g(rng);
    }
    Tape tt;
    const Var s = discriminator_sim(tt, tt.constant(a), tt.constant(b), p.w_add, p.w_mul);
    worst_sim = std::max(worst_sim, std::abs(s.scalar() - std::log(2.0)));
  }
  const bool ok = worst_loss <= kClosedFormTolerance && worst_sim <= kClosedFormTolerance;
  return {ok ? Status::pass : Status::fail, "uniform loss dev " + fmt(worst_loss, 3) + " (model ln 6 case " +
                                                fmt(model_loss, 10) + "), zero-discriminator Sim dev " +
                                                fmt(worst_sim, 3) + ", tol " + fmt(kClosedFormTolerance)};
}

// ---------------------------------------------------------------------------

// Moves entries to new positions given by `perm` (perm[0] == 0 keeps the root first).
NodeSequence permute(const NodeSequence& s, const std::vector<int>& perm) {
  NodeSequence out = s;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto to = static_cast<std::size_t>(perm[i]);
    out.ids[to] = s.ids[i];
    out.depths[to] = s.depths[i];
    out.deltas[to] = s.deltas[i];
    out.instances[to] = s.instances[i];
    out.children[to] = s.children[i];
    for (auto& c : out.children[to])
      if (c >= 0) c = perm[static_cast<std::size_t>(c)];
  }
  out.mask = AttentionMask(s.size());
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j)
      out.mask.set_visible(static_cast<std::size_t>(perm[i]), static_cast<std::size_t>(perm[j]), s.mask.visible(i, j));
  return out;
}

std::vector<int> random_permutation(std::mt19937_64& rng, std::size_t m) {
  std::vector<int> perm(m);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin() + 1, perm.end(), rng);
  return perm;
}

Outcome structural_invariances() {
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.heads = 4;
  cfg.depth = 3;
  cfg.dropout = 0.0;
  std::mt19937_64 rng(44);

  double worst_perm = 0.0;
  int perm_cases = 0;
  while (perm_cases < 120) {
    const InteractionLog log = random_log(rng, 30 + rng() % 100, 4 + static_cast<int>(rng() % 10), 0.1);
    cfg.seed = rng();
    ModelParams p(cfg, log.vocabulary().table_size());
    const Tdig g = graph_of(log.events());
    for (int i = 0; i < 12; ++i, ++perm_cases) {
      const NodeSequence a = build_sequence(g, static_cast<InstanceId>(rng() % g.size()), cfg.depth_config());
      const NodeSequence b = build_sequence(g, static_cast<InstanceId>(rng() % g.size()), cfg.depth_config());
      Tape t;
      const StreamPair x = two_stream_encode(t, a, b, p, nullptr);
      const StreamPair y =
          two_stream_encode(t, permute(a, random_permutation(rng, a.size())), permute(b, random_permutation(rng, b.size())), p, nullptr);
      worst_perm = std::max({worst_perm, (x.u.value() - y.u.value()).cwiseAbs().maxCoeff(),
                             (x.w.value() - y.w.value()).cwiseAbs().maxCoeff()});
    }
  }

  // Gated cases use integer timestamps and shifts, so every shifted time and
  // interval is exactly representable. Real-valued shifts are reported too;
  // there the inputs themselves differ by rounding.
  double worst_shift = 0.0, worst_real_shift = 0.0;
  int shift_cases = 0;
  std::uniform_real_distribution<double> shift_dist(-1e4, 1e4);
  const auto max_dev = [&](const std::vector<Interaction>& a, const std::vector<Interaction>& b, ModelParams& p,
                           NodeId node) {
    const Tdig g = graph_of(a), h = graph_of(b);
    Tape t;
    return (predictive_embedding(t, g, node, p, nullptr).value() - predictive_embedding(t, h, node, p, nullptr).value())
        .cwiseAbs()
        .maxCoeff();
  };
  while (shift_cases < 120) {
    const InteractionLog log = random_log(rng, 20 + rng() % 80, 4 + static_cast<int>(rng() % 8), 0.1);
    cfg.seed = rng();
    ModelParams p(cfg, log.vocabulary().table_size());
    std::vector<Interaction> base(log.events().begin(), log.events().end());
    for (auto& e : base) e.timestamp = std::round(10 * e.timestamp);
    const double shift = std::round(shift_dist(rng)), real_shift = shift_dist(rng);
    std::vector<Interaction> moved = base, real_moved = base;
    for (auto& e : moved) e.timestamp += shift;
    for (auto& e : real_moved) e.timestamp += real_shift;
    for (int i = 0; i < 10; ++i, ++shift_cases) {
      const NodeId node = log[rng() % log.size()].source;
      worst_shift = std::max(worst_shift, max_dev(base, moved, p, node));
      worst_real_shift = std::max(worst_real_shift, max_dev(base, real_moved, p, node));
    }
  }
  const bool ok = worst_perm <= kPermutationTolerance && worst_shift <= kShiftTolerance;
  return {ok ? Status::pass : Status::fail, std::to_string(perm_cases) + " permutations max dev " +
                                                fmt(worst_perm, 3) + " (<= " + fmt(kPermutationTolerance) + "), " +
                                                std::to_string(shift_cases) + " time shifts max dev " +
                                                fmt(worst_shift, 3) + " (<= " + fmt(kShiftTolerance) + "); real-valued shifts " +
                                                fmt(worst_real_shift, 3) + " (rounding of the shifted inputs)"};
}

// ---------------------------------------------------------------------------

struct RunResult {
  Metrics metrics;
  double seconds = 0.0;
};

// Defaults scaled to d = 32; see the README for why the batch is smaller.
EncoderConfig desk_encoder(std::uint64_t seed, double dropout) {
  EncoderConfig cfg;
  cfg.dim = 32;
  cfg.heads = 16;
  cfg.depth = 5;
  cfg.dropout = dropout;
  cfg.seed = seed;
  return cfg;
}

TrainConfig desk_training(std::uint64_t seed) {
  TrainConfig tc;
  tc.lr = 5e-4;
  tc.batch = 16;
  tc.epochs = 20;
  tc.negatives = 5;
  tc.seed = seed;
  return tc;
}

RunResult train_and_evaluate(const InteractionLog& log, const EncoderConfig& cfg, const TrainConfig& tc) {
  const auto t0 = Clock::now();
  const Splits s = chronological_split(log, SplitSpec{});
  ModelParams params(cfg, log.vocabulary().table_size());
  train(s.train, params, tc);
  const Metrics m = evaluate(params, s.train.concat(s.val), s.test);
  return {m, seconds_since(t0)};
}

Outcome planted_learning() {
  const InteractionLog log = planted_log(PlantedConfig{});
  const Splits s = chronological_split(log, SplitSpec{});
  const Metrics oracle_m = popularity_baseline(s.train.concat(s.val), s.test, PopularityKind::per_source);
  const std::size_t candidates = s.test.target_vocab().size();
  const RunResult r = train_and_evaluate(log, desk_encoder(0, 0.6), desk_training(0));
  const bool thresholds_sane = candidates == 60 && oracle_m.mean_rank < kPlantedMrLimit;
  const bool ok = thresholds_sane && r.metrics.mean_rank < kPlantedMrLimit && r.metrics.hit_at_10 > kPlantedHitLimit &&
                  r.seconds < kPlantedBudgetS;
  return {ok ? Status::pass : Status::fail,
          "MR " + fmt(r.metrics.mean_rank) + " (< " + fmt(kPlantedMrLimit) + "), Hit@10 " + fmt(r.metrics.hit_at_10) +
              " (> " + fmt(kPlantedHitLimit) + "), " + fmt(r.seconds, 3) + " s; per-user popularity oracle MR " +
              fmt(oracle_m.mean_rank) + " over " + std::to_string(candidates) + " candidates"};
}

// ---------------------------------------------------------------------------

Outcome ablation_direction() {
  std::vector<double> full, no_ca;
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    DriftConfig dc;
    dc.seed = seed;
    const InteractionLog log = cross_correlated_log(dc);
    EncoderConfig cfg = desk_encoder(seed, 0.0);
    full.push_back(train_and_evaluate(log, cfg, desk_training(seed)).metrics.mean_rank);
    cfg.ablation.no_ca = true;
    no_ca.push_back(train_and_evaluate(log, cfg, desk_training(seed)).metrics.mean_rank);
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  const double mf = median(full), mn = median(no_ca);
  std::string detail = "median MR full " + fmt(mf) + " vs no-ca " + fmt(mn) + " (seeds:";
  for (std::size_t i = 0; i < full.size(); ++i) detail += " " + fmt(full[i], 3) + "/" + fmt(no_ca[i], 3);
  detail += ")";
  if (mf <= mn) return {Status::pass, detail};
  if (mf <= mn * (1 + kAblationSlack)) return {Status::pass, detail + "; full is worse but within 5%, reported only"};
  return {Status::fail, detail};
}

// ---------------------------------------------------------------------------

// Straightforward re-implementation: every embedding recomputed per event and
// scored one pair at a time on a tape.
std::vector<double> brute_force_ranks(ModelParams& p, Tdig g, std::span<const NodeId> candidates,
                                      std::span<const Interaction> test) {
  std::vector<double> ranks;
  for (const auto& ev : test) {
    Tape t(false);
    const Var q = predictive_embedding(t, g, ev.source, p, nullptr);
    double target_score = 0.0;
    std::vector<double> scores;
    for (NodeId c : candidates) {
      const Var e = predictive_embedding(t, g, c, p, nullptr);
      const double s = discriminator_sim(t, q, e, p.w_add, p.w_mul).scalar();
      scores.push_back(s);
      if (c == ev.target) target_score = s;
    }
    double rank = 0;  // the target counts itself
    for (double s : scores) rank += s >= target_score ? 1 : 0;
    ranks.push_back(rank);
    g.append(ev);
  }
  return ranks;
}

Outcome cache_exactness() {
  std::mt19937_64 rng(77);
  EncoderConfig cfg;
  cfg.dim = 16;
  cfg.heads = 4;
  cfg.depth = 3;
  cfg.dropout = 0.0;
  double worst = 0.0;
  std::size_t events = 0;
  int logs = 0;
  for (; logs < 10; ++logs) {
    const InteractionLog log = random_log(rng, 40 + rng() % 161, 5 + static_cast<int>(rng() % 20), 0.1);
    cfg.seed = rng();
    ModelParams p(cfg, log.vocabulary().table_size());
    const Splits s = chronological_split(log, SplitSpec{});
    const InteractionLog history = s.train.concat(s.val);
    const std::vector<NodeId> cands(log.target_vocab().begin(), log.target_vocab().end());
    Evaluator cached(p, graph_of(history.events()), cands, EvalOptions{true});
    const Metrics mc = cached.evaluate(s.test.events());
    const std::vector<double> brute = brute_force_ranks(p, graph_of(history.events()), cands, s.test.events());
    double brute_mr = 0, brute_hit = 0;
    for (std::size_t i = 0; i < brute.size(); ++i) {
      worst = std::max(worst, std::abs(brute[i] - static_cast<double>(cached.ranks()[i])));
      brute_mr += brute[i];
      brute_hit += brute[i] <= 10 ? 1 : 0;
    }
    brute_mr /= static_cast<double>(brute.size());
    brute_hit /= static_cast<double>(brute.size());
    worst = std::max({worst, std::abs(brute_mr - mc.mean_rank), std::abs(brute_hit - mc.hit_at_10)});
    events += brute.size();
  }
  return {worst <= kCacheTolerance ? Status::pass : Status::fail,
          std::to_string(logs) + " logs, " + std::to_string(events) + " ranked events, max deviation " + fmt(worst, 3) +
              " (<= " + fmt(kCacheTolerance) + ")"};
}

// ---------------------------------------------------------------------------

std::string file_bytes(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

Outcome determinism() {
  PlantedConfig pc;
  pc.users = 8;
  pc.items = 24;
  pc.events_per_user = 40;
  const InteractionLog log = planted_log(pc);
  const Splits s = chronological_split(log, SplitSpec{});
  const auto dir = std::filesystem::temp_directory_path();
  std::vector<std::string> checkpoints;
  std::vector<Metrics> metrics;
  std::vector<std::vector<double>> traces;
  for (int run = 0; run < 2; ++run) {
    EncoderConfig cfg = desk_encoder(9, 0.6);
    cfg.dim = 16;
    cfg.heads = 4;
    TrainConfig tc = desk_training(9);
    tc.epochs = 3;
    ModelParams params(cfg, log.vocabulary().table_size());
    const TrainResult tr = train(s.train, params, tc);
    const auto path = dir / ("tcl_determinism_" + std::to_string(run) + ".json");
    save_checkpoint(path, make_checkpoint(params, log.vocabulary()));
    checkpoints.push_back(file_bytes(path));
    std::filesystem::remove(path);
    metrics.push_back(evaluate(params, s.train.concat(s.val), s.test));
    std::vector<double> losses;
    for (const auto& rec : tr.trace) losses.push_back(rec.loss);
    traces.push_back(losses);
  }
  const bool same_ckpt = !checkpoints[0].empty() && checkpoints[0] == checkpoints[1];
  const bool same_metrics = metrics[0].mean_rank == metrics[1].mean_rank && metrics[0].hit_at_10 == metrics[1].hit_at_10;
  const bool same_trace = traces[0] == traces[1];
  const bool ok = same_ckpt && same_metrics && same_trace;
  return {ok ? Status::pass : Status::fail,
          std::string("checkpoints ") + (same_ckpt ? "identical" : "differ") + " (" +
              std::to_string(checkpoints[0].size()) + " bytes), metrics " + (same_metrics ? "identical" : "differ") +
              " (MR " + fmt(metrics[0].mean_rank, 17) + "), loss traces " + (same_trace ? "identical" : "differ")};
}

// ---------------------------------------------------------------------------

Outcome college_msg(const std::string& path) {
  if (path.empty() || !std::filesystem::exists(path))
    return {Status::skip, "CollegeMsg file not available (set TCL_COLLEGEMSG or --collegemsg); informational"};
  const auto t0 = Clock::now();
  const InteractionLog log = load_interactions(path);
  const Splits s = chronological_split(log, SplitSpec{});
  EncoderConfig cfg;  // defaults: d 64, 16 heads, k 5
  TrainConfig tc;     // lr 5e-4, batch 512, 20 epochs, 5 negatives
  ModelParams params(cfg, log.vocabulary().table_size());
  train(s.train, params, tc);
  const InteractionLog history = s.train.concat(s.val);
  const Metrics m = evaluate(params, history, s.test);
  const Metrics pop = popularity_baseline(history, s.test, PopularityKind::global);
  const bool ok = m.mean_rank < pop.mean_rank && m.hit_at_10 > kCollegeHitLimit;
  return {ok ? Status::pass : Status::fail, "MR " + fmt(m.mean_rank) + " vs popularity " + fmt(pop.mean_rank) +
                                                ", Hit@10 " + fmt(m.hit_at_10) + " (> " + fmt(kCollegeHitLimit) +
                                                "), " + fmt(seconds_since(t0), 4) + " s; informational"};
}

Outcome run_criterion(int n, const std::string& college_path) {
  switch (n) {
    case 1: return gradient_fidelity();
    case 2: return oracle_equivalence();
    case 3: return closed_form_losses();
    case 4: return structural_invariances();
    case 5: return planted_learning();
    case 6: return ablation_direction();
    case 7: return cache_exactness();
    case 8: return determinism();
    case 9: return college_msg(college_path);
    default: throw std::out_of_range("no criterion " + std::to_string(n));
  }
}

const char* label(Status s) {
  switch (s) {
    case Status::pass: return "PASS";
    case Status::fail: return "FAIL";
    case Status::skip: return "SKIP";
  }
  return "?";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  int only = 0;
  std::string college;
  if (const char* env = std::getenv("TCL_COLLEGEMSG")) college = env;
  app.add_option("--criterion", only, "Run a single criterion (1-9)")->check(CLI::Range(1, 9));
  app.add_option("--collegemsg", college, "Path to the CollegeMsg interaction file");
  CLI11_PARSE(app, argc, argv);

  std::vector<int> which;
  if (only) which.push_back(only);
  else for (int i = 1; i <= 9; ++i) which.push_back(i);

  bool failed = false, skipped = false;
  for (int n : which) {
    Outcome o;
    try {
      o = run_criterion(n, college);
    } catch (const std::exception& e) {
      o = {Status::fail, std::string("exception: ") + e.what()};
    }
    std::cout << "criterion " << n << ": " << label(o.status) << "  " << o.detail << std::endl;
    failed |= o.status == Status::fail;
    skipped |= o.status == Status::skip;
  }
  if (failed) return 1;
  return only && skipped ? 77 : 0;
}
