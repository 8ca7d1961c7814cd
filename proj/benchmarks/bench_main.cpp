#include <benchmark/benchmark.h>

#include <optional>
#include <random>

#include "tcl/evaluation.hpp"
#include "tcl/objective.hpp"
#include "tcl/synthetic.hpp"

using namespace tcl;

namespace {

EncoderConfig bench_config(int dim) {
  EncoderConfig c;
  c.dim = dim;
  c.heads = 16;
  c.depth = 5;
  c.dropout = 0.0;
  return c;
}

Tdig random_graph(std::size_t events, int nodes) {
  std::mt19937_64 rng(1);
  const InteractionLog log = random_log(rng, events, nodes);
  Tdig g;
  for (const auto& e : log.events()) g.append(e);
  return g;
}

}  // namespace

static void BM_SubgraphExtraction(benchmark::State& state) {
  const Tdig g = random_graph(5000, 200);
  const DepthConfig depth = DepthConfig::for_depth(static_cast<int>(state.range(0)));
  std::mt19937_64 rng(2);
  for (auto _ : state) {
    const auto root = static_cast<InstanceId>(rng() % g.size());
    benchmark::DoNotOptimize(build_sequence(g, root, depth));
  }
}
BENCHMARK(BM_SubgraphExtraction)->Arg(2)->Arg(5);

static void BM_TwoStreamEncode(benchmark::State& state) {
  const Tdig g = random_graph(2000, 100);
  EncoderConfig cfg = bench_config(static_cast<int>(state.range(0)));
  ModelParams p(cfg, 101);
  const NodeSequence a = build_sequence(g, static_cast<InstanceId>(g.size() - 1), cfg.depth_config());
  const NodeSequence b = build_sequence(g, static_cast<InstanceId>(g.size() - 2), cfg.depth_config());
  for (auto _ : state) {
    ad::Tape t(false);
    benchmark::DoNotOptimize(two_stream_encode(t, a, b, p, nullptr).u.value());
  }
}
BENCHMARK(BM_TwoStreamEncode)->Arg(32)->Arg(64);

static void BM_EventLossForwardBackward(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const InteractionLog log = random_log(rng, 2000, 100);
  Tdig g;
  for (std::size_t i = 0; i + 1 < log.size(); ++i) g.append(log[i]);
  ModelParams p(bench_config(64), log.vocabulary().table_size());
  const Interaction& ev = log[log.size() - 1];
  const auto negs = sample_negatives(rng, log.target_vocab(), ev.target, 5);
  for (auto _ : state) {
    ad::Tape t;
    ad::Var loss = event_loss(t, g, ev, negs, p, nullptr);
    t.backward(loss);
    p.zero_grad();
  }
}
BENCHMARK(BM_EventLossForwardBackward);

static void BM_RankEvent(benchmark::State& state) {
  std::mt19937_64 rng(4);
  const auto nodes = static_cast<int>(state.range(0));
  const InteractionLog log = random_log(rng, 4000, nodes);
  ModelParams p(bench_config(64), log.vocabulary().table_size());
  Tdig g;
  for (std::size_t i = 0; i < 3000; ++i) g.append(log[i]);
  const std::vector<NodeId> cands(log.target_vocab().begin(), log.target_vocab().end());
  std::optional<Evaluator> ev;
  ev.emplace(p, g, cands);
  std::size_t next = 3000;
  for (auto _ : state) {
    if (next == log.size()) {
      state.PauseTiming();
      ev.emplace(p, g, cands);
      next = 3000;
      state.ResumeTiming();
    }
    benchmark::DoNotOptimize(ev->rank_event(log[next++]));
  }
}
BENCHMARK(BM_RankEvent)->Arg(100)->Arg(400);
BENCHMARK_MAIN();
