#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "tcl/autodiff.hpp"
#include "tcl/encoder.hpp"
#include "tcl/ingest.hpp"
#include "tcl/tdig.hpp"

namespace tcl {

struct AdamConfig {
  double lr = 0.0005;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct TrainConfig {
  double lr = 0.0005;
  int batch = 512;
  int epochs = 20;
  int negatives = 5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  /// Global gradient-norm clip applied before every optimizer step; <= 0 disables.
  double clip_norm = 5.0;
  std::uint64_t seed = 0;

  AdamConfig adam() const { return {lr, beta1, beta2, adam_eps}; }
  void validate() const;
};

/// phi([h1; h2]): linear -> PReLU -> linear -> PReLU -> linear. Inputs are 1 x d.
ad::Var predict_future(ad::Tape& tape, const ad::Var& h_dep1, const ad::Var& h_dep2, ProjectionHeadParams& head);

/// SoftPlus(w_add . (a + b) + w_mul . (a * b)); symmetric in a and b.
ad::Var discriminator_sim(ad::Tape& tape, const ad::Var& a, const ad::Var& b, ad::Parameter& w_add,
                          ad::Parameter& w_mul);

/// -log(e^pos / (e^pos + sum e^neg)) via log-sum-exp.
ad::Var contrastive_loss(const ad::Var& pos_score, std::span<const ad::Var> neg_scores);

/// Predictive embedding of `node` (1 x d) from the two sub-graphs rooted at
/// its current dependency instances. Never-seen nodes use the NULL pair.
ad::Var predictive_embedding(ad::Tape& tape, const Tdig& tdig, NodeId node, ModelParams& params,
                             std::mt19937_64* dropout_rng);

/// Contrastive loss of one event against the given negatives, using the graph
/// state before the event.
ad::Var event_loss(ad::Tape& tape, const Tdig& tdig, const Interaction& event, std::span<const NodeId> negatives,
                   ModelParams& params, std::mt19937_64* dropout_rng);

/// n distinct ids drawn uniformly from `vocab` without `exclude`.
std::vector<NodeId> sample_negatives(std::mt19937_64& rng, std::span<const NodeId> vocab, NodeId exclude, int n);

/// Bias-corrected Adam over a fixed list of parameters.
class AdamOptimizer {
 public:
  struct Moments {
    ad::Matrix first;
    ad::Matrix second;
  };

  AdamOptimizer(std::vector<ad::Parameter*> params, const AdamConfig& config);

  /// Applies one update from each parameter's current grad.
  void step();
  std::int64_t steps() const { return step_; }
  const std::vector<Moments>& moments() const { return moments_; }

 private:
  std::vector<ad::Parameter*> params_;
  std::vector<Moments> moments_;
  AdamConfig config_;
  std::int64_t step_ = 0;
};

/// Rescales gradients so their global L2 norm is at most max_norm. Returns the
/// norm before clipping.
double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm);

struct LossRecord {
  int epoch = 0;
  std::int64_t step = 0;
  double loss = 0.0;
};

struct TrainResult {
  std::vector<LossRecord> trace;
  std::vector<double> epoch_mean_loss;
  std::int64_t optimizer_steps = 0;
};

struct TrainHooks {
  std::function<void(const LossRecord&)> on_step;
  /// Called after each epoch with the graph built from the training events.
  std::function<void(int epoch, const Tdig& graph, const TrainResult& so_far)> on_epoch_end;
};

/// Replays `log` chronologically once per epoch: each event is scored against
/// the graph built from the events before it, then appended. Gradients of the
/// mean mini-batch loss drive one Adam step per batch.
TrainResult train(const InteractionLog& log, ModelParams& params, const TrainConfig& config,
                  const TrainHooks& hooks = {});

}  // namespace tcl
