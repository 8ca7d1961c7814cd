#include "tcl/objective.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace tcl {

using ad::Matrix;
using ad::Real;
using ad::Tape;
using ad::Var;

void TrainConfig::validate() const {
  if (!(lr > 0.0)) throw std::invalid_argument("learning rate must be positive");
  if (batch < 1) throw std::invalid_argument("batch size must be positive");
  if (epochs < 0) throw std::invalid_argument("epoch count must be non-negative");
  if (negatives < 1) throw std::invalid_argument("at least one negative sample is required");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw std::invalid_argument("Adam betas must lie in [0, 1)");
  }
}

Var predict_future(Tape& tape, const Var& h_dep1, const Var& h_dep2, ProjectionHeadParams& head) {
  const Var parts[] = {h_dep1, h_dep2};
  Var x = ad::concat_cols(parts);
  x = ad::prelu(ad::add(ad::matmul(x, tape.param(head.w1)), tape.param(head.b1)), tape.param(head.slope1));
  x = ad::prelu(ad::add(ad::matmul(x, tape.param(head.w2)), tape.param(head.b2)), tape.param(head.slope2));
  return ad::add(ad::matmul(x, tape.param(head.w3)), tape.param(head.b3));
}

Var discriminator_sim(Tape& tape, const Var& a, const Var& b, ad::Parameter& w_add, ad::Parameter& w_mul) {
  Var additive = ad::sum(ad::mul(tape.param(w_add), ad::add(a, b)));
  Var multiplicative = ad::sum(ad::mul(tape.param(w_mul), ad::mul(a, b)));
  return ad::softplus(ad::add(additive, multiplicative));
}

Var contrastive_loss(const Var& pos_score, std::span<const Var> neg_scores) {
  if (neg_scores.empty()) throw std::invalid_argument("contrastive_loss: at least one negative score is required");
  std::vector<Var> scores{pos_score};
  scores.insert(scores.end(), neg_scores.begin(), neg_scores.end());
  return ad::sub(ad::log_sum_exp(ad::concat_cols(scores)), pos_score);
}

Var predictive_embedding(Tape& tape, const Tdig& tdig, NodeId node, ModelParams& params,
                         std::mt19937_64* dropout_rng) {
  const DepthConfig depth = params.config().depth_config();
  const DependencyPair deps = tdig.dependencies_of(node);
  const NodeSequence first = build_sequence(tdig, deps.first, depth);
  const NodeSequence second = build_sequence(tdig, deps.second, depth);
  const StreamPair h = two_stream_encode(tape, first, second, params, dropout_rng);
  return predict_future(tape, h.u, h.w, params.head);
}

Var event_loss(Tape& tape, const Tdig& tdig, const Interaction& event, std::span<const NodeId> negatives,
               ModelParams& params, std::mt19937_64* dropout_rng) {
  Var hu = predictive_embedding(tape, tdig, event.source, params, dropout_rng);
  Var hv = predictive_embedding(tape, tdig, event.target, params, dropout_rng);
  Var pos = discriminator_sim(tape, hu, hv, params.w_add, params.w_mul);
  std::vector<Var> negs;
  negs.reserve(negatives.size());
  for (NodeId w : negatives) {
    Var hw = predictive_embedding(tape, tdig, w, params, dropout_rng);
    negs.push_back(discriminator_sim(tape, hu, hw, params.w_add, params.w_mul));
  }
  return contrastive_loss(pos, negs);
}

std::vector<NodeId> sample_negatives(std::mt19937_64& rng, std::span<const NodeId> vocab, NodeId exclude, int n) {
  if (n < 0) throw std::invalid_argument("sample_negatives: negative count");
  const bool excluded_present = std::find(vocab.begin(), vocab.end(), exclude) != vocab.end();
  const std::size_t available = vocab.size() - (excluded_present ? 1 : 0);
  if (available < static_cast<std::size_t>(n)) {
    throw std::invalid_argument("sample_negatives: need " + std::to_string(n) + " candidates but only " +
                                std::to_string(available) + " remain after exclusion");
  }
  std::vector<NodeId> out;
  out.reserve(static_cast<std::size_t>(n));
  std::uniform_int_distribution<std::size_t> pick(0, vocab.size() - 1);
  while (out.size() < static_cast<std::size_t>(n)) {
    const NodeId candidate = vocab[pick(rng)];
    if (candidate == exclude || std::find(out.begin(), out.end(), candidate) != out.end()) continue;
    out.push_back(candidate);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Optimization

AdamOptimizer::AdamOptimizer(std::vector<ad::Parameter*> params, const AdamConfig& config)
    : params_(std::move(params)), config_(config) {
  moments_.reserve(params_.size());
  for (const auto* p : params_) {
    moments_.push_back({Matrix::Zero(p->value.rows(), p->value.cols()), Matrix::Zero(p->value.rows(), p->value.cols())});
  }
}

void AdamOptimizer::step() {
  if (params_.empty()) throw std::logic_error("AdamOptimizer::step: no parameters to update");
  for (const auto* p : params_) {
    if (p->grad.rows() != p->value.rows() || p->grad.cols() != p->value.cols()) {
      throw std::logic_error("AdamOptimizer::step: gradient of " + p->name + " is not populated");
    }
  }
  ++step_;
  const auto b1 = static_cast<Real>(config_.beta1);
  const auto b2 = static_cast<Real>(config_.beta2);
  const auto correction1 = static_cast<Real>(1.0 - std::pow(config_.beta1, static_cast<double>(step_)));
  const auto correction2 = static_cast<Real>(1.0 - std::pow(config_.beta2, static_cast<double>(step_)));
  const auto lr = static_cast<Real>(config_.lr);
  const auto eps = static_cast<Real>(config_.eps);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ad::Parameter& p = *params_[i];
    Moments& m = moments_[i];
    m.first = b1 * m.first + (1 - b1) * p.grad;
    m.second = b2 * m.second + (1 - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (m.first.array() / correction1) / ((m.second.array() / correction2).sqrt() + eps);
  }
}

double clip_grad_norm(std::span<ad::Parameter* const> params, double max_norm) {
  double total = 0.0;
  for (const auto* p : params) total += static_cast<double>(p->grad.squaredNorm());
  const double norm = std::sqrt(total);
  if (max_norm > 0.0 && norm > max_norm) {
    const auto factor = static_cast<Real>(max_norm / norm);
    for (auto* p : params) p->grad *= factor;
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::mt19937_64 event_rng(std::uint64_t seed, int epoch, std::size_t index) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(epoch), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

}  // namespace

TrainResult train(const InteractionLog& log, ModelParams& params, const TrainConfig& config, const TrainHooks& hooks) {
  config.validate();
  if (log.empty()) throw std::invalid_argument("train: empty interaction log");
  const auto events = log.events();
  const auto candidates = log.target_vocab();
  const bool use_dropout = params.config().dropout > 0.0;
  const auto all_params = params.parameters();

  TrainResult result;
  AdamOptimizer optimizer(all_params, config.adam());
  std::mt19937_64 negative_rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
  params.zero_grad();

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    Tdig graph;
    double epoch_total = 0.0;
    for (std::size_t start = 0; start < events.size(); start += static_cast<std::size_t>(config.batch)) {
      const std::size_t end = std::min(events.size(), start + static_cast<std::size_t>(config.batch));
      const auto count = static_cast<Real>(end - start);
      double batch_total = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const Interaction& ev = events[i];
        const auto negatives = sample_negatives(negative_rng, candidates, ev.target, config.negatives);
        std::mt19937_64 rng = event_rng(config.seed, epoch, i);
        try {
          Tape tape;
          Var loss = event_loss(tape, graph, ev, negatives, params, use_dropout ? &rng : nullptr);
          tape.backward(ad::scale(loss, Real(1) / count));
          tape.accumulate_parameter_grads();
          batch_total += static_cast<double>(loss.scalar());
        } catch (const ad::NumericError& e) {
          std::ostringstream msg;
          msg << "non-finite value at epoch " << epoch << ", step " << result.optimizer_steps + 1 << ", event " << i
              << ": " << e.what();
          throw ad::NumericError(msg.str());
        }
        graph.append(ev);
      }
      const double batch_loss = batch_total / static_cast<double>(end - start);
      if (!std::isfinite(batch_loss)) {
        std::ostringstream msg;
        msg << "non-finite loss at epoch " << epoch << ", step " << result.optimizer_steps + 1;
        throw ad::NumericError(msg.str());
      }
      clip_grad_norm(all_params, config.clip_norm);
      optimizer.step();
      params.zero_grad();
      ++result.optimizer_steps;
      const LossRecord record{epoch, result.optimizer_steps, batch_loss};
      result.trace.push_back(record);
      if (hooks.on_step) hooks.on_step(record);
      epoch_total += batch_total;
    }
    result.epoch_mean_loss.push_back(epoch_total / static_cast<double>(events.size()));
    if (hooks.on_epoch_end) hooks.on_epoch_end(epoch, graph, result);
  }
  return result;
}

}  // namespace tcl
