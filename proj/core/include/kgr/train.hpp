#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "kgr/eval.hpp"
#include "kgr/graph.hpp"
#include "kgr/loss.hpp"
#include "kgr/model.hpp"

namespace kgr {

enum class OptimizerKind : std::uint8_t { Adam, Sgd };

struct TrainConfig {
  int num_layers = 2;
  int hidden_dim = 8;
  int num_epochs = 200;
  double learning_rate = 0.01;
  double lambda = 1.0;  // weight of the negative relation term
  double alpha = 1.0;   // weight of the entity-classification term
  int negatives_per_positive = 1;
  std::uint64_t seed = 42;
  DecoderForm decoder_form = DecoderForm::Full;
  bool relational_weights = false;
  OptimizerKind optimizer = OptimizerKind::Adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  bool entity_loss_enabled = true;
  int eval_every = 0;  // 0 disables periodic validation metrics

  ModelShape shape() const {
    return {num_layers, hidden_dim, decoder_form, relational_weights};
  }
  void validate() const;  // throws ValidationError
};

struct OptimizerState {
  ModelParams m;  // first moments (Adam)
  ModelParams v;  // second moments (Adam)
  long step = 0;
};

OptimizerState init_optimizer_state(const ModelParams& params);

/// Bias-corrected adaptive moment update.
void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr, double beta1,
               double beta2, double eps);
void sgd_step(ModelParams& params, const ModelParams& grads, double lr);

struct TrainHistory {
  std::vector<LossBreakdown> epochs;
  std::vector<std::pair<int, MetricsReport>> validations;  // (epoch, report)
};

struct TrainResult {
  ModelParams params;
  TrainHistory history;
  SamplerStats sampler_stats;
};

/// Full-batch training: one encode, one scoring pass over all training
/// triples plus fresh seeded negatives, one backward, one optimizer step
/// per epoch. Identical (graph, config) inputs give bitwise-identical
/// results. Throws NonFiniteError naming the epoch and component if the
/// loss degenerates.
TrainResult train(const KnowledgeGraph& g, const TrainConfig& config, std::span<const Triple> valid_triples = {});

/// Loss at `params`, optionally accumulating full gradients. This is the
/// single forward/backward spine shared by train() and grad_check().
LossBreakdown compute_loss(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params,
                           std::span<const Triple> positives, std::span<const NegativeSample> negatives,
                           const TrainConfig& config, ModelParams* grads);

/// Per-epoch negative stream; exposed so recorded losses can be recomputed.
Rng epoch_negative_rng(std::uint64_t seed, int epoch);

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_parameter;
  int num_parameters = 0;
};

/// Fault-injection hook for tests: applied to the analytic gradients before
/// comparison.
using GradMutator = std::function<void(ModelParams&)>;

/// Central finite differences (step 1e-5) of the full loss against the
/// analytic gradient, for every scalar parameter. Negatives are sampled once
/// and held fixed. The relative error floors its denominator at 1e-3 so
/// finite-difference roundoff on near-zero gradients does not register.
GradCheckReport grad_check(const KnowledgeGraph& g, const TrainConfig& config, const GradMutator& mutate = {});

double grad_check_rel_err(double analytic, double numeric);

/// The small labeled graphs the gradcheck harness sweeps over.
std::vector<std::pair<std::string, KnowledgeGraph>> gradcheck_topologies();

struct GradCheckSweepEntry {
  std::string topology;
  TrainConfig config;
  GradCheckReport report;
};

/// Every topology x 3 seeds x layers {1,2} x dim {2,4} x both decoder forms
/// x relational on/off, optionally restricted to one dim/layer count.
std::vector<GradCheckSweepEntry> grad_check_sweep(std::uint64_t base_seed, std::optional<int> dim = {},
                                                  std::optional<int> layers = {});

}  // namespace kgr
