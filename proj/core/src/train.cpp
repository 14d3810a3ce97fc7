#include "kgr/train.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgr/errors.hpp"

namespace kgr {

namespace {

constexpr double kFdStep = 1e-5;

void check_finite(const LossBreakdown& lb, int epoch) {
  const std::pair<const char*, double> components[] = {
      {"relation_pos", lb.relation_pos}, {"relation_neg", lb.relation_neg}, {"entity", lb.entity}, {"total", lb.total}};
  for (const auto& [name, value] : components) {
    if (!std::isfinite(value)) {
      throw NonFiniteError("non-finite loss at epoch " + std::to_string(epoch) + ": component " + name);
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (num_layers < 1) throw ValidationError("config: num_layers must be >= 1");
  if (hidden_dim < 1) throw ValidationError("config: hidden_dim must be >= 1");
  if (num_epochs < 0) throw ValidationError("config: num_epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ValidationError("config: learning_rate must be > 0");
  if (lambda < 0.0) throw ValidationError("config: lambda must be >= 0");
  if (alpha < 0.0) throw ValidationError("config: alpha must be >= 0");
  if (negatives_per_positive < 1) throw ValidationError("config: negatives_per_positive must be >= 1");
  if (eval_every < 0) throw ValidationError("config: eval_every must be >= 0");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0)) throw ValidationError("config: adam_beta1 must be in [0, 1)");
  if (!(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) throw ValidationError("config: adam_beta2 must be in [0, 1)");
  if (!(adam_eps > 0.0)) throw ValidationError("config: adam_eps must be > 0");
}

OptimizerState init_optimizer_state(const ModelParams& params) {
  OptimizerState s;
  s.m = zeros_like(params);
  s.v = zeros_like(params);
  return s;
}

void adam_step(ModelParams& params, const ModelParams& grads, OptimizerState& state, double lr, double beta1,
               double beta2, double eps) {
  ++state.step;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.step));

  auto prefs = param_refs(params);
  auto grefs = param_refs(const_cast<ModelParams&>(grads));
  auto mrefs = param_refs(state.m);
  auto vrefs = param_refs(state.v);
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    auto pv = prefs[t].tensor->values();
    const auto gv = grefs[t].tensor->values();
    auto mv = mrefs[t].tensor->values();
    auto vv = vrefs[t].tensor->values();
    if (pv.size() != gv.size()) {
      throw ShapeError("adam_step: gradient shape mismatch for " + prefs[t].name);
    }
    for (std::size_t i = 0; i < pv.size(); ++i) {
      mv[i] = beta1 * mv[i] + (1.0 - beta1) * gv[i];
      vv[i] = beta2 * vv[i] + (1.0 - beta2) * gv[i] * gv[i];
      const double m_hat = mv[i] / bc1;
      const double v_hat = vv[i] / bc2;
      pv[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

void sgd_step(ModelParams& params, const ModelParams& grads, double lr) {
  auto prefs = param_refs(params);
  auto grefs = param_refs(const_cast<ModelParams&>(grads));
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    auto pv = prefs[t].tensor->values();
    const auto gv = grefs[t].tensor->values();
    if (pv.size() != gv.size()) {
      throw ShapeError("sgd_step: gradient shape mismatch for " + prefs[t].name);
    }
    for (std::size_t i = 0; i < pv.size(); ++i) pv[i] -= lr * gv[i];
  }
}

LossBreakdown compute_loss(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params,
                           std::span<const Triple> positives, std::span<const NegativeSample> negatives,
                           const TrainConfig& config, ModelParams* grads) {
  const NodeEmbeddings emb = encode(g, norms, params);
  const Matrix& h = emb.final_layer();

  std::vector<double> pos_scores;
  pos_scores.reserve(positives.size());
  for (const Triple& t : positives) {
    pos_scores.push_back(score_relation(h.row(t.head), h.row(t.tail), t.relation, params));
  }
  std::vector<double> neg_scores;
  neg_scores.reserve(negatives.size());
  for (const NegativeSample& n : negatives) {
    neg_scores.push_back(score_relation(h.row(n.triple.head), h.row(n.triple.tail), n.triple.relation, params));
  }

  LossBreakdown lb = relation_loss(pos_scores, neg_scores, config.lambda);

  const bool entity_term = config.entity_loss_enabled && g.has_labels() && params.num_classes() > 0;
  Matrix probs;
  if (entity_term) {
    probs = classify(h, params);
    const EntityLossResult el = entity_loss(probs, g.labels());
    lb.entity = el.value;
    lb.entity_active = el.active;
  }
  lb.total = lb.relation_pos + config.lambda * lb.relation_neg + config.alpha * lb.entity;

  if (grads != nullptr) {
    Matrix grad_final(h.rows(), h.cols());
    const RelationLossGrads rg = relation_loss_backward(pos_scores, neg_scores, config.lambda);
    for (std::size_t i = 0; i < positives.size(); ++i) {
      const Triple& t = positives[i];
      score_backward(rg.pos[i], h.row(t.head), h.row(t.tail), t.relation, params, pos_scores[i], *grads,
                     grad_final.row(t.head), grad_final.row(t.tail));
    }
    for (std::size_t i = 0; i < negatives.size(); ++i) {
      const Triple& t = negatives[i].triple;
      score_backward(rg.neg[i], h.row(t.head), h.row(t.tail), t.relation, params, neg_scores[i], *grads,
                     grad_final.row(t.head), grad_final.row(t.tail));
    }
    if (entity_term && lb.entity_active) {
      Matrix grad_probs = entity_loss_backward(probs, g.labels());
      grad_probs *= config.alpha;
      grad_final += classify_backward(grad_probs, h, probs, params, *grads);
    }
    encode_backward(g, norms, params, emb, grad_final, *grads);
  }
  return lb;
}

Rng epoch_negative_rng(std::uint64_t seed, int epoch) {
  return Rng(derive_seed(seed, 1 + static_cast<std::uint64_t>(epoch)));
}

TrainResult train(const KnowledgeGraph& g, const TrainConfig& config, std::span<const Triple> valid_triples) {
  config.validate();
  if (g.num_entities() < 1 || g.triples().empty()) {
    throw ValidationError("train: graph must have entities and at least one triple");
  }

  const NormCoefficients norms = norm_coefficients(g);
  TrainResult result;
  result.params = init_params(g, config.shape(), derive_seed(config.seed, 0));
  OptimizerState opt = init_optimizer_state(result.params);

  for (int epoch = 0; epoch < config.num_epochs; ++epoch) {
    Rng rng = epoch_negative_rng(config.seed, epoch);
    const std::vector<NegativeSample> negatives =
        sample_negatives(g, g.triples(), config.negatives_per_positive, rng, &result.sampler_stats);

    ModelParams grads = zeros_like(result.params);
    const LossBreakdown lb = compute_loss(g, norms, result.params, g.triples(), negatives, config, &grads);
    check_finite(lb, epoch);

    if (config.optimizer == OptimizerKind::Adam) {
      adam_step(result.params, grads, opt, config.learning_rate, config.adam_beta1, config.adam_beta2,
                config.adam_eps);
    } else {
      sgd_step(result.params, grads, config.learning_rate);
    }
    result.history.epochs.push_back(lb);

    if (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0 && !valid_triples.empty()) {
      const MetricsReport report = evaluate_relations(result.params, g, valid_triples, 1,
                                                      derive_seed(config.seed, 0x10000000ULL + epoch));
      result.history.validations.emplace_back(epoch + 1, report);
    }
  }
  return result;
}

double grad_check_rel_err(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-3});
  return std::abs(analytic - numeric) / denom;
}

GradCheckReport grad_check(const KnowledgeGraph& g, const TrainConfig& config, const GradMutator& mutate) {
  const NormCoefficients norms = norm_coefficients(g);
  ModelParams params = init_params(g, config.shape(), derive_seed(config.seed, 0));

  Rng rng = epoch_negative_rng(config.seed, 0);
  const std::vector<NegativeSample> negatives =
      sample_negatives(g, g.triples(), config.negatives_per_positive, rng);

  ModelParams analytic = zeros_like(params);
  compute_loss(g, norms, params, g.triples(), negatives, config, &analytic);
  if (mutate) mutate(analytic);

  GradCheckReport report;
  auto prefs = param_refs(params);
  auto arefs = param_refs(analytic);
  for (std::size_t t = 0; t < prefs.size(); ++t) {
    auto pv = prefs[t].tensor->values();
    const auto av = arefs[t].tensor->values();
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double saved = pv[i];
      pv[i] = saved + kFdStep;
      const double up = compute_loss(g, norms, params, g.triples(), negatives, config, nullptr).total;
      pv[i] = saved - kFdStep;
      const double down = compute_loss(g, norms, params, g.triples(), negatives, config, nullptr).total;
      pv[i] = saved;

      const double fd = (up - down) / (2.0 * kFdStep);
      const double err = grad_check_rel_err(av[i], fd);
      ++report.num_parameters;
      if (err > report.max_rel_err) {
        report.max_rel_err = err;
        report.worst_parameter = prefs[t].name + "[" + std::to_string(i / prefs[t].tensor->cols()) + "," +
                                 std::to_string(i % prefs[t].tensor->cols()) + "]";
      }
    }
  }
  return report;
}

std::vector<std::pair<std::string, KnowledgeGraph>> gradcheck_topologies() {
  std::vector<std::pair<std::string, KnowledgeGraph>> out;

  const std::vector<Triple> pair_triples = {{0, 0, 1}};
  out.emplace_back("pair", KnowledgeGraph::build(pair_triples, 2, 1, {0, 1}, 2));

  const std::vector<Triple> chain_triples = {{0, 0, 1}, {1, 0, 2}, {2, 1, 3}};
  out.emplace_back("chain4", KnowledgeGraph::build(chain_triples, 4, 2, {0, 0, 1, 1}, 2));

  const std::vector<Triple> star_triples = {{0, 0, 1}, {0, 1, 2}, {3, 0, 0}, {4, 1, 0}};
  out.emplace_back("star5", KnowledgeGraph::build(star_triples, 5, 2, {0, 1, 1, 0, 1}, 2));

  const std::vector<Triple> cycle_triples = {{0, 0, 1}, {1, 0, 2}, {2, 0, 3}, {3, 0, 4}, {4, 1, 0}};
  out.emplace_back("cycle5", KnowledgeGraph::build(cycle_triples, 5, 2, {0, 1, 0, 1, 0}, 2));

  // self-loop and a parallel pair under two relations included on purpose
  const std::vector<Triple> dense_triples = {{0, 0, 1}, {0, 1, 1}, {1, 0, 2}, {2, 1, 2}, {2, 0, 3},
                                             {3, 1, 4}, {4, 0, 5}, {5, 1, 0}, {1, 1, 4}, {3, 0, 0}};
  out.emplace_back("dense6", KnowledgeGraph::build(dense_triples, 6, 2, {0, 1, 2, 0, 1, 2}, 3));

  return out;
}

std::vector<GradCheckSweepEntry> grad_check_sweep(std::uint64_t base_seed, std::optional<int> dim,
                                                  std::optional<int> layers) {
  std::vector<int> dims = dim ? std::vector<int>{*dim} : std::vector<int>{2, 4};
  std::vector<int> layer_counts = layers ? std::vector<int>{*layers} : std::vector<int>{1, 2};

  std::vector<GradCheckSweepEntry> out;
  for (const auto& [name, graph] : gradcheck_topologies()) {
    for (int s = 0; s < 3; ++s) {
      for (int L : layer_counts) {
        for (int d : dims) {
          for (DecoderForm form : {DecoderForm::Full, DecoderForm::Diagonal}) {
            for (bool relational : {false, true}) {
              TrainConfig config;
              config.num_layers = L;
              config.hidden_dim = d;
              config.seed = base_seed + static_cast<std::uint64_t>(s);
              config.decoder_form = form;
              config.relational_weights = relational;
              config.negatives_per_positive = 2;
              out.push_back({name, config, grad_check(graph, config)});
            }
          }
        }
      }
    }
  }
  return out;
}

}  // namespace kgr
