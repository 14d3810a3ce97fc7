#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kgr/graph.hpp"
#include "kgr/matrix.hpp"
#include "kgr/rng.hpp"

namespace kgr {

// Probabilities are clamped to [kProbClamp, 1 - kProbClamp] before any log.
inline constexpr double kProbClamp = 1e-12;

enum class CorruptedSlot : std::uint8_t { Head, Tail };

struct NegativeSample {
  Triple triple;
  int source_index;  // index of the positive this corrupts
  CorruptedSlot corrupted_slot;
};

struct SamplerStats {
  int exhausted = 0;  // corruptions that ran out of attempts and kept the last candidate
};

/// k corruptions per positive: a fair coin picks head or tail, a uniform
/// entity replaces it, and candidates colliding with the training set are
/// resampled (at most 100 attempts, then the last candidate is emitted and
/// the stats counter bumped). Fully determined by the rng state.
std::vector<NegativeSample> sample_negatives(const KnowledgeGraph& g, std::span<const Triple> positives, int k,
                                             Rng& rng, SamplerStats* stats = nullptr);

struct LossBreakdown {
  double relation_pos = 0.0;
  double relation_neg = 0.0;
  double entity = 0.0;
  double total = 0.0;
  bool entity_active = false;
};

/// Binary cross-entropy with negative sampling: -mean log p+ for positives,
/// -mean log(1 - p-) for negatives, the negative term weighted by lambda in
/// the total. Each term averages over its own count so lambda's meaning does
/// not depend on the sampling ratio.
LossBreakdown relation_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double lambda);

struct RelationLossGrads {
  std::vector<double> pos;  // d(total)/d(pos_scores[i])
  std::vector<double> neg;  // d(total)/d(neg_scores[i]), lambda included
};
RelationLossGrads relation_loss_backward(std::span<const double> pos_scores, std::span<const double> neg_scores,
                                         double lambda);

struct EntityLossResult {
  double value = 0.0;
  bool active = false;  // false when no entity carries a label
  int num_labeled = 0;
};

/// Mean negative log-likelihood of the true class over labeled entities
/// (label -1 = unlabeled). Rows of `probs` must be probability vectors.
EntityLossResult entity_loss(const Matrix& probs, std::span<const int> labels);

/// dL/dprobs for entity_loss.
Matrix entity_loss_backward(const Matrix& probs, std::span<const int> labels);

}  // namespace kgr
