#include "kgr/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgr/errors.hpp"

namespace kgr {

namespace {

constexpr int kMaxSampleAttempts = 100;

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

bool inside_clamp(double p) { return p > kProbClamp && p < 1.0 - kProbClamp; }

}  // namespace

std::vector<NegativeSample> sample_negatives(const KnowledgeGraph& g, std::span<const Triple> positives, int k,
                                             Rng& rng, SamplerStats* stats) {
  if (k < 1) throw ValidationError("sample_negatives: k must be >= 1");
  std::vector<NegativeSample> out;
  out.reserve(positives.size() * static_cast<std::size_t>(k));
  const auto num_entities = static_cast<std::uint64_t>(g.num_entities());

  for (std::size_t i = 0; i < positives.size(); ++i) {
    const Triple& pos = positives[i];
    for (int j = 0; j < k; ++j) {
      const CorruptedSlot slot = rng.next_bool() ? CorruptedSlot::Head : CorruptedSlot::Tail;
      Triple candidate = pos;
      bool accepted = false;
      for (int attempt = 0; attempt < kMaxSampleAttempts; ++attempt) {
        const auto replacement = static_cast<EntityId>(rng.next_below(num_entities));
        if (slot == CorruptedSlot::Head) {
          candidate.head = replacement;
        } else {
          candidate.tail = replacement;
        }
        if (!g.contains(candidate)) {
          accepted = true;
          break;
        }
      }
      if (!accepted && stats != nullptr) ++stats->exhausted;
      out.push_back({candidate, static_cast<int>(i), slot});
    }
  }
  return out;
}

LossBreakdown relation_loss(std::span<const double> pos_scores, std::span<const double> neg_scores, double lambda) {
  LossBreakdown lb;
  for (double p : pos_scores) lb.relation_pos -= std::log(clamp_prob(p));
  if (!pos_scores.empty()) lb.relation_pos /= static_cast<double>(pos_scores.size());
  for (double p : neg_scores) lb.relation_neg -= std::log(1.0 - clamp_prob(p));
  if (!neg_scores.empty()) lb.relation_neg /= static_cast<double>(neg_scores.size());
  lb.total = lb.relation_pos + lambda * lb.relation_neg;
  return lb;
}

RelationLossGrads relation_loss_backward(std::span<const double> pos_scores, std::span<const double> neg_scores,
                                         double lambda) {
  RelationLossGrads g;
  g.pos.resize(pos_scores.size(), 0.0);
  g.neg.resize(neg_scores.size(), 0.0);
  // the clamp makes the loss flat outside [clamp, 1-clamp]
  if (!pos_scores.empty()) {
    const double inv_n = 1.0 / static_cast<double>(pos_scores.size());
    for (std::size_t i = 0; i < pos_scores.size(); ++i) {
      if (inside_clamp(pos_scores[i])) g.pos[i] = -inv_n / pos_scores[i];
    }
  }
  if (!neg_scores.empty()) {
    const double scale = lambda / static_cast<double>(neg_scores.size());
    for (std::size_t i = 0; i < neg_scores.size(); ++i) {
      if (inside_clamp(neg_scores[i])) g.neg[i] = scale / (1.0 - neg_scores[i]);
    }
  }
  return g;
}

EntityLossResult entity_loss(const Matrix& probs, std::span<const int> labels) {
  if (static_cast<int>(labels.size()) != probs.rows()) {
    throw ValidationError("entity_loss: " + std::to_string(labels.size()) + " labels for " +
                          std::to_string(probs.rows()) + " rows");
  }
  EntityLossResult res;
  for (int i = 0; i < probs.rows(); ++i) {
    const int y = labels[i];
    if (y < 0) continue;
    if (y >= probs.cols()) {
      throw ValidationError("entity_loss: label " + std::to_string(y) + " out of range [0, " +
                            std::to_string(probs.cols()) + ") at entity " + std::to_string(i));
    }
    res.value -= std::log(clamp_prob(probs(i, y)));
    ++res.num_labeled;
  }
  if (res.num_labeled > 0) {
    res.value /= static_cast<double>(res.num_labeled);
    res.active = true;
  }
  return res;
}

Matrix entity_loss_backward(const Matrix& probs, std::span<const int> labels) {
  Matrix grad(probs.rows(), probs.cols());
  int num_labeled = 0;
  for (int i = 0; i < probs.rows(); ++i) {
    if (labels[i] >= 0) ++num_labeled;
  }
  if (num_labeled == 0) return grad;
  const double inv_n = 1.0 / static_cast<double>(num_labeled);
  for (int i = 0; i < probs.rows(); ++i) {
    const int y = labels[i];
    if (y < 0) continue;
    if (inside_clamp(probs(i, y))) grad(i, y) = -inv_n / probs(i, y);
  }
  return grad;
}

}  // namespace kgr
