#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kgr/graph.hpp"
#include "kgr/model.hpp"

namespace kgr {

struct ScoredPair {
  Triple triple;
  double score;
  bool positive;
};

struct MetricsReport {
  double auc = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double threshold = 0.5;
  int num_pos = 0;
  int num_neg = 0;
  bool no_positive_predictions = false;  // precision reported as 1.0 by convention
  int num_skipped = 0;                   // eval triples referencing unseen ids
  std::optional<double> entity_accuracy;
  std::optional<double> entity_macro_f1;
};

inline constexpr const char* kMetricsCsvHeader = "auc,precision,recall,f1,threshold,num_pos,num_neg";

/// Mann-Whitney AUC with ties counted as half, via one sort over the scores.
/// Agrees exactly with pairwise counting. Requires at least one positive and
/// one negative.
double auc(std::span<const ScoredPair> scored);

struct Prf1 {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool no_predicted_positives = false;
};

/// Threshold classification: predicted positive iff score >= threshold.
/// Precision is 1.0 (flagged) when nothing is predicted positive.
Prf1 prf1(std::span<const ScoredPair> scored, double threshold);

/// Scores every eval triple plus k_eval sampled negatives per triple, then
/// reports AUC and threshold-0.5 PRF. A negative keeps the entity pair and
/// corrupts the relation (single-relation graphs corrupt a uniform entity
/// slot instead); candidates are filtered against train and eval triples.
/// Triples referencing ids outside the graph are skipped and counted.
/// When `scored_out` is given it receives every scored pair.
MetricsReport evaluate_relations(const ModelParams& params, const KnowledgeGraph& g_train,
                                 std::span<const Triple> eval_triples, int k_eval, std::uint64_t seed,
                                 std::vector<ScoredPair>* scored_out = nullptr);

struct EntityMetrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;
};

/// Argmax classification accuracy and macro-F1 over the masked entities.
/// Macro-F1 averages F1 over the classes present among the masked labels.
EntityMetrics evaluate_entities(const ModelParams& params, const KnowledgeGraph& g, std::span<const int> labels,
                                std::span<const std::uint8_t> eval_mask);

std::string to_kv_block(const MetricsReport& r);
std::string to_csv_row(const MetricsReport& r);

}  // namespace kgr
