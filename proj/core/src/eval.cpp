#include "kgr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "kgr/errors.hpp"
#include "kgr/rng.hpp"

namespace kgr {

namespace {

constexpr int kMaxEvalSampleAttempts = 100;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", v);
  return buf;
}

}  // namespace

double auc(std::span<const ScoredPair> scored) {
  long long num_pos = 0, num_neg = 0;
  for (const auto& s : scored) {
    (s.positive ? num_pos : num_neg) += 1;
  }
  if (num_pos == 0 || num_neg == 0) {
    throw MetricError("auc: needs at least one positive and one negative (got " + std::to_string(num_pos) + " / " +
                      std::to_string(num_neg) + ")");
  }

  std::vector<int> order(scored.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](int a, int b) { return scored[a].score < scored[b].score; });

  // Rank-sum in integer half-units: a tie group spanning 1-based ranks
  // [lo, hi] assigns each member 2*rank = lo + hi. Keeps the fast path
  // bit-identical to brute-force pair counting.
  long long rank2_pos_sum = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j < order.size() && scored[order[j]].score == scored[order[i]].score) ++j;
    const long long rank2 = static_cast<long long>(i + 1) + static_cast<long long>(j);  // lo + hi
    for (std::size_t k = i; k < j; ++k) {
      if (scored[order[k]].positive) rank2_pos_sum += rank2;
    }
    i = j;
  }
  const long long numer = rank2_pos_sum - num_pos * (num_pos + 1);
  return static_cast<double>(numer) / (2.0 * static_cast<double>(num_pos) * static_cast<double>(num_neg));
}

Prf1 prf1(std::span<const ScoredPair> scored, double threshold) {
  if (scored.empty()) throw MetricError("prf1: empty input");
  long long tp = 0, fp = 0, fn = 0;
  for (const auto& s : scored) {
    const bool predicted = s.score >= threshold;
    if (predicted && s.positive) ++tp;
    if (predicted && !s.positive) ++fp;
    if (!predicted && s.positive) ++fn;
  }
  Prf1 out;
  if (tp + fp == 0) {
    out.precision = 1.0;
    out.no_predicted_positives = true;
  } else {
    out.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  out.recall = (tp + fn) == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  const double pr = out.precision + out.recall;
  out.f1 = pr == 0.0 ? 0.0 : 2.0 * out.precision * out.recall / pr;
  return out;
}

MetricsReport evaluate_relations(const ModelParams& params, const KnowledgeGraph& g_train,
                                 std::span<const Triple> eval_triples, int k_eval, std::uint64_t seed,
                                 std::vector<ScoredPair>* scored_out) {
  if (k_eval < 1) throw ValidationError("evaluate_relations: k_eval must be >= 1");

  MetricsReport report;
  std::vector<Triple> kept;
  kept.reserve(eval_triples.size());
  for (const Triple& t : eval_triples) {
    const bool known = t.head >= 0 && t.head < g_train.num_entities() && t.tail >= 0 &&
                       t.tail < g_train.num_entities() && t.relation >= 0 && t.relation < g_train.num_relations();
    if (known) {
      kept.push_back(t);
    } else {
      ++report.num_skipped;
    }
  }
  if (kept.empty()) throw MetricError("evaluate_relations: no usable eval triples");

  TripleSet filter = g_train.triple_set();
  for (const Triple& t : kept) filter.insert(t);

  const NormCoefficients norms = norm_coefficients(g_train);
  const NodeEmbeddings emb = encode(g_train, norms, params);
  const Matrix& h = emb.final_layer();

  std::vector<ScoredPair> scored;
  scored.reserve(kept.size() * static_cast<std::size_t>(1 + k_eval));
  for (const Triple& t : kept) {
    scored.push_back({t, score_relation(h.row(t.head), h.row(t.tail), t.relation, params), true});
  }

  // Negatives ask "does a different relation hold between this pair?":
  // the relation slot is corrupted, falling back to corrupting an entity
  // slot when the graph has a single relation.
  Rng rng(seed);
  const auto num_entities = static_cast<std::uint64_t>(g_train.num_entities());
  const auto num_relations = static_cast<std::uint64_t>(g_train.num_relations());
  for (const Triple& t : kept) {
    for (int j = 0; j < k_eval; ++j) {
      Triple candidate = t;
      for (int attempt = 0; attempt < kMaxEvalSampleAttempts; ++attempt) {
        candidate = t;
        if (num_relations > 1) {
          const auto shift = 1 + rng.next_below(num_relations - 1);
          candidate.relation = static_cast<RelationId>((t.relation + shift) % num_relations);
        } else if (rng.next_bool()) {
          candidate.head = static_cast<EntityId>(rng.next_below(num_entities));
        } else {
          candidate.tail = static_cast<EntityId>(rng.next_below(num_entities));
        }
        if (!filter.contains(candidate)) break;
      }
      scored.push_back({candidate,
                        score_relation(h.row(candidate.head), h.row(candidate.tail), candidate.relation, params),
                        false});
    }
  }

  if (scored_out != nullptr) *scored_out = scored;

  report.auc = auc(scored);
  report.threshold = 0.5;
  const Prf1 p = prf1(scored, report.threshold);
  report.precision = p.precision;
  report.recall = p.recall;
  report.f1 = p.f1;
  report.no_positive_predictions = p.no_predicted_positives;
  report.num_pos = static_cast<int>(kept.size());
  report.num_neg = static_cast<int>(kept.size()) * k_eval;
  return report;
}

EntityMetrics evaluate_entities(const ModelParams& params, const KnowledgeGraph& g, std::span<const int> labels,
                                std::span<const std::uint8_t> eval_mask) {
  if (labels.size() != eval_mask.size() || static_cast<int>(labels.size()) != g.num_entities()) {
    throw ValidationError("evaluate_entities: labels/mask size mismatch");
  }
  const int num_classes = params.num_classes();
  if (num_classes < 1) throw MetricError("evaluate_entities: model has no classifier");

  const NormCoefficients norms = norm_coefficients(g);
  const NodeEmbeddings emb = encode(g, norms, params);
  const Matrix probs = classify(emb.final_layer(), params);

  long long correct = 0, total = 0;
  std::vector<long long> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  std::vector<bool> present(num_classes, false);

  for (int i = 0; i < g.num_entities(); ++i) {
    if (!eval_mask[i]) continue;
    const int y = labels[i];
    if (y < 0 || y >= num_classes) {
      throw ValidationError("evaluate_entities: label " + std::to_string(y) + " at entity " + std::to_string(i) +
                            " out of range [0, " + std::to_string(num_classes) + ")");
    }
    int pred = 0;
    for (int c = 1; c < num_classes; ++c) {
      if (probs(i, c) > probs(i, pred)) pred = c;
    }
    present[y] = true;
    ++total;
    if (pred == y) {
      ++correct;
      ++tp[y];
    } else {
      ++fn[y];
      ++fp[pred];
    }
  }
  if (total == 0) throw MetricError("evaluate_entities: empty eval mask");

  EntityMetrics m;
  m.accuracy = static_cast<double>(correct) / static_cast<double>(total);
  double f1_sum = 0.0;
  int f1_count = 0;
  for (int c = 0; c < num_classes; ++c) {
    if (!present[c]) continue;
    const double prec = (tp[c] + fp[c]) == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fp[c]);
    const double rec = (tp[c] + fn[c]) == 0 ? 0.0 : static_cast<double>(tp[c]) / static_cast<double>(tp[c] + fn[c]);
    f1_sum += (prec + rec) == 0.0 ? 0.0 : 2.0 * prec * rec / (prec + rec);
    ++f1_count;
  }
  m.macro_f1 = f1_sum / static_cast<double>(f1_count);
  return m;
}

std::string to_kv_block(const MetricsReport& r) {
  std::ostringstream os;
  os << "auc=" << fmt_double(r.auc) << '\n';
  os << "precision=" << fmt_double(r.precision) << '\n';
  os << "recall=" << fmt_double(r.recall) << '\n';
  os << "f1=" << fmt_double(r.f1) << '\n';
  os << "threshold=" << fmt_double(r.threshold) << '\n';
  os << "num_pos=" << r.num_pos << '\n';
  os << "num_neg=" << r.num_neg << '\n';
  os << "num_skipped=" << r.num_skipped << '\n';
  os << "no_positive_predictions=" << (r.no_positive_predictions ? 1 : 0) << '\n';
  if (r.entity_accuracy) os << "entity_accuracy=" << fmt_double(*r.entity_accuracy) << '\n';
  if (r.entity_macro_f1) os << "entity_macro_f1=" << fmt_double(*r.entity_macro_f1) << '\n';
  return os.str();
}

std::string to_csv_row(const MetricsReport& r) {
  std::ostringstream os;
  os << fmt_double(r.auc) << ',' << fmt_double(r.precision) << ',' << fmt_double(r.recall) << ',' << fmt_double(r.f1)
     << ',' << fmt_double(r.threshold) << ',' << r.num_pos << ',' << r.num_neg;
  return os.str();
}

}  // namespace kgr
