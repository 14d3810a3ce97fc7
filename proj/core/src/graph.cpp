#include "kgr/graph.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kgr/errors.hpp"

namespace kgr {

KnowledgeGraph KnowledgeGraph::build(std::span<const Triple> triples, int num_entities, int num_relations,
                                     std::vector<int> labels, int num_classes) {
  if (num_entities <= 0) throw ValidationError("build: num_entities must be positive");
  if (num_relations <= 0) throw ValidationError("build: num_relations must be positive");

  for (std::size_t i = 0; i < triples.size(); ++i) {
    const Triple& t = triples[i];
    if (t.head < 0 || t.head >= num_entities || t.tail < 0 || t.tail >= num_entities) {
      throw ValidationError("triple " + std::to_string(i) + ": entity id out of range [0, " +
                            std::to_string(num_entities) + "): (" + std::to_string(t.head) + ", " +
                            std::to_string(t.relation) + ", " + std::to_string(t.tail) + ")");
    }
    if (t.relation < 0 || t.relation >= num_relations) {
      throw ValidationError("triple " + std::to_string(i) + ": relation id out of range [0, " +
                            std::to_string(num_relations) + "): (" + std::to_string(t.head) + ", " +
                            std::to_string(t.relation) + ", " + std::to_string(t.tail) + ")");
    }
  }

  if (!labels.empty()) {
    if (static_cast<int>(labels.size()) != num_entities) {
      throw ValidationError("build: labels size " + std::to_string(labels.size()) + " != num_entities " +
                            std::to_string(num_entities));
    }
    for (int i = 0; i < num_entities; ++i) {
      if (labels[i] < -1 || labels[i] >= num_classes) {
        throw ValidationError("build: label " + std::to_string(labels[i]) + " for entity " + std::to_string(i) +
                              " out of range [0, " + std::to_string(num_classes) + ")");
      }
    }
  }

  KnowledgeGraph g;
  g.num_entities_ = num_entities;
  g.num_relations_ = num_relations;
  g.num_classes_ = labels.empty() ? 0 : num_classes;
  g.labels_ = std::move(labels);

  g.triples_.assign(triples.begin(), triples.end());
  std::sort(g.triples_.begin(), g.triples_.end());
  g.triples_.erase(std::unique(g.triples_.begin(), g.triples_.end()), g.triples_.end());

  g.triple_set_.reserve(g.triples_.size() * 2);
  for (const Triple& t : g.triples_) g.triple_set_.insert(t);

  g.neighbors_.resize(num_entities);
  for (const Triple& t : g.triples_) {
    g.neighbors_[t.head].push_back({t.tail, t.relation, Direction::Out});
    g.neighbors_[t.tail].push_back({t.head, t.relation, Direction::In});
  }
  for (auto& list : g.neighbors_) {
    std::sort(list.begin(), list.end(), [](const NeighborEntry& a, const NeighborEntry& b) {
      if (a.neighbor != b.neighbor) return a.neighbor < b.neighbor;
      if (a.relation != b.relation) return a.relation < b.relation;
      return a.direction < b.direction;
    });
  }
  return g;
}

NormCoefficients norm_coefficients(const KnowledgeGraph& g) {
  NormCoefficients norms;
  norms.coeff.resize(g.num_entities());
  for (EntityId i = 0; i < g.num_entities(); ++i) {
    const double di = static_cast<double>(g.degree(i)) + 1.0;
    auto entries = g.neighbors(i);
    auto& out = norms.coeff[i];
    out.reserve(entries.size());
    for (const NeighborEntry& e : entries) {
      const double dj = static_cast<double>(g.degree(e.neighbor)) + 1.0;
      out.push_back(std::sqrt(di * dj));
    }
  }
  return norms;
}

}  // namespace kgr
