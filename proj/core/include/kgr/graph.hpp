#pragma once

#include <cstdint>
#include <span>
#include <unordered_set>
#include <vector>

namespace kgr {

using EntityId = std::int32_t;
using RelationId = std::int32_t;

struct Triple {
  EntityId head;
  RelationId relation;
  EntityId tail;

  friend bool operator==(const Triple&, const Triple&) = default;
  friend auto operator<=>(const Triple&, const Triple&) = default;
};

struct TripleHash {
  std::size_t operator()(const Triple& t) const {
    // splitmix-style mix of the three ids
    std::uint64_t h = static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.head));
    h = (h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.relation)) << 21)) * 0xbf58476d1ce4e5b9ULL;
    h = (h ^ (static_cast<std::uint64_t>(static_cast<std::uint32_t>(t.tail)) << 7)) * 0x94d049bb133111ebULL;
    return static_cast<std::size_t>(h ^ (h >> 31));
  }
};

using TripleSet = std::unordered_set<Triple, TripleHash>;

enum class Direction : std::uint8_t { Out, In };

struct NeighborEntry {
  EntityId neighbor;
  RelationId relation;
  Direction direction;

  friend bool operator==(const NeighborEntry&, const NeighborEntry&) = default;
};

/// Immutable knowledge-graph store: deduplicated triples, per-entity
/// neighbor lists over both edge directions, degrees and optional class
/// labels. Safe for concurrent reads once built.
class KnowledgeGraph {
public:
  /// Builds the store from a (possibly duplicated, arbitrarily ordered)
  /// triple list. Neighbor lists are sorted by (neighbor, relation,
  /// direction) so identical inputs yield identical graphs.
  /// `labels` is either empty or one class id per entity, -1 = unlabeled.
  static KnowledgeGraph build(std::span<const Triple> triples, int num_entities, int num_relations,
                              std::vector<int> labels = {}, int num_classes = 0);

  int num_entities() const { return num_entities_; }
  int num_relations() const { return num_relations_; }
  int num_classes() const { return num_classes_; }

  const std::vector<Triple>& triples() const { return triples_; }
  std::span<const NeighborEntry> neighbors(EntityId i) const { return neighbors_[i]; }
  int degree(EntityId i) const { return static_cast<int>(neighbors_[i].size()); }

  bool contains(const Triple& t) const { return triple_set_.contains(t); }
  const TripleSet& triple_set() const { return triple_set_; }

  bool has_labels() const { return !labels_.empty(); }
  const std::vector<int>& labels() const { return labels_; }

private:
  int num_entities_ = 0;
  int num_relations_ = 0;
  int num_classes_ = 0;
  std::vector<Triple> triples_;
  std::vector<std::vector<NeighborEntry>> neighbors_;
  std::vector<int> labels_;
  TripleSet triple_set_;
};

/// Per-edge normalization coefficients c_ij = sqrt((deg_i + 1)(deg_j + 1)),
/// aligned entry-for-entry with the graph's neighbor lists.
struct NormCoefficients {
  std::vector<std::vector<double>> coeff;
};

NormCoefficients norm_coefficients(const KnowledgeGraph& g);

}  // namespace kgr
