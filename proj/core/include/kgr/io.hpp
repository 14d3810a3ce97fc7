#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "kgr/graph.hpp"
#include "kgr/model.hpp"
#include "kgr/train.hpp"

namespace kgr {

/// Name <-> dense id map; ids assigned in first-seen order, so interning the
/// same files in the same order always produces the same assignment.
class Vocab {
public:
  int intern(std::string_view name);
  std::optional<int> find(std::string_view name) const;
  const std::string& name(int id) const { return names_[id]; }
  int size() const { return static_cast<int>(names_.size()); }
  const std::vector<std::string>& names() const { return names_; }

private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> index_;
};

struct Dataset {
  KnowledgeGraph graph;  // built from the train triples over the full vocab
  std::vector<Triple> train_triples;
  std::vector<Triple> valid_triples;
  std::vector<Triple> test_triples;
  Vocab entity_vocab;
  Vocab relation_vocab;
  Vocab class_vocab;
  std::vector<int> labels;  // per entity, -1 unlabeled; empty when no labels
};

/// Parses lines of `head<TAB>relation<TAB>tail`, interning names into the
/// vocabs. Empty lines are skipped; a wrong field count raises a parse error
/// with the line number. An empty file yields an empty list.
std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities, Vocab& relations);

/// Same format, but names must already exist in the vocabs; unknown names
/// raise a parse error with the line number.
std::vector<Triple> load_triples_fixed_vocab(const std::filesystem::path& path, const Vocab& entities,
                                             const Vocab& relations);

/// Like load_triples_fixed_vocab, but lines with unknown names are skipped
/// and counted instead of raising.
std::vector<Triple> load_triples_skipping(const std::filesystem::path& path, const Vocab& entities,
                                          const Vocab& relations, int* num_skipped);

/// Parses lines of `entity<TAB>class`. Unknown entities raise a parse error
/// with the line number. Returns one class id per vocab entity, -1 where
/// unlabeled.
std::vector<int> load_labels(const std::filesystem::path& path, const Vocab& entities, Vocab& classes);

/// Loads train/valid/test splits plus optional labels and assembles the
/// graph over the union vocabulary.
Dataset load_dataset(const std::filesystem::path& train, const std::optional<std::filesystem::path>& valid,
                     const std::optional<std::filesystem::path>& test,
                     const std::optional<std::filesystem::path>& labels);

/// The class-pair rule of each relation in a synthetic dataset, derived
/// deterministically from the seed.
std::vector<std::pair<int, int>> synth_rules(int num_relations, int num_classes, std::uint64_t seed);

/// Planted-structure generator: entities are assigned classes round-robin,
/// each relation links the shared source class to its own target class, and
/// unique rule-consistent triples are sampled at 5 per entity (every entity
/// draws its own edge budget), split 80/10/10. Labels are the planted
/// classes, so both the relation and the entity task are learnable by
/// construction.
Dataset synth(int num_entities, int num_relations, int num_classes, std::uint64_t seed);

/// Writes train.tsv / valid.tsv / test.tsv / labels.tsv under dir.
void write_dataset_files(const Dataset& ds, const std::filesystem::path& dir);

inline constexpr const char* kArtifactVersion = "KGR1";

struct ModelArtifact {
  TrainConfig config;
  Vocab entity_vocab;
  Vocab relation_vocab;
  Vocab class_vocab;
  ModelParams params;
};

/// Self-describing container: a text header (version, config, vocabs, tensor
/// directory, payload checksum) followed by raw little-endian doubles.
/// Round-trips bit-exactly.
void save_model(const ModelArtifact& artifact, const std::filesystem::path& path);
ModelArtifact load_model(const std::filesystem::path& path);

}  // namespace kgr
