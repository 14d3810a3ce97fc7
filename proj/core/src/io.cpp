#include "kgr/io.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "kgr/errors.hpp"
#include "kgr/rng.hpp"

static_assert(std::endian::native == std::endian::little, "artifact payload assumes a little-endian host");

namespace kgr {

namespace {

std::uint64_t fnv1a64(const unsigned char* data, std::size_t n) {
  std::uint64_t h = 1469598103934665603ULL;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= data[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fmt_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  for (;;) {
    const std::size_t pos = line.find('\t', start);
    if (pos == std::string::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string strip_cr(std::string line) {
  if (!line.empty() && line.back() == '\r') line.pop_back();
  return line;
}

std::ifstream open_text(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open file: " + path.string());
  return in;
}

const char* decoder_form_name(DecoderForm f) { return f == DecoderForm::Full ? "full" : "diag"; }
const char* optimizer_name(OptimizerKind o) { return o == OptimizerKind::Adam ? "adam" : "sgd"; }

}  // namespace

int Vocab::intern(std::string_view name) {
  const auto it = index_.find(std::string(name));
  if (it != index_.end()) return it->second;
  const int id = static_cast<int>(names_.size());
  names_.emplace_back(name);
  index_.emplace(names_.back(), id);
  return id;
}

std::optional<int> Vocab::find(std::string_view name) const {
  const auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<Triple> load_triples(const std::filesystem::path& path, Vocab& entities, Vocab& relations) {
  std::ifstream in = open_text(path);
  std::vector<Triple> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    out.push_back({static_cast<EntityId>(entities.intern(fields[0])),
                   static_cast<RelationId>(relations.intern(fields[1])),
                   static_cast<EntityId>(entities.intern(fields[2]))});
  }
  return out;
}

std::vector<Triple> load_triples_fixed_vocab(const std::filesystem::path& path, const Vocab& entities,
                                             const Vocab& relations) {
  std::ifstream in = open_text(path);
  std::vector<Triple> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    const auto h = entities.find(fields[0]);
    const auto r = relations.find(fields[1]);
    const auto t = entities.find(fields[2]);
    if (!h || !r || !t) {
      const std::string& missing = !h ? fields[0] : (!r ? fields[1] : fields[2]);
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": name not in model vocabulary: '" +
                            missing + "'");
    }
    out.push_back({static_cast<EntityId>(*h), static_cast<RelationId>(*r), static_cast<EntityId>(*t)});
  }
  return out;
}

std::vector<Triple> load_triples_skipping(const std::filesystem::path& path, const Vocab& entities,
                                          const Vocab& relations, int* num_skipped) {
  std::ifstream in = open_text(path);
  std::vector<Triple> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 3) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    const auto h = entities.find(fields[0]);
    const auto r = relations.find(fields[1]);
    const auto t = entities.find(fields[2]);
    if (!h || !r || !t) {
      if (num_skipped != nullptr) ++*num_skipped;
      continue;
    }
    out.push_back({static_cast<EntityId>(*h), static_cast<RelationId>(*r), static_cast<EntityId>(*t)});
  }
  return out;
}

std::vector<int> load_labels(const std::filesystem::path& path, const Vocab& entities, Vocab& classes) {
  std::ifstream in = open_text(path);
  std::vector<int> labels(entities.size(), -1);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = strip_cr(line);
    if (line.empty()) continue;
    const auto fields = split_tabs(line);
    if (fields.size() != 2) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": expected 2 tab-separated fields, got " +
                            std::to_string(fields.size()));
    }
    const auto entity = entities.find(fields[0]);
    if (!entity) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) + ": unknown entity '" + fields[0] + "'");
    }
    labels[*entity] = classes.intern(fields[1]);
  }
  return labels;
}

Dataset load_dataset(const std::filesystem::path& train, const std::optional<std::filesystem::path>& valid,
                     const std::optional<std::filesystem::path>& test,
                     const std::optional<std::filesystem::path>& labels) {
  Dataset ds;
  ds.train_triples = load_triples(train, ds.entity_vocab, ds.relation_vocab);
  if (valid) ds.valid_triples = load_triples(*valid, ds.entity_vocab, ds.relation_vocab);
  if (test) ds.test_triples = load_triples(*test, ds.entity_vocab, ds.relation_vocab);
  if (ds.entity_vocab.size() == 0 || ds.relation_vocab.size() == 0) {
    throw ValidationError("dataset is empty: " + train.string());
  }
  int num_classes = 0;
  if (labels) {
    ds.labels = load_labels(*labels, ds.entity_vocab, ds.class_vocab);
    num_classes = ds.class_vocab.size();
  }
  ds.graph = KnowledgeGraph::build(ds.train_triples, ds.entity_vocab.size(), ds.relation_vocab.size(), ds.labels,
                                   num_classes);
  return ds;
}

std::vector<std::pair<int, int>> synth_rules(int num_relations, int num_classes, std::uint64_t seed) {
  // one shared source class, shuffled distinct target classes: the tail's
  // class then identifies the relation, and every class takes part whenever
  // num_relations >= num_classes - 1
  std::vector<int> order(num_classes);
  for (int c = 0; c < num_classes; ++c) order[c] = c;
  Rng rng(derive_seed(seed, 0));
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.next_below(i)]);
  }
  std::vector<std::pair<int, int>> rules(num_relations);
  for (int r = 0; r < num_relations; ++r) {
    const int target = num_classes > 1 ? order[1 + (r % (num_classes - 1))] : order[0];
    rules[r] = {order[0], target};
  }
  return rules;
}

Dataset synth(int num_entities, int num_relations, int num_classes, std::uint64_t seed) {
  if (num_classes < 1 || num_relations < 1) {
    throw ValidationError("synth: num_relations and num_classes must be >= 1");
  }
  if (num_entities < 2 * num_classes) {
    throw ValidationError("synth: num_entities (" + std::to_string(num_entities) + ") must be >= 2 * num_classes (" +
                          std::to_string(2 * num_classes) + ")");
  }

  const auto rules = synth_rules(num_relations, num_classes, seed);
  std::vector<std::vector<EntityId>> members(num_classes);
  for (int i = 0; i < num_entities; ++i) members[i % num_classes].push_back(i);

  const std::size_t target = static_cast<std::size_t>(num_entities) * 5;
  std::size_t capacity = 0;
  for (const auto& [src, dst] : rules) capacity += members[src].size() * members[dst].size();
  if (capacity < target) {
    throw ValidationError("synth: rule space too small for the requested density");
  }

  Rng rng(derive_seed(seed, 1));
  TripleSet seen;
  std::vector<Triple> triples;
  triples.reserve(target);
  const auto add = [&](const Triple& t) {
    if (seen.insert(t).second) triples.push_back(t);
  };

  // per-entity pass: each entity draws its edge budget as an endpoint of an
  // applicable rule, so no participating class is left disconnected
  for (EntityId e = 0; e < num_entities; ++e) {
    const int c = e % num_classes;
    std::vector<std::pair<int, bool>> applicable;  // (relation, entity acts as source)
    for (int r = 0; r < num_relations; ++r) {
      if (rules[r].first == c) applicable.emplace_back(r, true);
      if (rules[r].second == c) applicable.emplace_back(r, false);
    }
    if (applicable.empty()) continue;
    for (int j = 0; j < 5 && triples.size() < target; ++j) {
      const auto [r, as_source] = applicable[rng.next_below(applicable.size())];
      const auto& partners = members[as_source ? rules[r].second : rules[r].first];
      const EntityId partner = partners[rng.next_below(partners.size())];
      add(as_source ? Triple{e, static_cast<RelationId>(r), partner}
                    : Triple{partner, static_cast<RelationId>(r), e});
    }
  }
  // top up duplicates-lost draws with uniform rule sampling
  while (triples.size() < target) {
    const int r = rng.next_int(num_relations);
    const auto& src = members[rules[r].first];
    const auto& dst = members[rules[r].second];
    add({src[rng.next_below(src.size())], static_cast<RelationId>(r), dst[rng.next_below(dst.size())]});
  }
  for (std::size_t i = triples.size(); i > 1; --i) {
    std::swap(triples[i - 1], triples[rng.next_below(i)]);
  }

  Dataset ds;
  for (int i = 0; i < num_entities; ++i) ds.entity_vocab.intern("e" + std::to_string(i));
  for (int r = 0; r < num_relations; ++r) ds.relation_vocab.intern("r" + std::to_string(r));
  for (int c = 0; c < num_classes; ++c) ds.class_vocab.intern("c" + std::to_string(c));
  ds.labels.resize(num_entities);
  for (int i = 0; i < num_entities; ++i) ds.labels[i] = i % num_classes;

  const std::size_t n_train = target * 8 / 10;
  const std::size_t n_valid = target / 10;
  ds.train_triples.assign(triples.begin(), triples.begin() + n_train);
  ds.valid_triples.assign(triples.begin() + n_train, triples.begin() + n_train + n_valid);
  ds.test_triples.assign(triples.begin() + n_train + n_valid, triples.end());
  ds.graph = KnowledgeGraph::build(ds.train_triples, num_entities, num_relations, ds.labels, num_classes);
  return ds;
}

void write_dataset_files(const Dataset& ds, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto write_triples = [&](const std::filesystem::path& path, const std::vector<Triple>& triples) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ValidationError("cannot write file: " + path.string());
    for (const Triple& t : triples) {
      out << ds.entity_vocab.name(t.head) << '\t' << ds.relation_vocab.name(t.relation) << '\t'
          << ds.entity_vocab.name(t.tail) << '\n';
    }
  };
  write_triples(dir / "train.tsv", ds.train_triples);
  write_triples(dir / "valid.tsv", ds.valid_triples);
  write_triples(dir / "test.tsv", ds.test_triples);

  std::ofstream labels(dir / "labels.tsv", std::ios::binary);
  if (!labels) throw ValidationError("cannot write file: " + (dir / "labels.tsv").string());
  for (int i = 0; i < ds.entity_vocab.size(); ++i) {
    if (i < static_cast<int>(ds.labels.size()) && ds.labels[i] >= 0) {
      labels << ds.entity_vocab.name(i) << '\t' << ds.class_vocab.name(ds.labels[i]) << '\n';
    }
  }
}

void save_model(const ModelArtifact& artifact, const std::filesystem::path& path) {
  const auto refs = param_refs(artifact.params);

  std::string payload;
  std::vector<std::size_t> offsets;
  offsets.reserve(refs.size());
  for (const auto& ref : refs) {
    offsets.push_back(payload.size());
    const auto vals = ref.tensor->values();
    payload.append(reinterpret_cast<const char*>(vals.data()), vals.size() * sizeof(double));
  }
  const std::uint64_t checksum = fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());

  std::ostringstream header;
  const TrainConfig& c = artifact.config;
  header << kArtifactVersion << '\n';
  header << "config layers " << c.num_layers << '\n';
  header << "config dim " << c.hidden_dim << '\n';
  header << "config epochs " << c.num_epochs << '\n';
  header << "config lr " << fmt_g17(c.learning_rate) << '\n';
  header << "config lambda " << fmt_g17(c.lambda) << '\n';
  header << "config alpha " << fmt_g17(c.alpha) << '\n';
  header << "config negatives " << c.negatives_per_positive << '\n';
  header << "config seed " << c.seed << '\n';
  header << "config decoder " << decoder_form_name(c.decoder_form) << '\n';
  header << "config relational " << (c.relational_weights ? 1 : 0) << '\n';
  header << "config optimizer " << optimizer_name(c.optimizer) << '\n';
  header << "config beta1 " << fmt_g17(c.adam_beta1) << '\n';
  header << "config beta2 " << fmt_g17(c.adam_beta2) << '\n';
  header << "config eps " << fmt_g17(c.adam_eps) << '\n';
  header << "config entity_loss " << (c.entity_loss_enabled ? 1 : 0) << '\n';
  header << "config eval_every " << c.eval_every << '\n';

  const auto write_vocab = [&header](const char* tag, const Vocab& v) {
    header << tag << ' ' << v.size() << '\n';
    for (const auto& name : v.names()) header << name << '\n';
  };
  write_vocab("entities", artifact.entity_vocab);
  write_vocab("relations", artifact.relation_vocab);
  write_vocab("classes", artifact.class_vocab);

  for (std::size_t i = 0; i < refs.size(); ++i) {
    header << "tensor " << refs[i].name << ' ' << refs[i].tensor->rows() << ' ' << refs[i].tensor->cols() << ' '
           << offsets[i] << '\n';
  }
  char checksum_hex[32];
  std::snprintf(checksum_hex, sizeof(checksum_hex), "%016llx", static_cast<unsigned long long>(checksum));
  header << "payload " << payload.size() << ' ' << checksum_hex << '\n';
  header << "END\n";

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write file: " + path.string());
  const std::string head = header.str();
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw ValidationError("write failed: " + path.string());
}

namespace {

std::string read_header_line(std::istream& in, const std::filesystem::path& path) {
  std::string line;
  if (!std::getline(in, line)) throw ArtifactError(path.string() + ": truncated header");
  return line;
}

struct TensorEntry {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
};

}  // namespace

ModelArtifact load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArtifactError("cannot open model artifact: " + path.string());

  const std::string version = read_header_line(in, path);
  if (version != kArtifactVersion) {
    throw ArtifactError(path.string() + ": unsupported artifact version '" + version + "', expected " +
                        kArtifactVersion);
  }

  ModelArtifact artifact;
  TrainConfig& c = artifact.config;
  std::vector<TensorEntry> tensors;
  std::size_t payload_size = 0;
  std::uint64_t expected_checksum = 0;
  bool saw_payload = false;

  for (;;) {
    const std::string line = read_header_line(in, path);
    if (line == "END") break;
    std::istringstream ls(line);
    std::string tag;
    ls >> tag;
    if (tag == "config") {
      std::string key, value;
      ls >> key >> value;
      if (key == "layers") c.num_layers = std::stoi(value);
      else if (key == "dim") c.hidden_dim = std::stoi(value);
      else if (key == "epochs") c.num_epochs = std::stoi(value);
      else if (key == "lr") c.learning_rate = std::stod(value);
      else if (key == "lambda") c.lambda = std::stod(value);
      else if (key == "alpha") c.alpha = std::stod(value);
      else if (key == "negatives") c.negatives_per_positive = std::stoi(value);
      else if (key == "seed") c.seed = std::stoull(value);
      else if (key == "decoder") c.decoder_form = value == "diag" ? DecoderForm::Diagonal : DecoderForm::Full;
      else if (key == "relational") c.relational_weights = value == "1";
      else if (key == "optimizer") c.optimizer = value == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
      else if (key == "beta1") c.adam_beta1 = std::stod(value);
      else if (key == "beta2") c.adam_beta2 = std::stod(value);
      else if (key == "eps") c.adam_eps = std::stod(value);
      else if (key == "entity_loss") c.entity_loss_enabled = value == "1";
      else if (key == "eval_every") c.eval_every = std::stoi(value);
      else throw ArtifactError(path.string() + ": unknown config key '" + key + "'");
    } else if (tag == "entities" || tag == "relations" || tag == "classes") {
      int count = 0;
      ls >> count;
      Vocab& v = tag == "entities" ? artifact.entity_vocab
                                   : (tag == "relations" ? artifact.relation_vocab : artifact.class_vocab);
      for (int i = 0; i < count; ++i) v.intern(read_header_line(in, path));
    } else if (tag == "tensor") {
      TensorEntry e;
      ls >> e.name >> e.rows >> e.cols >> e.offset;
      tensors.push_back(std::move(e));
    } else if (tag == "payload") {
      ls >> payload_size;
      std::string hex;
      ls >> hex;
      expected_checksum = std::stoull(hex, nullptr, 16);
      saw_payload = true;
    } else {
      throw ArtifactError(path.string() + ": unknown header tag '" + tag + "'");
    }
  }
  if (!saw_payload) throw ArtifactError(path.string() + ": header missing payload entry");

  std::string payload(payload_size, '\0');
  in.read(payload.data(), static_cast<std::streamsize>(payload_size));
  if (static_cast<std::size_t>(in.gcount()) != payload_size) {
    throw ArtifactError(path.string() + ": truncated payload (expected " + std::to_string(payload_size) + " bytes)");
  }
  const std::uint64_t checksum = fnv1a64(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
  if (checksum != expected_checksum) {
    throw ArtifactError(path.string() + ": payload checksum mismatch");
  }

  // rebuild the parameter skeleton, then compare against the directory
  ModelParams& p = artifact.params;
  p.decoder_form = c.decoder_form;
  p.embedding = Matrix(artifact.entity_vocab.size(), c.hidden_dim);
  p.layers.resize(c.num_layers);
  for (auto& layer : p.layers) {
    if (c.relational_weights) {
      layer.W_rel.assign(artifact.relation_vocab.size(), Matrix(c.hidden_dim, c.hidden_dim));
    } else {
      layer.W = Matrix(c.hidden_dim, c.hidden_dim);
    }
    layer.W0 = Matrix(c.hidden_dim, c.hidden_dim);
  }
  p.classifier_w = Matrix(c.hidden_dim, artifact.class_vocab.size());
  p.classifier_b = Matrix(1, artifact.class_vocab.size());
  const int decoder_rows = c.decoder_form == DecoderForm::Full ? c.hidden_dim : 1;
  p.decoder.assign(artifact.relation_vocab.size(), Matrix(decoder_rows, c.hidden_dim));

  const auto refs = param_refs(p);
  if (refs.size() != tensors.size()) {
    throw ArtifactError(path.string() + ": tensor directory lists " + std::to_string(tensors.size()) +
                        " tensors, expected " + std::to_string(refs.size()));
  }
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const TensorEntry& e = tensors[i];
    Matrix* m = refs[i].tensor;
    if (e.name != refs[i].name || e.rows != m->rows() || e.cols != m->cols()) {
      throw ArtifactError(path.string() + ": tensor shape mismatch for '" + e.name + "' (" + std::to_string(e.rows) +
                          "x" + std::to_string(e.cols) + ", expected " + refs[i].name + " " + m->shape_str() + ")");
    }
    const std::size_t bytes = m->size() * sizeof(double);
    if (e.offset + bytes > payload.size()) {
      throw ArtifactError(path.string() + ": tensor '" + e.name + "' overruns the payload");
    }
    std::memcpy(m->values().data(), payload.data() + e.offset, bytes);
  }
  return artifact;
}

}  // namespace kgr
