#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>

#include "kgr/errors.hpp"
#include "kgr/eval.hpp"
#include "kgr/io.hpp"
#include "kgr/train.hpp"

namespace fs = std::filesystem;

namespace kgr::cli {

namespace {

struct ConfigFlags {
  TrainConfig config;
  std::string decoder = "full";
  std::string optimizer = "adam";
  bool no_entity_loss = false;

  void attach(CLI::App* cmd) {
    cmd->add_option("--layers", config.num_layers, "graph-convolution layers");
    cmd->add_option("--dim", config.hidden_dim, "embedding and hidden dimension");
    cmd->add_option("--epochs", config.num_epochs, "training epochs");
    cmd->add_option("--lr", config.learning_rate, "learning rate");
    cmd->add_option("--lambda", config.lambda, "negative-term weight");
    cmd->add_option("--alpha", config.alpha, "entity-term weight");
    cmd->add_option("--negatives", config.negatives_per_positive, "negatives per positive");
    cmd->add_option("--seed", config.seed, "master random seed");
    cmd->add_option("--decoder", decoder, "decoder form: full|diag")->check(CLI::IsMember({"full", "diag"}));
    cmd->add_flag("--relational", config.relational_weights, "per-relation layer weights");
    cmd->add_option("--optimizer", optimizer, "adam|sgd")->check(CLI::IsMember({"adam", "sgd"}));
    cmd->add_option("--beta1", config.adam_beta1, "adam beta1");
    cmd->add_option("--beta2", config.adam_beta2, "adam beta2");
    cmd->add_option("--eps", config.adam_eps, "adam epsilon");
    cmd->add_flag("--no-entity-loss", no_entity_loss, "train the relation objective only");
    cmd->add_option("--eval-every", config.eval_every, "validation metrics every N epochs");
  }

  TrainConfig resolve() {
    config.decoder_form = decoder == "diag" ? DecoderForm::Diagonal : DecoderForm::Full;
    config.optimizer = optimizer == "sgd" ? OptimizerKind::Sgd : OptimizerKind::Adam;
    config.entity_loss_enabled = !no_entity_loss;
    config.validate();
    return config;
  }
};

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void require_readable(const std::string& path) {
  if (!fs::exists(path)) throw ValidationError("file does not exist: " + path);
}

int levenshtein(const std::string& a, const std::string& b) {
  std::vector<int> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = static_cast<int>(j);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = static_cast<int>(i);
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const int sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

std::string nearest_names(const std::string& query, const Vocab& vocab, int count) {
  std::vector<std::pair<int, int>> scored;  // (distance, id)
  scored.reserve(vocab.size());
  for (int i = 0; i < vocab.size(); ++i) scored.emplace_back(levenshtein(query, vocab.name(i)), i);
  std::sort(scored.begin(), scored.end());
  std::string out;
  for (int i = 0; i < std::min<int>(count, static_cast<int>(scored.size())); ++i) {
    if (!out.empty()) out += ", ";
    out += vocab.name(scored[i].second);
  }
  return out;
}

struct LoadedModel {
  ModelArtifact artifact;
  KnowledgeGraph graph;
};

LoadedModel load_model_with_graph(const std::string& model_path, const std::string& train_path) {
  require_readable(model_path);
  require_readable(train_path);
  LoadedModel lm{load_model(model_path), {}};
  const auto train_triples =
      load_triples_fixed_vocab(train_path, lm.artifact.entity_vocab, lm.artifact.relation_vocab);
  if (train_triples.empty()) throw ValidationError("training triple file is empty: " + train_path);
  lm.graph = KnowledgeGraph::build(train_triples, lm.artifact.entity_vocab.size(),
                                   lm.artifact.relation_vocab.size());
  return lm;
}

int cmd_train(const std::string& train_path, const std::optional<std::string>& valid_path,
              const std::optional<std::string>& labels_path, const std::string& out_path,
              const std::optional<std::string>& history_path, ConfigFlags& flags, std::ostream& out) {
  require_readable(train_path);
  if (valid_path) require_readable(*valid_path);
  if (labels_path) require_readable(*labels_path);
  const TrainConfig config = flags.resolve();

  const Dataset ds = load_dataset(train_path,
                                  valid_path ? std::optional<fs::path>(*valid_path) : std::nullopt,
                                  std::nullopt,
                                  labels_path ? std::optional<fs::path>(*labels_path) : std::nullopt);

  const TrainResult result = train(ds.graph, config, ds.valid_triples);

  ModelArtifact artifact{config, ds.entity_vocab, ds.relation_vocab, ds.class_vocab, result.params};
  save_model(artifact, out_path);
  out << "model written to " << out_path << " (" << ds.entity_vocab.size() << " entities, "
      << ds.relation_vocab.size() << " relations, " << ds.graph.triples().size() << " train triples)\n";

  if (history_path) {
    std::ofstream hist(*history_path, std::ios::binary);
    if (!hist) throw ValidationError("cannot write file: " + *history_path);
    hist << "epoch,relation_pos,relation_neg,entity,total\n";
    for (std::size_t e = 0; e < result.history.epochs.size(); ++e) {
      const LossBreakdown& lb = result.history.epochs[e];
      hist << e << ',' << fmt(lb.relation_pos) << ',' << fmt(lb.relation_neg) << ',' << fmt(lb.entity) << ','
           << fmt(lb.total) << '\n';
    }
  }

  if (!result.history.epochs.empty()) {
    const LossBreakdown& last = result.history.epochs.back();
    out << "final_loss=" << fmt(last.total) << '\n';
  }
  if (valid_path && !ds.valid_triples.empty()) {
    MetricsReport report = evaluate_relations(result.params, ds.graph, ds.valid_triples, 1, config.seed);
    if (config.entity_loss_enabled && ds.graph.has_labels()) {
      std::vector<std::uint8_t> mask(ds.labels.size());
      for (std::size_t i = 0; i < ds.labels.size(); ++i) mask[i] = ds.labels[i] >= 0 ? 1 : 0;
      const EntityMetrics em = evaluate_entities(result.params, ds.graph, ds.labels, mask);
      report.entity_accuracy = em.accuracy;
      report.entity_macro_f1 = em.macro_f1;
    }
    out << to_kv_block(report);
  }
  return kExitOk;
}

int cmd_eval(const std::string& model_path, const std::string& train_path, const std::string& triples_path,
             const std::optional<std::string>& labels_path, const std::optional<std::string>& csv_path, int k_eval,
             std::uint64_t seed, bool dump_scores, std::ostream& out) {
  require_readable(triples_path);
  if (labels_path) require_readable(*labels_path);
  const LoadedModel lm = load_model_with_graph(model_path, train_path);

  int skipped_names = 0;
  const auto eval_triples =
      load_triples_skipping(triples_path, lm.artifact.entity_vocab, lm.artifact.relation_vocab, &skipped_names);
  if (eval_triples.empty()) {
    throw MetricError("no usable eval triples in " + triples_path +
                      (skipped_names > 0 ? " (" + std::to_string(skipped_names) + " lines skipped: vocabulary mismatch)"
                                         : " (file is empty)"));
  }

  std::vector<ScoredPair> scored;
  MetricsReport report = evaluate_relations(lm.artifact.params, lm.graph, eval_triples, k_eval, seed,
                                            dump_scores ? &scored : nullptr);
  report.num_skipped += skipped_names;

  if (labels_path && lm.artifact.params.num_classes() > 0) {
    Vocab classes = lm.artifact.class_vocab;
    const auto labels = load_labels(*labels_path, lm.artifact.entity_vocab, classes);
    if (classes.size() > lm.artifact.class_vocab.size()) {
      throw ValidationError("label file introduces classes unknown to the model: " + *labels_path);
    }
    std::vector<std::uint8_t> mask(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) mask[i] = labels[i] >= 0 ? 1 : 0;
    const EntityMetrics em = evaluate_entities(lm.artifact.params, lm.graph, labels, mask);
    report.entity_accuracy = em.accuracy;
    report.entity_macro_f1 = em.macro_f1;
  }

  out << to_kv_block(report);
  if (dump_scores) {
    for (const ScoredPair& s : scored) {
      out << "score\t" << (s.positive ? "pos" : "neg") << '\t' << lm.artifact.entity_vocab.name(s.triple.head) << '\t'
          << lm.artifact.relation_vocab.name(s.triple.relation) << '\t' << lm.artifact.entity_vocab.name(s.triple.tail)
          << '\t' << fmt(s.score) << '\n';
    }
  }
  if (csv_path) {
    const bool fresh = !fs::exists(*csv_path) || fs::file_size(*csv_path) == 0;
    std::ofstream csv(*csv_path, std::ios::binary | std::ios::app);
    if (!csv) throw ValidationError("cannot write file: " + *csv_path);
    if (fresh) csv << kMetricsCsvHeader << '\n';
    csv << to_csv_row(report) << '\n';
  }
  return kExitOk;
}

int cmd_predict(const std::string& model_path, const std::string& train_path, const std::string& head,
                const std::string& relation, int k, std::ostream& out) {
  const LoadedModel lm = load_model_with_graph(model_path, train_path);

  const auto head_id = lm.artifact.entity_vocab.find(head);
  if (!head_id) {
    throw ValidationError("unknown entity '" + head +
                          "'; nearest: " + nearest_names(head, lm.artifact.entity_vocab, 3));
  }
  const auto rel_id = lm.artifact.relation_vocab.find(relation);
  if (!rel_id) {
    throw ValidationError("unknown relation '" + relation +
                          "'; nearest: " + nearest_names(relation, lm.artifact.relation_vocab, 3));
  }

  const NormCoefficients norms = norm_coefficients(lm.graph);
  const NodeEmbeddings emb = encode(lm.graph, norms, lm.artifact.params);
  const Matrix& h = emb.final_layer();

  std::vector<std::pair<double, EntityId>> ranked;
  ranked.reserve(lm.graph.num_entities());
  for (EntityId t = 0; t < lm.graph.num_entities(); ++t) {
    ranked.emplace_back(score_relation(h.row(*head_id), h.row(t), *rel_id, lm.artifact.params), t);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;  // ties broken by entity id
  });

  const int limit = std::min<int>(k, static_cast<int>(ranked.size()));
  for (int i = 0; i < limit; ++i) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.6f", ranked[i].first);
    out << lm.artifact.entity_vocab.name(ranked[i].second) << '\t' << buf << '\n';
  }
  return kExitOk;
}

int cmd_gradcheck(std::optional<int> dim, std::optional<int> layers, std::uint64_t seed, std::ostream& out) {
  const auto sweep = grad_check_sweep(seed, dim, layers);

  struct Agg {
    double max_err = 0.0;
    std::string worst;
  };
  std::vector<std::pair<std::string, Agg>> per_topology;
  for (const auto& entry : sweep) {
    auto it = std::find_if(per_topology.begin(), per_topology.end(),
                           [&](const auto& p) { return p.first == entry.topology; });
    if (it == per_topology.end()) {
      per_topology.emplace_back(entry.topology, Agg{});
      it = std::prev(per_topology.end());
    }
    if (entry.report.max_rel_err >= it->second.max_err) {
      it->second.max_err = entry.report.max_rel_err;
      it->second.worst = entry.report.worst_parameter;
    }
  }

  bool ok = true;
  for (const auto& [name, agg] : per_topology) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3e", agg.max_err);
    out << "topology=" << name << " max_rel_err=" << buf << " worst=" << agg.worst << '\n';
    if (!(agg.max_err < 1e-4)) ok = false;
  }
  return ok ? kExitOk : kExitGradCheck;
}

int cmd_synth(const std::string& out_dir, int entities, int relations, int classes, std::uint64_t seed,
              std::ostream& out) {
  const Dataset ds = synth(entities, relations, classes, seed);
  write_dataset_files(ds, out_dir);
  out << "wrote " << ds.train_triples.size() << "/" << ds.valid_triples.size() << "/" << ds.test_triples.size()
      << " train/valid/test triples and " << ds.entity_vocab.size() << " labels to " << out_dir << '\n';
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"knowledge-graph reasoning: GCN encoder, bilinear relation decoder, entity classifier"};
  app.require_subcommand(1);

  // train
  auto* train_cmd = app.add_subcommand("train", "train a model on a triple file");
  std::string train_path, out_path;
  std::optional<std::string> valid_path, labels_path, history_path;
  ConfigFlags train_flags;
  train_cmd->add_option("--train", train_path, "training triples (TSV)")->required();
  train_cmd->add_option("--valid", valid_path, "validation triples (TSV)");
  train_cmd->add_option("--labels", labels_path, "entity labels (TSV)");
  train_cmd->add_option("--out", out_path, "output model artifact")->required();
  train_cmd->add_option("--history", history_path, "per-epoch loss CSV");
  train_flags.attach(train_cmd);

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a model on a triple file");
  std::string eval_model, eval_train, eval_triples;
  std::optional<std::string> eval_labels, eval_csv;
  int k_eval = 1;
  std::uint64_t eval_seed = 42;
  bool dump_scores = false;
  eval_cmd->add_option("--model", eval_model, "model artifact")->required();
  eval_cmd->add_option("--train", eval_train, "training triples used to build the graph")->required();
  eval_cmd->add_option("--triples", eval_triples, "triples to evaluate (TSV)")->required();
  eval_cmd->add_option("--labels", eval_labels, "entity labels for classification metrics");
  eval_cmd->add_option("--csv", eval_csv, "append one metrics row to this CSV");
  eval_cmd->add_option("--k-eval", k_eval, "negatives per eval triple");
  eval_cmd->add_option("--seed", eval_seed, "negative-sampling seed");
  eval_cmd->add_flag("--dump-scores", dump_scores, "print every scored pair");

  // predict
  auto* predict_cmd = app.add_subcommand("predict", "rank tail entities for (head, relation, ?)");
  std::string pred_model, pred_train, pred_head, pred_relation;
  int pred_k = 10;
  predict_cmd->add_option("--model", pred_model, "model artifact")->required();
  predict_cmd->add_option("--train", pred_train, "training triples used to build the graph")->required();
  predict_cmd->add_option("--head", pred_head, "head entity name")->required();
  predict_cmd->add_option("--relation", pred_relation, "relation name")->required();
  predict_cmd->add_option("--k", pred_k, "number of tails to print");

  // gradcheck
  auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  std::optional<int> gc_dim, gc_layers;
  std::uint64_t gc_seed = 42;
  gc_cmd->add_option("--dim", gc_dim, "restrict to one hidden dimension");
  gc_cmd->add_option("--layers", gc_layers, "restrict to one layer count");
  gc_cmd->add_option("--seed", gc_seed, "base seed");

  // synth
  auto* synth_cmd = app.add_subcommand("synth", "generate a planted-structure dataset");
  std::string synth_out;
  int synth_entities = 200, synth_relations = 3, synth_classes = 4;
  std::uint64_t synth_seed = 42;
  synth_cmd->add_option("--out", synth_out, "output directory")->required();
  synth_cmd->add_option("--entities", synth_entities, "number of entities");
  synth_cmd->add_option("--relations", synth_relations, "number of relations");
  synth_cmd->add_option("--classes", synth_classes, "number of classes");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }

  try {
    if (train_cmd->parsed()) {
      return cmd_train(train_path, valid_path, labels_path, out_path, history_path, train_flags, out);
    }
    if (eval_cmd->parsed()) {
      return cmd_eval(eval_model, eval_train, eval_triples, eval_labels, eval_csv, k_eval, eval_seed, dump_scores,
                      out);
    }
    if (predict_cmd->parsed()) {
      return cmd_predict(pred_model, pred_train, pred_head, pred_relation, pred_k, out);
    }
    if (gc_cmd->parsed()) {
      return cmd_gradcheck(gc_dim, gc_layers, gc_seed, out);
    }
    if (synth_cmd->parsed()) {
      return cmd_synth(synth_out, synth_entities, synth_relations, synth_classes, synth_seed, out);
    }
  } catch (const NonFiniteError& e) {
    err << "error: " << e.what() << '\n';
    return kExitNonFinite;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace kgr::cli
