#include "kgr/model.hpp"

#include <cassert>
#include <cmath>
#include <string>

#include "kgr/errors.hpp"
#include "kgr/rng.hpp"

namespace kgr {

namespace {

void glorot_fill(Matrix& m, Rng& rng) {
  const double limit = std::sqrt(6.0 / (m.rows() + m.cols()));
  for (double& v : m.values()) v = rng.next_real(-limit, limit);
}

// Aggregates neighbor features scaled by 1/c_ij. When `relation` is >= 0
// only entries with that relation contribute.
Matrix aggregate_neighbors(const KnowledgeGraph& g, const NormCoefficients& norms, const Matrix& h,
                           RelationId relation) {
  Matrix agg(h.rows(), h.cols());
  for (EntityId i = 0; i < g.num_entities(); ++i) {
    auto entries = g.neighbors(i);
    const auto& coeff = norms.coeff[i];
    auto out = agg.row(i);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (relation >= 0 && entries[k].relation != relation) continue;
      const double inv_c = 1.0 / coeff[k];
      const auto nb = h.row(entries[k].neighbor);
      for (int j = 0; j < h.cols(); ++j) out[j] += inv_c * nb[j];
    }
  }
  return agg;
}

// Adjoint of aggregate_neighbors: scatters grad rows back to the neighbors.
void aggregate_neighbors_backward(const KnowledgeGraph& g, const NormCoefficients& norms, const Matrix& grad_agg,
                                  RelationId relation, Matrix& grad_h) {
  for (EntityId i = 0; i < g.num_entities(); ++i) {
    auto entries = g.neighbors(i);
    const auto& coeff = norms.coeff[i];
    const auto gi = grad_agg.row(i);
    for (std::size_t k = 0; k < entries.size(); ++k) {
      if (relation >= 0 && entries[k].relation != relation) continue;
      const double inv_c = 1.0 / coeff[k];
      auto out = grad_h.row(entries[k].neighbor);
      for (int j = 0; j < grad_agg.cols(); ++j) out[j] += inv_c * gi[j];
    }
  }
}

void check_layer_dims(const GcnLayer& layer, int in_dim, int layer_index) {
  const Matrix& w = layer.relational() ? layer.W_rel.front() : layer.W;
  if (w.rows() != in_dim || !layer.W0.same_shape(w)) {
    throw ShapeError("encode: layer " + std::to_string(layer_index) + " expects input dim " +
                     std::to_string(w.rows()) + ", got " + std::to_string(in_dim));
  }
  if (layer.relational()) {
    for (const Matrix& wr : layer.W_rel) {
      if (!wr.same_shape(w)) {
        throw ShapeError("encode: layer " + std::to_string(layer_index) + " relational weights disagree on shape");
      }
    }
  }
}

}  // namespace

std::vector<ParamRef> param_refs(ModelParams& p) {
  std::vector<ParamRef> refs;
  refs.push_back({"embedding", &p.embedding});
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    const std::string prefix = "layer" + std::to_string(l) + ".";
    if (p.layers[l].relational()) {
      for (std::size_t r = 0; r < p.layers[l].W_rel.size(); ++r) {
        refs.push_back({prefix + "W_r" + std::to_string(r), &p.layers[l].W_rel[r]});
      }
    } else {
      refs.push_back({prefix + "W", &p.layers[l].W});
    }
    refs.push_back({prefix + "W0", &p.layers[l].W0});
  }
  refs.push_back({"classifier.W", &p.classifier_w});
  refs.push_back({"classifier.b", &p.classifier_b});
  for (std::size_t r = 0; r < p.decoder.size(); ++r) {
    refs.push_back({"decoder.R" + std::to_string(r), &p.decoder[r]});
  }
  return refs;
}

std::vector<ConstParamRef> param_refs(const ModelParams& p) {
  auto refs = param_refs(const_cast<ModelParams&>(p));
  std::vector<ConstParamRef> out;
  out.reserve(refs.size());
  for (const auto& r : refs) out.push_back({r.name, r.tensor});
  return out;
}

ModelParams init_params(const KnowledgeGraph& g, const ModelShape& shape, std::uint64_t seed) {
  if (shape.num_layers < 1) throw ValidationError("init_params: num_layers must be >= 1");
  if (shape.dim < 1) throw ValidationError("init_params: dim must be >= 1");

  ModelParams p;
  p.decoder_form = shape.decoder_form;
  p.embedding = Matrix(g.num_entities(), shape.dim);
  p.layers.resize(shape.num_layers);
  for (auto& layer : p.layers) {
    if (shape.relational_weights) {
      layer.W_rel.assign(g.num_relations(), Matrix(shape.dim, shape.dim));
    } else {
      layer.W = Matrix(shape.dim, shape.dim);
    }
    layer.W0 = Matrix(shape.dim, shape.dim);
  }
  p.classifier_w = Matrix(shape.dim, g.num_classes());
  p.classifier_b = Matrix(1, g.num_classes());
  const int decoder_rows = shape.decoder_form == DecoderForm::Full ? shape.dim : 1;
  p.decoder.assign(g.num_relations(), Matrix(decoder_rows, shape.dim));

  Rng rng(seed);
  for (auto& ref : param_refs(p)) {
    if (ref.name == "classifier.b") continue;  // stays zero
    glorot_fill(*ref.tensor, rng);
  }
  return p;
}

ModelParams zeros_like(const ModelParams& p) {
  ModelParams z = p;
  for (auto& ref : param_refs(z)) ref.tensor->fill(0.0);
  return z;
}

NodeEmbeddings encode(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params) {
  if (params.embedding.rows() != g.num_entities()) {
    throw ShapeError("encode: embedding rows " + std::to_string(params.embedding.rows()) + " != num_entities " +
                     std::to_string(g.num_entities()));
  }
  NodeEmbeddings emb;
  emb.acts.reserve(params.layers.size() + 1);
  emb.acts.push_back(params.embedding);

  const int num_layers = params.num_layers();
  for (int l = 0; l < num_layers; ++l) {
    const GcnLayer& layer = params.layers[l];
    const Matrix& h = emb.acts.back();
    check_layer_dims(layer, h.cols(), l);

    Matrix pre;
    if (layer.relational()) {
      pre = matmul(h, layer.W0);
      for (RelationId r = 0; r < g.num_relations(); ++r) {
        pre += matmul(aggregate_neighbors(g, norms, h, r), layer.W_rel[r]);
      }
    } else {
      pre = matmul(aggregate_neighbors(g, norms, h, -1), layer.W);
      pre += matmul(h, layer.W0);
    }
    emb.acts.push_back(l + 1 < num_layers ? relu(pre) : std::move(pre));
  }
  return emb;
}

void encode_backward(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params,
                     const NodeEmbeddings& acts, const Matrix& grad_final, ModelParams& grads) {
  const int num_layers = params.num_layers();
  if (static_cast<int>(acts.acts.size()) != num_layers + 1) {
    throw ShapeError("encode_backward: expected " + std::to_string(num_layers + 1) + " activation levels, got " +
                     std::to_string(acts.acts.size()));
  }
  if (!grad_final.same_shape(acts.final_layer())) {
    throw ShapeError("encode_backward: cotangent " + grad_final.shape_str() + " vs final " +
                     acts.final_layer().shape_str());
  }

  Matrix grad_h = grad_final;
  for (int l = num_layers - 1; l >= 0; --l) {
    const GcnLayer& layer = params.layers[l];
    const Matrix& h = acts.acts[l];

    // hidden layers were rectified; the final layer is linear
    const Matrix grad_pre = (l + 1 < num_layers) ? relu_backward(grad_h, acts.acts[l + 1]) : std::move(grad_h);

    Matrix grad_h_prev = matmul(grad_pre, transpose(layer.W0));
    grads.layers[l].W0 += matmul(transpose(h), grad_pre);

    if (layer.relational()) {
      for (RelationId r = 0; r < g.num_relations(); ++r) {
        const Matrix agg = aggregate_neighbors(g, norms, h, r);
        grads.layers[l].W_rel[r] += matmul(transpose(agg), grad_pre);
        aggregate_neighbors_backward(g, norms, matmul(grad_pre, transpose(layer.W_rel[r])), r, grad_h_prev);
      }
    } else {
      const Matrix agg = aggregate_neighbors(g, norms, h, -1);
      grads.layers[l].W += matmul(transpose(agg), grad_pre);
      aggregate_neighbors_backward(g, norms, matmul(grad_pre, transpose(layer.W)), -1, grad_h_prev);
    }
    grad_h = std::move(grad_h_prev);
  }
  grads.embedding += grad_h;
}

Matrix classify(const Matrix& h_final, const ModelParams& params) {
  if (h_final.cols() != params.classifier_w.rows()) {
    throw ShapeError("classify: features " + h_final.shape_str() + " vs classifier " +
                     params.classifier_w.shape_str());
  }
  Matrix logits = matmul(h_final, params.classifier_w);
  const auto bias = params.classifier_b.row(0);
  Matrix probs(logits.rows(), logits.cols());
  std::vector<double> row(logits.cols());
  for (int i = 0; i < logits.rows(); ++i) {
    for (int c = 0; c < logits.cols(); ++c) row[c] = logits(i, c) + bias[c];
    const auto p = softmax_row(row);
    for (int c = 0; c < logits.cols(); ++c) probs(i, c) = p[c];
  }
  return probs;
}

Matrix classify_backward(const Matrix& grad_probs, const Matrix& h_final, const Matrix& probs,
                         const ModelParams& params, ModelParams& grads) {
  if (!grad_probs.same_shape(probs)) {
    throw ShapeError("classify_backward: " + grad_probs.shape_str() + " vs " + probs.shape_str());
  }
  Matrix grad_logits(probs.rows(), probs.cols());
  for (int i = 0; i < probs.rows(); ++i) {
    const auto gl = softmax_row_backward(grad_probs.row(i), probs.row(i));
    for (int c = 0; c < probs.cols(); ++c) grad_logits(i, c) = gl[c];
  }
  grads.classifier_w += matmul(transpose(h_final), grad_logits);
  auto gb = grads.classifier_b.row(0);
  for (int i = 0; i < grad_logits.rows(); ++i) {
    for (int c = 0; c < grad_logits.cols(); ++c) gb[c] += grad_logits(i, c);
  }
  return matmul(grad_logits, transpose(params.classifier_w));
}

double score_relation(std::span<const double> h_i, std::span<const double> h_j, RelationId r,
                      const ModelParams& params) {
  if (r < 0 || r >= params.num_relations()) {
    throw ValidationError("score_relation: relation id " + std::to_string(r) + " out of range [0, " +
                          std::to_string(params.num_relations()) + ")");
  }
  const Matrix& R = params.decoder[r];
  const int d = static_cast<int>(h_i.size());
  double s = 0.0;
  if (params.decoder_form == DecoderForm::Full) {
    for (int a = 0; a < d; ++a) {
      if (h_i[a] == 0.0) continue;
      const auto Ra = R.row(a);
      double acc = 0.0;
      for (int b = 0; b < d; ++b) acc += Ra[b] * h_j[b];
      s += h_i[a] * acc;
    }
  } else {
    const auto diag = R.row(0);
    for (int k = 0; k < d; ++k) s += h_i[k] * diag[k] * h_j[k];
  }
  return sigmoid(s);
}

void score_backward(double grad_prob, std::span<const double> h_i, std::span<const double> h_j, RelationId r,
                    const ModelParams& params, double prob, ModelParams& grads, std::span<double> grad_h_i,
                    std::span<double> grad_h_j) {
  const double ds = grad_prob * prob * (1.0 - prob);  // sigmoid'
  const Matrix& R = params.decoder[r];
  Matrix& gR = grads.decoder[r];
  const int d = static_cast<int>(h_i.size());
  if (params.decoder_form == DecoderForm::Full) {
    for (int a = 0; a < d; ++a) {
      const auto Ra = R.row(a);
      auto gRa = gR.row(a);
      double acc = 0.0;
      for (int b = 0; b < d; ++b) {
        acc += Ra[b] * h_j[b];
        gRa[b] += ds * h_i[a] * h_j[b];
        grad_h_j[b] += ds * h_i[a] * Ra[b];
      }
      grad_h_i[a] += ds * acc;
    }
  } else {
    const auto diag = R.row(0);
    auto gdiag = gR.row(0);
    for (int k = 0; k < d; ++k) {
      gdiag[k] += ds * h_i[k] * h_j[k];
      grad_h_i[k] += ds * diag[k] * h_j[k];
      grad_h_j[k] += ds * h_i[k] * diag[k];
    }
  }
}

}  // namespace kgr
