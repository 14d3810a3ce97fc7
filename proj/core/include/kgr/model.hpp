#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kgr/graph.hpp"
#include "kgr/matrix.hpp"

namespace kgr {

enum class DecoderForm : std::uint8_t { Full, Diagonal };

/// One graph-convolution layer: a shared neighbor weight (or one weight per
/// relation in relational mode) plus the self-loop weight.
struct GcnLayer {
  Matrix W;                   // d_in x d_out, shared neighbor weight (empty in relational mode)
  std::vector<Matrix> W_rel;  // relational mode: one d_in x d_out block per relation
  Matrix W0;                  // d_in x d_out, self weight

  bool relational() const { return !W_rel.empty(); }
};

struct ModelShape {
  int num_layers = 2;
  int dim = 8;
  DecoderForm decoder_form = DecoderForm::Full;
  bool relational_weights = false;
};

/// Every trainable tensor. The same struct doubles as the gradient
/// accumulator (see zeros_like).
struct ModelParams {
  Matrix embedding;             // num_entities x dim, the layer-0 features
  std::vector<GcnLayer> layers;
  Matrix classifier_w;          // dim x num_classes
  Matrix classifier_b;          // 1 x num_classes
  std::vector<Matrix> decoder;  // per relation: dim x dim (Full) or 1 x dim (Diagonal)
  DecoderForm decoder_form = DecoderForm::Full;

  int dim() const { return embedding.cols(); }
  int num_layers() const { return static_cast<int>(layers.size()); }
  int num_relations() const { return static_cast<int>(decoder.size()); }
  int num_classes() const { return classifier_w.cols(); }
};

/// Named view over every parameter tensor in a fixed order. The optimizer,
/// the serializer and the gradient checker all walk parameters through this.
struct ParamRef {
  std::string name;
  Matrix* tensor;
};
struct ConstParamRef {
  std::string name;
  const Matrix* tensor;
};
std::vector<ParamRef> param_refs(ModelParams& p);
std::vector<ConstParamRef> param_refs(const ModelParams& p);

/// Glorot-uniform init for all weights (zeros for the classifier bias),
/// drawn from one seeded stream in param_refs order.
ModelParams init_params(const KnowledgeGraph& g, const ModelShape& shape, std::uint64_t seed);
ModelParams zeros_like(const ModelParams& p);

/// Per-layer activations; index 0 is the embedding table, index L the final
/// entity representations.
struct NodeEmbeddings {
  std::vector<Matrix> acts;
  const Matrix& final_layer() const { return acts.back(); }
};

/// Layer-wise message passing: for each node, neighbor features scaled by
/// 1/c_ij through W (or W_r), plus the node's own features through W0.
/// Hidden layers apply ReLU; the final layer is linear so downstream scores
/// and logits can be negative.
NodeEmbeddings encode(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params);

/// Adjoint of encode: accumulates gradients for every layer weight and the
/// embedding table into `grads`, given the loss gradient at the final
/// activations.
void encode_backward(const KnowledgeGraph& g, const NormCoefficients& norms, const ModelParams& params,
                     const NodeEmbeddings& acts, const Matrix& grad_final, ModelParams& grads);

/// Row-wise softmax(h W_c + b_c); each output row is a probability vector.
Matrix classify(const Matrix& h_final, const ModelParams& params);

/// Adjoint of classify. Takes dL/dprobs, accumulates classifier gradients
/// into `grads`, returns dL/dh_final.
Matrix classify_backward(const Matrix& grad_probs, const Matrix& h_final, const Matrix& probs,
                         const ModelParams& params, ModelParams& grads);

/// sigmoid(h_i R_r h_j^T); Diagonal form scores sigmoid(sum_k h_i[k] d_r[k] h_j[k]).
double score_relation(std::span<const double> h_i, std::span<const double> h_j, RelationId r,
                      const ModelParams& params);

/// Adjoint of score_relation. `grad_prob` is dL/d(probability), `prob` the
/// forward output. Accumulates the decoder gradient into `grads` and the two
/// row gradients into the provided spans.
void score_backward(double grad_prob, std::span<const double> h_i, std::span<const double> h_j, RelationId r,
                    const ModelParams& params, double prob, ModelParams& grads, std::span<double> grad_h_i,
                    std::span<double> grad_h_j);

}  // namespace kgr
