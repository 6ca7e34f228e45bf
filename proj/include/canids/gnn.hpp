#pragma once
// Node classifiers over window graphs: GCN, GraphSAGE (mean aggregation),
// GAT and a graph transformer, with class-weighted full-batch training.

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "canids/autodiff.hpp"
#include "canids/error.hpp"
#include "canids/features.hpp"
#include "canids/graph_stream.hpp"
#include "canids/matrix.hpp"

namespace canids {

enum class ModelKind { gcn, sage, gat, transformer };

std::string_view to_string(ModelKind kind);
ModelKind parse_model_kind(std::string_view name);
inline constexpr std::array<ModelKind, 4> kAllModels{ModelKind::gcn, ModelKind::gat, ModelKind::sage,
                                                     ModelKind::transformer};

inline constexpr std::size_t kFeatureDim = 2;  // pagerank, density

/// One window graph prepared for message passing. Message passing uses the
/// undirected view of the window's edges; self-loops are dropped there and
/// re-added as I where a model needs them.
struct GraphBatch {
  std::size_t window = 0;
  std::vector<std::uint32_t> node_ids;
  Matrix features;                   // N x F
  Matrix norm_adjacency;             // D^-1/2 (A + I) D^-1/2
  Matrix neighbor_mean;              // row i averages the neighbours of i; zero row if none
  std::vector<std::uint8_t> adjacency;  // A, N x N, symmetric, zero diagonal
  Matrix edge_weights;               // directed accumulated weights, src row / dst col
  std::vector<std::uint8_t> labels;

  std::size_t num_nodes() const { return node_ids.size(); }
};

GraphBatch make_batch(std::size_t window, std::vector<std::uint32_t> node_ids, Matrix features,
                      const std::map<EdgeKey, double>& edges, std::vector<std::uint8_t> labels);
/// Batch for `graph` using the feature rows of that window (any row order).
GraphBatch make_batch(const WindowGraph& graph, std::span<const FeatureRow> rows);
/// Node i of the result is node perm[i] of the input.
GraphBatch permute_batch(const GraphBatch& batch, std::span<const std::size_t> perm);

struct HyperParams {
  std::size_t hidden = 16;
  std::size_t layers = 2;
  std::size_t heads = 1;
  double learning_rate = 1e-2;
  std::size_t epochs = 300;
  std::uint64_t seed = 7;
  double leaky_slope = 0.2;  // GAT attention logits
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  bool standardize_inputs = true;  // fit input_shift / input_scale on the training windows

  bool operator==(const HyperParams&) const = default;
};

struct ModelParams {
  ModelKind kind = ModelKind::gcn;
  std::size_t input_dim = kFeatureDim;
  HyperParams hyper;
  std::array<double, 2> class_weights{1.0, 1.0};
  // Features enter the network as (x - shift) / scale, column by column.
  std::vector<double> input_shift;
  std::vector<double> input_scale;
  std::vector<std::string> names;
  std::vector<Matrix> tensors;

  const Matrix& at(std::string_view name) const;
  Matrix& at(std::string_view name);
  std::size_t parameter_count() const;

  bool operator==(const ModelParams&) const = default;
};

/// Glorot-uniform weights, zero biases, drawn from `hyper.seed`. The input
/// transform starts as the identity.
ModelParams init_params(ModelKind kind, std::size_t input_dim, const HyperParams& hyper);

/// Records the forward pass on `tape`; `vars[i]` holds `params.tensors[i]`.
ad::Var forward_on_tape(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> vars,
                        const GraphBatch& batch);

/// Per-node class scores (N x 2).
Matrix forward(const ModelParams& params, const GraphBatch& batch);
Matrix gcn_forward(const ModelParams& params, const GraphBatch& batch);
Matrix sage_forward(const ModelParams& params, const GraphBatch& batch);
Matrix gat_forward(const ModelParams& params, const GraphBatch& batch);
Matrix transformer_forward(const ModelParams& params, const GraphBatch& batch);

Matrix softmax_rows(const Matrix& scores);

inline constexpr double kClassWeightCap = 100.0;

/// w_c = N / (2 N_c), capped; a class with no samples gets the cap.
std::array<double, 2> inverse_frequency_weights(std::size_t benign, std::size_t attack,
                                                double cap = kClassWeightCap);
std::array<double, 2> inverse_frequency_weights(std::span<const GraphBatch> batches, double cap = kClassWeightCap);

/// Mean over nodes of w[y] * cross-entropy(softmax(scores), y).
double weighted_loss(const Matrix& scores, std::span<const std::uint8_t> labels, std::array<double, 2> class_weights);

struct LossGradient {
  double loss = 0.0;
  std::vector<Matrix> grads;  // aligned with ModelParams::tensors
};

/// Weighted loss averaged over all nodes of all batches, with its gradient.
LossGradient loss_and_gradient(const ModelParams& params, std::span<const GraphBatch> batches);

class TrainingDiverged : public DataError {
 public:
  explicit TrainingDiverged(std::size_t epoch)
      : DataError("training diverged (non-finite loss) at epoch " + std::to_string(epoch)), epoch_(epoch) {}
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainReport {
  ModelParams params;
  std::vector<double> epoch_loss;  // loss before each update
  std::string split;
  std::uint64_t seed = 0;

  bool operator==(const TrainReport&) const = default;
};

/// Per-column mean and population standard deviation over every node of
/// `batches`; a constant column gets scale 1.
std::pair<std::vector<double>, std::vector<double>> feature_moments(std::span<const GraphBatch> batches);

/// Full-batch Adam. Class weights default to inverse frequency over `batches`;
/// with `hyper.standardize_inputs` the input transform comes from feature_moments.
TrainReport train(ModelKind kind, std::span<const GraphBatch> batches, const HyperParams& hyper,
                  std::optional<std::array<double, 2>> class_weights = std::nullopt);

/// Largest |g_ad - g_fd| / max(|g_ad|, |g_fd|, 1e-6) over every parameter,
/// with central differences of step h on the weighted loss.
double grad_check(const ModelParams& params, const GraphBatch& batch, double h = 1e-5);

}  // namespace canids
