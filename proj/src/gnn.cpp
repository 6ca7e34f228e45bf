#include "canids/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <tuple>

#include "canids/kernels.hpp"
#include "canids/rng.hpp"

namespace canids {

std::string_view to_string(ModelKind kind) {
  switch (kind) {
    case ModelKind::gcn: return "gcn";
    case ModelKind::sage: return "sage";
    case ModelKind::gat: return "gat";
    case ModelKind::transformer: return "transformer";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "gcn" || name == "gcnn") return ModelKind::gcn;
  if (name == "sage" || name == "graphsage") return ModelKind::sage;
  if (name == "gat") return ModelKind::gat;
  if (name == "transformer") return ModelKind::transformer;
  throw ConfigError("unknown model kind '" + std::string(name) + "' (expected gcn, sage, gat or transformer)");
}

// ---------------------------------------------------------------------------
// Batches

GraphBatch make_batch(std::size_t window, std::vector<std::uint32_t> node_ids, Matrix features,
                      const std::map<EdgeKey, double>& edges, std::vector<std::uint8_t> labels) {
  const std::size_t n = node_ids.size();
  if (features.rows() != n || labels.size() != n) throw ShapeError("batch features/labels do not match node count");
  if (!features.all_finite()) throw DataError("non-finite node features in window " + std::to_string(window));

  std::map<std::uint32_t, std::size_t> pos;
  for (std::size_t i = 0; i < n; ++i) {
    if (!pos.emplace(node_ids[i], i).second) throw DataError("duplicate node in window " + std::to_string(window));
  }

  GraphBatch b;
  b.window = window;
  b.node_ids = std::move(node_ids);
  b.features = std::move(features);
  b.labels = std::move(labels);
  b.adjacency.assign(n * n, 0);
  b.edge_weights = Matrix(n, n);
  for (const auto& [key, w] : edges) {
    const auto s = pos.find(key.first);
    const auto d = pos.find(key.second);
    if (s == pos.end() || d == pos.end()) throw DataError("edge endpoint outside window " + std::to_string(window));
    b.edge_weights(s->second, d->second) = w;
    if (s->second != d->second) {
      b.adjacency[s->second * n + d->second] = 1;
      b.adjacency[d->second * n + s->second] = 1;
    }
  }

  b.norm_adjacency = Matrix(n, n);
  b.neighbor_mean = Matrix(n, n);
  std::vector<double> inv_sqrt_deg(n);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t deg = 0;
    for (std::size_t j = 0; j < n; ++j) deg += b.adjacency[i * n + j];
    inv_sqrt_deg[i] = 1.0 / std::sqrt(static_cast<double>(deg + 1));
    if (deg > 0) {
      for (std::size_t j = 0; j < n; ++j) {
        if (b.adjacency[i * n + j]) b.neighbor_mean(i, j) = 1.0 / static_cast<double>(deg);
      }
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j || b.adjacency[i * n + j]) b.norm_adjacency(i, j) = inv_sqrt_deg[i] * inv_sqrt_deg[j];
    }
  }
  return b;
}

GraphBatch make_batch(const WindowGraph& graph, std::span<const FeatureRow> rows) {
  std::map<std::uint32_t, const FeatureRow*> by_id;
  for (const auto& r : rows) {
    if (r.window == graph.window_index) by_id[r.can_id] = &r;
  }
  Matrix x(graph.nodes.size(), kFeatureDim);
  std::vector<std::uint8_t> labels(graph.nodes.size());
  for (std::size_t i = 0; i < graph.nodes.size(); ++i) {
    const auto it = by_id.find(graph.nodes[i]);
    if (it == by_id.end()) throw DataError("no feature row for a node of window " + std::to_string(graph.window_index));
    x(i, 0) = it->second->pagerank;
    x(i, 1) = it->second->density;
    labels[i] = it->second->label;
  }
  std::map<EdgeKey, double> edges;
  for (const auto& [key, stat] : graph.edges) edges[key] = stat.weight;
  return make_batch(graph.window_index, graph.nodes, std::move(x), edges, std::move(labels));
}

GraphBatch permute_batch(const GraphBatch& batch, std::span<const std::size_t> perm) {
  const std::size_t n = batch.num_nodes();
  if (perm.size() != n) throw ShapeError("permutation length mismatch");
  std::vector<std::uint32_t> ids(n);
  std::vector<std::uint8_t> labels(n);
  Matrix x(n, batch.features.cols());
  for (std::size_t i = 0; i < n; ++i) {
    ids[i] = batch.node_ids[perm[i]];
    labels[i] = batch.labels[perm[i]];
    for (std::size_t c = 0; c < x.cols(); ++c) x(i, c) = batch.features(perm[i], c);
  }
  std::map<EdgeKey, double> edges;
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t d = 0; d < n; ++d) {
      const double w = batch.edge_weights(s, d);
      if (w != 0.0 || (s != d && batch.adjacency[s * n + d] && batch.edge_weights(d, s) == 0.0)) {
        edges[{batch.node_ids[s], batch.node_ids[d]}] = w;
      }
    }
  }
  return make_batch(batch.window, std::move(ids), std::move(x), edges, std::move(labels));
}

// ---------------------------------------------------------------------------
// Parameters

const Matrix& ModelParams::at(std::string_view name) const {
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (names[i] == name) return tensors[i];
  }
  throw ShapeError("no parameter named '" + std::string(name) + "'");
}

Matrix& ModelParams::at(std::string_view name) {
  return const_cast<Matrix&>(static_cast<const ModelParams&>(*this).at(name));
}

std::size_t ModelParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& t : tensors) n += t.size();
  return n;
}

namespace {

struct ParamBuilder {
  ModelParams& params;
  std::mt19937_64 rng;

  void weight(std::string name, std::size_t rows, std::size_t cols) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    Matrix m(rows, cols);
    for (auto& v : m.values()) v = detail::uniform(rng, -limit, limit);
    params.names.push_back(std::move(name));
    params.tensors.push_back(std::move(m));
  }
  void bias(std::string name, std::size_t cols) {
    params.names.push_back(std::move(name));
    params.tensors.emplace_back(1, cols);
  }
};

std::string layer_name(const char* prefix, std::size_t l, const char* suffix) {
  return std::string(prefix) + std::to_string(l) + "." + suffix;
}

std::string head_name(const char* prefix, std::size_t l, std::size_t h, const char* suffix) {
  return std::string(prefix) + std::to_string(l) + ".h" + std::to_string(h) + "." + suffix;
}

}  // namespace

ModelParams init_params(ModelKind kind, std::size_t input_dim, const HyperParams& hyper) {
  if (input_dim == 0 || hyper.hidden == 0 || hyper.layers == 0 || hyper.heads == 0) {
    throw ConfigError("input_dim, hidden, layers and heads must all be >= 1");
  }
  ModelParams p;
  p.kind = kind;
  p.input_dim = input_dim;
  p.hyper = hyper;
  p.input_shift.assign(input_dim, 0.0);
  p.input_scale.assign(input_dim, 1.0);
  ParamBuilder b{p, std::mt19937_64(detail::derive_seed(hyper.seed, static_cast<std::uint64_t>(kind)))};
  const std::size_t h = hyper.hidden;

  switch (kind) {
    case ModelKind::gcn:
      for (std::size_t l = 0; l < hyper.layers; ++l) {
        b.weight(layer_name("gcn", l, "w"), l == 0 ? input_dim : h, h);
        b.bias(layer_name("gcn", l, "b"), h);
      }
      break;
    case ModelKind::sage:
      for (std::size_t l = 0; l < hyper.layers; ++l) {
        const std::size_t in = l == 0 ? input_dim : h;
        b.weight(layer_name("sage", l, "w_self"), in, h);
        b.weight(layer_name("sage", l, "w_neigh"), in, h);
        b.bias(layer_name("sage", l, "b"), h);
      }
      break;
    case ModelKind::gat:
      for (std::size_t l = 0; l < hyper.layers; ++l) {
        const std::size_t in = l == 0 ? input_dim : h;
        for (std::size_t k = 0; k < hyper.heads; ++k) {
          b.weight(head_name("gat", l, k, "w"), in, h);
          b.weight(head_name("gat", l, k, "a_src"), h, 1);
          b.weight(head_name("gat", l, k, "a_dst"), h, 1);
        }
        b.bias(layer_name("gat", l, "b"), h);
      }
      break;
    case ModelKind::transformer:
      b.weight("in.w", input_dim, h);
      b.bias("in.b", h);
      for (std::size_t l = 0; l < hyper.layers; ++l) {
        for (std::size_t k = 0; k < hyper.heads; ++k) {
          b.weight(head_name("tf", l, k, "wq"), h, h);
          b.weight(head_name("tf", l, k, "wk"), h, h);
          b.weight(head_name("tf", l, k, "wv"), h, h);
        }
        b.weight(layer_name("tf", l, "ff1.w"), h, h);
        b.bias(layer_name("tf", l, "ff1.b"), h);
        b.weight(layer_name("tf", l, "ff2.w"), h, h);
        b.bias(layer_name("tf", l, "ff2.b"), h);
      }
      break;
  }
  b.weight("head.w", h, 2);
  b.bias("head.b", 2);
  return p;
}

// ---------------------------------------------------------------------------
// Forward passes

namespace {

class Forward {
 public:
  Forward(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> vars, const GraphBatch& batch)
      : tape_(tape), params_(params), vars_(vars), batch_(batch) {
    if (vars.size() != params.tensors.size()) throw ShapeError("parameter variable count mismatch");
    if (batch.features.cols() != params.input_dim) {
      throw ShapeError("features have " + std::to_string(batch.features.cols()) + " columns, model expects " +
                       std::to_string(params.input_dim));
    }
    if (params.input_shift.size() != params.input_dim || params.input_scale.size() != params.input_dim) {
      throw ShapeError("input transform does not match input_dim");
    }
  }

  ad::Var run() {
    const auto& hp = params_.hyper;
    Matrix x = batch_.features;
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t c = 0; c < x.cols(); ++c) x(i, c) = (x(i, c) - params_.input_shift[c]) / params_.input_scale[c];
    }
    ad::Var h = tape_.constant(x);
    switch (params_.kind) {
      case ModelKind::gcn: {
        const ad::Var adj = tape_.constant(batch_.norm_adjacency);
        for (std::size_t l = 0; l < hp.layers; ++l) {
          const auto pre = tape_.matmul(adj, tape_.matmul(h, p(layer_name("gcn", l, "w"))));
          h = checked(tape_.relu(tape_.add_row(pre, p(layer_name("gcn", l, "b")))), "gcn", l);
        }
        break;
      }
      case ModelKind::sage: {
        const ad::Var mean = tape_.constant(batch_.neighbor_mean);
        for (std::size_t l = 0; l < hp.layers; ++l) {
          const auto self = tape_.matmul(h, p(layer_name("sage", l, "w_self")));
          const auto neigh = tape_.matmul(tape_.matmul(mean, h), p(layer_name("sage", l, "w_neigh")));
          h = checked(tape_.relu(tape_.add_row(tape_.add(self, neigh), p(layer_name("sage", l, "b")))), "sage", l);
        }
        break;
      }
      case ModelKind::gat: {
        const std::size_t n = batch_.num_nodes();
        std::vector<std::uint8_t> mask = batch_.adjacency;
        for (std::size_t i = 0; i < n; ++i) mask[i * n + i] = 1;
        for (std::size_t l = 0; l < hp.layers; ++l) {
          std::optional<ad::Var> acc;
          for (std::size_t k = 0; k < hp.heads; ++k) {
            const auto wh = tape_.matmul(h, p(head_name("gat", l, k, "w")));
            const auto src = tape_.matmul(wh, p(head_name("gat", l, k, "a_src")));
            const auto dst = tape_.matmul(wh, p(head_name("gat", l, k, "a_dst")));
            // logits(v, u): receiver v attends to neighbour u
            const auto logits = tape_.leaky_relu(tape_.outer_sum(dst, src), hp.leaky_slope);
            const auto alpha = tape_.masked_softmax_rows(logits, mask);
            const auto out = tape_.matmul(alpha, wh);
            acc = acc ? tape_.add(*acc, out) : out;
          }
          ad::Var merged = hp.heads > 1 ? tape_.scale(*acc, 1.0 / static_cast<double>(hp.heads)) : *acc;
          h = checked(tape_.relu(tape_.add_row(merged, p(layer_name("gat", l, "b")))), "gat", l);
        }
        break;
      }
      case ModelKind::transformer: {
        h = tape_.add_row(tape_.matmul(h, p("in.w")), p("in.b"));
        const double inv_sqrt_d = 1.0 / std::sqrt(static_cast<double>(hp.hidden));
        for (std::size_t l = 0; l < hp.layers; ++l) {
          std::optional<ad::Var> acc;
          for (std::size_t k = 0; k < hp.heads; ++k) {
            const auto q = tape_.matmul(h, p(head_name("tf", l, k, "wq")));
            const auto key = tape_.matmul(h, p(head_name("tf", l, k, "wk")));
            const auto v = tape_.matmul(h, p(head_name("tf", l, k, "wv")));
            const auto attn = tape_.masked_softmax_rows(tape_.scale(tape_.matmul_nt(q, key), inv_sqrt_d));
            const auto out = tape_.matmul(attn, v);
            acc = acc ? tape_.add(*acc, out) : out;
          }
          ad::Var merged = hp.heads > 1 ? tape_.scale(*acc, 1.0 / static_cast<double>(hp.heads)) : *acc;
          const auto z = tape_.add(h, merged);
          const auto ff = tape_.relu(tape_.add_row(tape_.matmul(z, p(layer_name("tf", l, "ff1.w"))),
                                                   p(layer_name("tf", l, "ff1.b"))));
          const auto ff_out = tape_.add_row(tape_.matmul(ff, p(layer_name("tf", l, "ff2.w"))),
                                            p(layer_name("tf", l, "ff2.b")));
          h = checked(tape_.add(z, ff_out), "transformer", l);
        }
        break;
      }
    }
    return checked(tape_.add_row(tape_.matmul(h, p("head.w")), p("head.b")), "head", 0);
  }

 private:
  ad::Var p(const std::string& name) const {
    for (std::size_t i = 0; i < params_.names.size(); ++i) {
      if (params_.names[i] == name) return vars_[i];
    }
    throw ShapeError("model is missing parameter '" + name + "'");
  }

  ad::Var checked(ad::Var v, const char* layer, std::size_t index) const {
    if (!tape_.value(v).all_finite()) {
      throw DataError(std::string("non-finite activations in layer ") + layer + std::to_string(index));
    }
    return v;
  }

  ad::Tape& tape_;
  const ModelParams& params_;
  std::span<const ad::Var> vars_;
  const GraphBatch& batch_;
};

std::vector<ad::Var> load_params(ad::Tape& tape, const ModelParams& params, bool requires_grad) {
  std::vector<ad::Var> vars;
  vars.reserve(params.tensors.size());
  for (const auto& t : params.tensors) vars.push_back(requires_grad ? tape.parameter(t) : tape.constant(t));
  return vars;
}

Matrix forward_kind(const ModelParams& params, const GraphBatch& batch, ModelKind expected) {
  if (params.kind != expected) {
    throw ShapeError("parameters belong to a " + std::string(to_string(params.kind)) + " model, not " +
                     std::string(to_string(expected)));
  }
  return forward(params, batch);
}

}  // namespace

ad::Var forward_on_tape(ad::Tape& tape, const ModelParams& params, std::span<const ad::Var> vars,
                        const GraphBatch& batch) {
  return Forward(tape, params, vars, batch).run();
}

Matrix forward(const ModelParams& params, const GraphBatch& batch) {
  if (batch.num_nodes() == 0) return Matrix(0, 2);
  ad::Tape tape;
  const auto vars = load_params(tape, params, false);
  return tape.value(forward_on_tape(tape, params, vars, batch));
}

Matrix gcn_forward(const ModelParams& params, const GraphBatch& batch) {
  return forward_kind(params, batch, ModelKind::gcn);
}
Matrix sage_forward(const ModelParams& params, const GraphBatch& batch) {
  return forward_kind(params, batch, ModelKind::sage);
}
Matrix gat_forward(const ModelParams& params, const GraphBatch& batch) {
  return forward_kind(params, batch, ModelKind::gat);
}
Matrix transformer_forward(const ModelParams& params, const GraphBatch& batch) {
  return forward_kind(params, batch, ModelKind::transformer);
}

Matrix softmax_rows(const Matrix& scores) {
  Matrix out(scores.rows(), scores.cols());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto row = scores.row(r);
    const double mx = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) sum += out(r, c) = std::exp(row[c] - mx);
    for (std::size_t c = 0; c < row.size(); ++c) out(r, c) /= sum;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Loss and training

std::array<double, 2> inverse_frequency_weights(std::size_t benign, std::size_t attack, double cap) {
  const double total = static_cast<double>(benign + attack);
  auto w = [&](std::size_t count) {
    if (count == 0) return cap;
    return std::min(cap, total / (2.0 * static_cast<double>(count)));
  };
  return {w(benign), w(attack)};
}

std::array<double, 2> inverse_frequency_weights(std::span<const GraphBatch> batches, double cap) {
  std::size_t counts[2] = {0, 0};
  for (const auto& b : batches) {
    for (auto y : b.labels) ++counts[y ? 1 : 0];
  }
  return inverse_frequency_weights(counts[0], counts[1], cap);
}

double weighted_loss(const Matrix& scores, std::span<const std::uint8_t> labels, std::array<double, 2> class_weights) {
  if (labels.empty()) throw DataError("weighted loss over zero nodes");
  if (!(class_weights[0] > 0.0 && class_weights[1] > 0.0)) throw ConfigError("class weights must be > 0");
  ad::Tape tape;
  const auto s = tape.constant(scores);
  const auto loss = tape.weighted_cross_entropy(s, labels, class_weights, 1.0 / static_cast<double>(labels.size()));
  return tape.value(loss)(0, 0);
}

LossGradient loss_and_gradient(const ModelParams& params, std::span<const GraphBatch> batches) {
  std::size_t total_nodes = 0;
  for (const auto& b : batches) total_nodes += b.num_nodes();
  if (total_nodes == 0) throw DataError("no nodes to train on");
  const double scale = 1.0 / static_cast<double>(total_nodes);

  LossGradient out;
  out.grads.reserve(params.tensors.size());
  for (const auto& t : params.tensors) out.grads.push_back(Matrix::zeros_like(t));

  ad::Tape tape;
  for (const auto& b : batches) {
    if (b.num_nodes() == 0) continue;
    tape.clear();
    const auto vars = load_params(tape, params, true);
    const auto scores = forward_on_tape(tape, params, vars, b);
    const auto loss = tape.weighted_cross_entropy(scores, b.labels, params.class_weights, scale);
    tape.backward(loss);
    out.loss += tape.value(loss)(0, 0);
    for (std::size_t i = 0; i < vars.size(); ++i) {
      kernels::axpy(1.0, tape.grad(vars[i]).values(), out.grads[i].values());
    }
  }
  return out;
}

std::pair<std::vector<double>, std::vector<double>> feature_moments(std::span<const GraphBatch> batches) {
  if (batches.empty()) throw DataError("feature moments need at least one window");
  const std::size_t f = batches.front().features.cols();
  std::vector<double> mean(f, 0.0);
  std::vector<double> m2(f, 0.0);
  std::size_t n = 0;
  for (const auto& b : batches) {
    if (b.features.cols() != f) throw ShapeError("windows disagree on feature count");
    for (std::size_t i = 0; i < b.num_nodes(); ++i) {
      ++n;
      for (std::size_t c = 0; c < f; ++c) {
        const double d = b.features(i, c) - mean[c];
        mean[c] += d / static_cast<double>(n);
        m2[c] += d * (b.features(i, c) - mean[c]);
      }
    }
  }
  std::vector<double> scale(f, 1.0);
  for (std::size_t c = 0; c < f && n > 0; ++c) {
    const double sd = std::sqrt(m2[c] / static_cast<double>(n));
    if (sd > 1e-12) scale[c] = sd;
  }
  return {mean, scale};
}

TrainReport train(ModelKind kind, std::span<const GraphBatch> batches, const HyperParams& hyper,
                  std::optional<std::array<double, 2>> class_weights) {
  if (batches.empty()) throw DataError("training needs at least one window");
  const std::size_t input_dim = batches.front().features.cols();

  TrainReport report;
  report.seed = hyper.seed;
  report.params = init_params(kind, input_dim, hyper);
  report.params.class_weights = class_weights ? *class_weights : inverse_frequency_weights(batches);
  if (hyper.standardize_inputs) {
    std::tie(report.params.input_shift, report.params.input_scale) = feature_moments(batches);
  }
  auto& params = report.params;

  std::vector<Matrix> m1;
  std::vector<Matrix> m2;
  for (const auto& t : params.tensors) {
    m1.push_back(Matrix::zeros_like(t));
    m2.push_back(Matrix::zeros_like(t));
  }

  const auto& table = kernels::active();
  double beta1_t = 1.0;
  double beta2_t = 1.0;
  for (std::size_t epoch = 0; epoch < hyper.epochs; ++epoch) {
    auto lg = loss_and_gradient(params, batches);
    if (!std::isfinite(lg.loss)) throw TrainingDiverged(epoch);
    report.epoch_loss.push_back(lg.loss);

    beta1_t *= hyper.beta1;
    beta2_t *= hyper.beta2;
    const kernels::AdamStep step{hyper.learning_rate, hyper.beta1, hyper.beta2, hyper.adam_eps, 1.0 - beta1_t,
                                 1.0 - beta2_t};
    for (std::size_t i = 0; i < params.tensors.size(); ++i) {
      table.adam(params.tensors[i].data(), lg.grads[i].data(), m1[i].data(), m2[i].data(), params.tensors[i].size(),
                 step);
    }
  }
  return report;
}

double grad_check(const ModelParams& params, const GraphBatch& batch, double h) {
  const std::span<const GraphBatch> one(&batch, 1);
  const auto analytic = loss_and_gradient(params, one);
  ModelParams probe = params;
  double worst = 0.0;
  for (std::size_t t = 0; t < probe.tensors.size(); ++t) {
    auto values = probe.tensors[t].values();
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + h;
      const double up = weighted_loss(forward(probe, batch), batch.labels, probe.class_weights);
      values[i] = saved - h;
      const double down = weighted_loss(forward(probe, batch), batch.labels, probe.class_weights);
      values[i] = saved;
      const double fd = (up - down) / (2.0 * h);
      const double ad = analytic.grads[t].values()[i];
      const double denom = std::max({std::abs(ad), std::abs(fd), 1e-6});
      worst = std::max(worst, std::abs(ad - fd) / denom);
    }
  }
  return worst;
}

}  // namespace canids
