#include "gbd/gnn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "gbd/error.hpp"
#include "gbd/rng.hpp"

namespace gbd {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstView = Eigen::Map<const RowMatrix>;
using MutableView = Eigen::Map<RowMatrix>;

ConstView view(const std::vector<double>& values, const TensorSlot& slot) {
  return ConstView(values.data() + slot.offset, slot.rows, slot.cols);
}

MutableView view(std::vector<double>& values, const TensorSlot& slot) {
  return MutableView(values.data() + slot.offset, slot.rows, slot.cols);
}

int slots_per_layer(Architecture a) { return a == Architecture::kGraphConv ? 3 : 4; }

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation a) {
  return a == Activation::kRelu ? Eigen::MatrixXd(z.cwiseMax(0.0)) : z;
}

// Multiplies the upstream gradient by the activation derivative in place.
void activation_backward(Eigen::MatrixXd& grad, const Eigen::MatrixXd& pre, Activation a) {
  if (a == Activation::kRelu) grad = (pre.array() > 0.0).select(grad, 0.0);
}

// M = A_w H with A_w symmetric; each undirected edge carries one weight.
Eigen::MatrixXd aggregate(const Graph& graph, const std::vector<double>& weights, const Eigen::MatrixXd& h) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(h.rows(), h.cols());
  const auto& edges = graph.edges();
  for (std::size_t e = 0; e < edges.size(); ++e) {
    m.row(edges[e].v) += weights[e] * h.row(edges[e].u);
    m.row(edges[e].u) += weights[e] * h.row(edges[e].v);
  }
  return m;
}

}  // namespace

void ModelConfig::validate() const {
  if (layer_dims.empty()) fail(ErrorCode::kConfig, "model needs at least one layer");
  for (int d : layer_dims) {
    if (d <= 0) fail(ErrorCode::kConfig, "layer dimensions must be positive");
  }
  if (num_classes < 2) fail(ErrorCode::kConfig, "model needs at least two classes");
  if (feature_dim <= 0) fail(ErrorCode::kConfig, "feature dimension must be positive");
  if (architecture == Architecture::kGin && mlp_hidden <= 0) {
    fail(ErrorCode::kConfig, "GIN mlp_hidden must be positive");
  }
}

std::vector<TensorSlot> parameter_layout(const ModelConfig& config) {
  config.validate();
  std::vector<TensorSlot> slots;
  std::size_t offset = 0;
  const auto add = [&](std::string name, int rows, int cols) {
    slots.push_back({std::move(name), rows, cols, offset});
    offset += slots.back().size();
  };
  int in = config.feature_dim;
  for (std::size_t l = 0; l < config.layer_dims.size(); ++l) {
    const int out = config.layer_dims[l];
    const std::string prefix = (config.architecture == Architecture::kGraphConv ? "conv" : "gin") + std::to_string(l);
    if (config.architecture == Architecture::kGraphConv) {
      add(prefix + ".root", in, out);
      add(prefix + ".neighbor", in, out);
      add(prefix + ".bias", 1, out);
    } else {
      add(prefix + ".mlp0.weight", in, config.mlp_hidden);
      add(prefix + ".mlp0.bias", 1, config.mlp_hidden);
      add(prefix + ".mlp1.weight", config.mlp_hidden, out);
      add(prefix + ".mlp1.bias", 1, out);
    }
    in = out;
  }
  add("head.weight", in, config.num_classes);
  add("head.bias", 1, config.num_classes);
  return slots;
}

std::size_t parameter_count(const ModelConfig& config) {
  const auto slots = parameter_layout(config);
  return slots.back().offset + slots.back().size();
}

ModelParams init_params(const ModelConfig& config, std::uint64_t seed) {
  const auto slots = parameter_layout(config);
  ModelParams params{config, std::vector<double>(slots.back().offset + slots.back().size())};
  Rng rng(seed);
  int fan_in = 1;
  for (const TensorSlot& slot : slots) {
    // Biases follow their weight matrix and share its fan-in.
    if (slot.rows != 1 || slot.name.find("bias") == std::string::npos) fan_in = slot.rows;
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < slot.size(); ++i) params.values[slot.offset + i] = rng.uniform(-bound, bound);
  }
  return params;
}

int argmax(const Eigen::VectorXd& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

// --- forward / backward ----------------------------------------------------

ForwardPass::ForwardPass(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights)
    : params_(&params), graph_(&graph), weights_(edge_weights.begin(), edge_weights.end()) {
  const ModelConfig& config = params.config;
  if (weights_.size() != graph.edge_count()) {
    fail(ErrorCode::kInvalidArgument, "edge weight vector has length " + std::to_string(weights_.size()) +
                                          ", graph has " + std::to_string(graph.edge_count()) + " edges");
  }
  if (graph.feature_dim() != config.feature_dim) {
    fail(ErrorCode::kInvalidArgument, "graph feature dimension " + std::to_string(graph.feature_dim()) +
                                          " does not match model input " + std::to_string(config.feature_dim));
  }
  const auto slots = parameter_layout(config);
  if (params.values.size() != slots.back().offset + slots.back().size()) {
    fail(ErrorCode::kInvalidArgument, "parameter vector does not match the model configuration");
  }

  const int per_layer = slots_per_layer(config.architecture);
  Eigen::MatrixXd h = graph.features();
  layers_.reserve(config.layer_dims.size());
  for (std::size_t l = 0; l < config.layer_dims.size(); ++l) {
    const TensorSlot* s = &slots[l * static_cast<std::size_t>(per_layer)];
    LayerCache cache;
    cache.messages = aggregate(graph, weights_, h);
    if (config.architecture == Architecture::kGraphConv) {
      cache.pre = h * view(params.values, s[0]) + cache.messages * view(params.values, s[1]);
      cache.pre.rowwise() += view(params.values, s[2]).row(0);
    } else {
      cache.mixed = (1.0 + config.gin_epsilon) * h + cache.messages;
      cache.hidden = cache.mixed * view(params.values, s[0]);
      cache.hidden.rowwise() += view(params.values, s[1]).row(0);
      cache.pre = activate(cache.hidden, config.activation) * view(params.values, s[2]);
      cache.pre.rowwise() += view(params.values, s[3]).row(0);
    }
    cache.input = std::move(h);
    h = activate(cache.pre, config.activation);
    layers_.push_back(std::move(cache));
  }
  final_nodes_ = std::move(h);

  pooled_ = final_nodes_.colwise().sum().transpose();
  if (config.readout == Readout::kMean) pooled_ /= static_cast<double>(graph.node_count());

  const TensorSlot& head_w = slots[slots.size() - 2];
  const TensorSlot& head_b = slots.back();
  logits_ = view(params.values, head_w).transpose() * pooled_ + view(params.values, head_b).row(0).transpose();
  const double shift = logits_.maxCoeff();
  probabilities_ = (logits_.array() - shift).exp();
  probabilities_ /= probabilities_.sum();
}

Prediction ForwardPass::prediction() const { return {probabilities_, argmax(probabilities_)}; }

double ForwardPass::min_abs_preactivation() const {
  double best = std::numeric_limits<double>::infinity();
  if (params_->config.activation != Activation::kRelu) return best;
  for (const LayerCache& c : layers_) {
    best = std::min(best, c.pre.cwiseAbs().minCoeff());
    if (c.hidden.size() > 0) best = std::min(best, c.hidden.cwiseAbs().minCoeff());
  }
  return best;
}

Eigen::VectorXd ForwardPass::output_seed(int class_index, OutputKind kind) const {
  if (class_index < 0 || class_index >= logits_.size()) {
    fail(ErrorCode::kInvalidArgument, "class index " + std::to_string(class_index) + " out of range");
  }
  Eigen::VectorXd seed = Eigen::VectorXd::Zero(logits_.size());
  if (kind == OutputKind::kLogit) {
    seed[class_index] = 1.0;
  } else {
    // d p_c / d z_j = p_c (delta_cj - p_j)
    const double pc = probabilities_[class_index];
    seed = -pc * probabilities_;
    seed[class_index] += pc;
  }
  return seed;
}

ForwardPass::Gradients ForwardPass::backward(const Eigen::VectorXd& d_logits, bool want_params,
                                             bool want_edges) const {
  const ModelConfig& config = params_->config;
  const auto slots = parameter_layout(config);
  const std::vector<double>& values = params_->values;
  const int per_layer = slots_per_layer(config.architecture);

  Gradients out;
  if (want_params) out.params.assign(values.size(), 0.0);
  if (want_edges) out.edge_weights.assign(weights_.size(), 0.0);

  const TensorSlot& head_w = slots[slots.size() - 2];
  const TensorSlot& head_b = slots.back();
  if (want_params) {
    view(out.params, head_w) += pooled_ * d_logits.transpose();
    view(out.params, head_b).row(0) += d_logits.transpose();
  }
  Eigen::VectorXd d_pooled = view(values, head_w) * d_logits;
  if (config.readout == Readout::kMean) d_pooled /= static_cast<double>(graph_->node_count());
  Eigen::MatrixXd d_h = d_pooled.transpose().replicate(graph_->node_count(), 1);

  const auto& edges = graph_->edges();
  for (std::size_t l = layers_.size(); l-- > 0;) {
    const LayerCache& c = layers_[l];
    const TensorSlot* s = &slots[l * static_cast<std::size_t>(per_layer)];
    const bool need_input_grad = l > 0;

    Eigen::MatrixXd d_pre = std::move(d_h);
    activation_backward(d_pre, c.pre, config.activation);

    Eigen::MatrixXd d_input;
    Eigen::MatrixXd d_messages;
    if (config.architecture == Architecture::kGraphConv) {
      if (want_params) {
        view(out.params, s[0]) += c.input.transpose() * d_pre;
        view(out.params, s[1]) += c.messages.transpose() * d_pre;
        view(out.params, s[2]).row(0) += d_pre.colwise().sum();
      }
      d_messages = d_pre * view(values, s[1]).transpose();
      if (need_input_grad) d_input = d_pre * view(values, s[0]).transpose();
    } else {
      const Eigen::MatrixXd hidden_out = activate(c.hidden, config.activation);
      if (want_params) {
        view(out.params, s[2]) += hidden_out.transpose() * d_pre;
        view(out.params, s[3]).row(0) += d_pre.colwise().sum();
      }
      Eigen::MatrixXd d_hidden = d_pre * view(values, s[2]).transpose();
      activation_backward(d_hidden, c.hidden, config.activation);
      if (want_params) {
        view(out.params, s[0]) += c.mixed.transpose() * d_hidden;
        view(out.params, s[1]).row(0) += d_hidden.colwise().sum();
      }
      d_messages = d_hidden * view(values, s[0]).transpose();
      if (need_input_grad) d_input = (1.0 + config.gin_epsilon) * d_messages;
    }

    for (std::size_t e = 0; e < edges.size(); ++e) {
      const int u = edges[e].u;
      const int v = edges[e].v;
      if (want_edges) {
        out.edge_weights[e] += d_messages.row(v).dot(c.input.row(u)) + d_messages.row(u).dot(c.input.row(v));
      }
      if (need_input_grad) {
        d_input.row(u) += weights_[e] * d_messages.row(v);
        d_input.row(v) += weights_[e] * d_messages.row(u);
      }
    }
    if (!need_input_grad) break;
    d_h = std::move(d_input);
  }
  return out;
}

Prediction forward(const ModelParams& params, const Graph& graph) {
  const std::vector<double> ones(graph.edge_count(), 1.0);
  return forward(params, graph, ones);
}

Prediction forward(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights) {
  return ForwardPass(params, graph, edge_weights).prediction();
}

double class_output(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights,
                    int class_index, OutputKind kind) {
  ForwardPass pass(params, graph, edge_weights);
  if (class_index < 0 || class_index >= pass.logits().size()) {
    fail(ErrorCode::kInvalidArgument, "class index " + std::to_string(class_index) + " out of range");
  }
  return kind == OutputKind::kLogit ? pass.logits()[class_index] : pass.probabilities()[class_index];
}

std::vector<double> edge_weight_gradients(const ModelParams& params, const Graph& graph,
                                          std::span<const double> edge_weights, int class_index,
                                          OutputKind kind) {
  ForwardPass pass(params, graph, edge_weights);
  if (graph.edge_count() == 0) {
    pass.output_seed(class_index, kind);  // still validates the class index
    return {};
  }
  return pass.backward(pass.output_seed(class_index, kind), false, true).edge_weights;
}

std::vector<double> parameter_gradients(const ModelParams& params, const Graph& graph,
                                        std::span<const double> edge_weights, int class_index,
                                        OutputKind kind) {
  ForwardPass pass(params, graph, edge_weights);
  return pass.backward(pass.output_seed(class_index, kind), true, false).params;
}

double cross_entropy(const ModelParams& params, const Graph& graph, std::vector<double>& grad_accumulator) {
  const std::vector<double> ones(graph.edge_count(), 1.0);
  ForwardPass pass(params, graph, ones);
  const int y = graph.label();
  if (y < 0 || y >= pass.logits().size()) fail(ErrorCode::kInvalidArgument, "graph label outside model classes");
  // log-softmax for stability
  const Eigen::VectorXd& z = pass.logits();
  const double shift = z.maxCoeff();
  const double log_sum = shift + std::log((z.array() - shift).exp().sum());
  const double loss = log_sum - z[y];
  Eigen::VectorXd d_logits = pass.probabilities();
  d_logits[y] -= 1.0;
  const auto grads = pass.backward(d_logits, true, false);
  for (std::size_t i = 0; i < grads.params.size(); ++i) grad_accumulator[i] += grads.params[i];
  return loss;
}

std::vector<Prediction> predict_batch(const ModelParams& params, std::span<const Graph> graphs) {
  std::vector<Prediction> out;
  out.reserve(graphs.size());
  for (const Graph& g : graphs) out.push_back(forward(params, g));
  return out;
}

Rate accuracy(const ModelParams& params, std::span<const Graph> graphs) {
  Rate r;
  for (const Graph& g : graphs) {
    ++r.trials;
    if (forward(params, g).predicted_label == g.label()) ++r.hits;
  }
  return r;
}

Rate label_rate(const ModelParams& params, std::span<const Graph> graphs, int label) {
  Rate r;
  for (const Graph& g : graphs) {
    ++r.trials;
    if (forward(params, g).predicted_label == label) ++r.hits;
  }
  return r;
}

// --- training --------------------------------------------------------------

TrainReport train(const ModelConfig& config, std::span<const Graph> train_graphs, const TrainHyper& hyper,
                  const TrainMonitors& monitors) {
  config.validate();
  if (train_graphs.empty()) fail(ErrorCode::kPrecondition, "training set is empty");
  if (hyper.epochs < 0) fail(ErrorCode::kConfig, "epochs must be non-negative");
  if (!(hyper.learning_rate > 0.0)) fail(ErrorCode::kConfig, "learning rate must be positive");

  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kAdamEps = 1e-8;

  TrainReport report;
  report.params = init_params(config, derive_seed(hyper.seed, "init"));
  report.parameter_count = report.params.size();
  std::vector<double>& theta = report.params.values;
  std::vector<double> first(theta.size(), 0.0);
  std::vector<double> second(theta.size(), 0.0);
  std::vector<double> grad(theta.size(), 0.0);
  long step = 0;

  const std::size_t n = train_graphs.size();
  const std::size_t batch = hyper.batch_size == 0 ? n : std::min(hyper.batch_size, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    Rng rng(derive_seed(hyper.seed, "shuffle", static_cast<std::uint64_t>(epoch)));
    rng.shuffle(order);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t k = start; k < end; ++k) batch_loss += cross_entropy(report.params, train_graphs[order[k]], grad);
      if (!std::isfinite(batch_loss)) {
        fail(ErrorCode::kNumeric, "non-finite training loss at epoch " + std::to_string(epoch) +
                                      " (learning rate " + std::to_string(hyper.learning_rate) + ")");
      }
      epoch_loss += batch_loss;
      ++step;
      const double scale = 1.0 / static_cast<double>(end - start);
      const double correction1 = 1.0 - std::pow(kBeta1, static_cast<double>(step));
      const double correction2 = 1.0 - std::pow(kBeta2, static_cast<double>(step));
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] * scale;
        first[i] = kBeta1 * first[i] + (1.0 - kBeta1) * g;
        second[i] = kBeta2 * second[i] + (1.0 - kBeta2) * g * g;
        theta[i] -= hyper.learning_rate * (first[i] / correction1) / (std::sqrt(second[i] / correction2) + kAdamEps);
      }
    }
    EpochRecord record;
    record.epoch = epoch;
    record.loss = epoch_loss / static_cast<double>(n);
    record.clean_accuracy = accuracy(report.params, monitors.clean_test).value();
    record.asr = label_rate(report.params, monitors.trojan_test, monitors.target_label).value();
    report.history.push_back(record);
  }
  return report;
}

}  // namespace gbd
