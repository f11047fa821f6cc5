#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gbd/graph.hpp"

namespace gbd {

enum class Architecture { kGraphConv, kGin };
enum class Readout { kMean, kSum };
/// Identity exists so tests can build models that are linear in the edge
/// weights.
enum class Activation { kRelu, kIdentity };
/// Which scalar per class gradients and attributions are taken of.
enum class OutputKind { kProbability, kLogit };

struct ModelConfig {
  Architecture architecture = Architecture::kGraphConv;
  std::vector<int> layer_dims{64, 64};
  Readout readout = Readout::kMean;
  Activation activation = Activation::kRelu;
  int num_classes = 2;
  int feature_dim = 0;
  double gin_epsilon = 0.0;
  int mlp_hidden = 64;

  void validate() const;
};

/// One named parameter tensor inside the flat parameter vector. Values are
/// stored row-major.
struct TensorSlot {
  std::string name;
  int rows = 0;
  int cols = 0;
  std::size_t offset = 0;
  std::size_t size() const { return static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols); }
};

std::vector<TensorSlot> parameter_layout(const ModelConfig& config);
std::size_t parameter_count(const ModelConfig& config);

struct ModelParams {
  ModelConfig config;
  std::vector<double> values;

  std::size_t size() const { return values.size(); }
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for every weight and bias,
/// fan_in being the input width of the owning linear map.
ModelParams init_params(const ModelConfig& config, std::uint64_t seed);

struct Prediction {
  Eigen::VectorXd probabilities;
  int predicted_label = 0;
};

/// Lowest index wins ties.
int argmax(const Eigen::VectorXd& v);

/// Cached forward evaluation of one graph under continuous edge weights.
/// Each undirected edge weight scales the messages in both directions.
class ForwardPass {
 public:
  ForwardPass(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights);

  const Eigen::VectorXd& logits() const { return logits_; }
  const Eigen::VectorXd& probabilities() const { return probabilities_; }
  Prediction prediction() const;

  /// Smallest |pre-activation| over all ReLU inputs; gradients are exact only
  /// away from the kinks.
  double min_abs_preactivation() const;

  struct Gradients {
    std::vector<double> params;
    std::vector<double> edge_weights;
  };

  /// Backpropagates an upstream gradient on the logits.
  Gradients backward(const Eigen::VectorXd& d_logits, bool want_params, bool want_edges) const;

  /// Gradient of the logit or probability of `class_index` w.r.t. the logits.
  Eigen::VectorXd output_seed(int class_index, OutputKind kind) const;

 private:
  struct LayerCache {
    Eigen::MatrixXd input;     // H
    Eigen::MatrixXd messages;  // M = A_w H
    Eigen::MatrixXd mixed;     // GIN: (1 + eps) H + M
    Eigen::MatrixXd hidden;    // GIN: first MLP pre-activation
    Eigen::MatrixXd pre;       // layer pre-activation Z
  };

  const ModelParams* params_;
  const Graph* graph_;
  std::vector<double> weights_;
  std::vector<LayerCache> layers_;
  Eigen::MatrixXd final_nodes_;
  Eigen::VectorXd pooled_;
  Eigen::VectorXd logits_;
  Eigen::VectorXd probabilities_;
};

Prediction forward(const ModelParams& params, const Graph& graph);
Prediction forward(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights);

/// Class output for one class, probability by default.
double class_output(const ModelParams& params, const Graph& graph, std::span<const double> edge_weights,
                    int class_index, OutputKind kind = OutputKind::kProbability);

/// Exact reverse-mode d(output_c)/d(w_e) for every undirected edge.
std::vector<double> edge_weight_gradients(const ModelParams& params, const Graph& graph,
                                          std::span<const double> edge_weights, int class_index,
                                          OutputKind kind = OutputKind::kProbability);

/// d(output_c)/d(theta) in parameter_layout order.
std::vector<double> parameter_gradients(const ModelParams& params, const Graph& graph,
                                        std::span<const double> edge_weights, int class_index,
                                        OutputKind kind = OutputKind::kProbability);

/// Cross-entropy of the graph's label; adds its parameter gradient into
/// `grad_accumulator` (same length as params.values).
double cross_entropy(const ModelParams& params, const Graph& graph, std::vector<double>& grad_accumulator);

/// Fraction with a defined "no trials" state.
struct Rate {
  std::size_t hits = 0;
  std::size_t trials = 0;

  bool has_trials() const { return trials > 0; }
  std::optional<double> value() const {
    if (trials == 0) return std::nullopt;
    return static_cast<double>(hits) / static_cast<double>(trials);
  }
};

std::vector<Prediction> predict_batch(const ModelParams& params, std::span<const Graph> graphs);
/// Predicted label equals the graph label.
Rate accuracy(const ModelParams& params, std::span<const Graph> graphs);
/// Predicted label equals `label`.
Rate label_rate(const ModelParams& params, std::span<const Graph> graphs, int label);

struct TrainHyper {
  int epochs = 100;
  double learning_rate = 0.01;
  std::size_t batch_size = 0;  // 0 = full batch
  std::uint64_t seed = 0;
};

struct TrainMonitors {
  std::span<const Graph> clean_test;
  std::span<const Graph> trojan_test;
  int target_label = 0;
};

struct EpochRecord {
  int epoch = 0;
  double loss = 0.0;
  std::optional<double> clean_accuracy;
  std::optional<double> asr;
};

struct TrainReport {
  ModelParams params;
  std::vector<EpochRecord> history;
  std::size_t parameter_count = 0;
};

/// Adam on mean cross-entropy. Batches follow a seeded shuffle per epoch;
/// monitors are evaluated after every epoch. Throws kNumeric on a
/// non-finite loss.
TrainReport train(const ModelConfig& config, std::span<const Graph> train_graphs, const TrainHyper& hyper,
                  const TrainMonitors& monitors = {});

}  // namespace gbd
