#pragma once

#include <span>
#include <string>
#include <vector>

#include "gbd/explainer.hpp"
#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"

namespace gbd {

/// Detection statistic for one graph. es == fidelity - infidelity exactly.
struct ExplainabilityScore {
  double fidelity = 0.0;
  double infidelity = 0.0;
  double es = 0.0;
  double cv = 0.0;
  double sparsity_used = 0.0;
  int explained_label = 0;
  ImportanceMap importance;
  HardMask hard_mask;
  Prediction prediction;
};

/// Drop in the label probability when the masked edges are removed.
double fidelity(const ModelParams& params, const Graph& graph, const HardMask& mask, int label);
/// Drop in the label probability when only the masked edges are kept.
double infidelity(const ModelParams& params, const Graph& graph, const HardMask& mask, int label);

/// explain -> normalize -> c_v -> sparsity -> harden -> fidelity and
/// infidelity, all against the model's predicted label.
ExplainabilityScore explainability_score(const ModelParams& params, const Graph& graph,
                                         const ExplainerConfig& config);

struct DetectionBoundary {
  /// Flag when es >= threshold.
  double threshold = 0.0;
  /// Quantile of the validation scores; threshold = quantile_value + margin.
  double quantile_value = 0.0;
  double quantile_used = 1.0;
  double margin = 0.0;
  std::vector<double> validation_scores;

  static DetectionBoundary fixed(double threshold);
};

/// Default gap added above the calibrated quantile. Zero keeps the
/// threshold equal to the quantile, so the top validation graph itself
/// sits on the boundary and is flagged under the >= rule.
inline constexpr double kBoundaryMargin = 0.0;

/// Nearest-rank quantile: sorted[ceil(q n) - 1], clamped into range.
double nearest_rank_quantile(std::vector<double> scores, double q);

DetectionBoundary calibrate(const ModelParams& params, std::span<const Graph> validation,
                            const ExplainerConfig& config, double quantile = 1.0,
                            double margin = kBoundaryMargin);

struct DefenseOutcome {
  bool flagged = false;
  Prediction original_prediction;
  Prediction final_prediction;
  Graph sanitized_graph;
  std::vector<std::size_t> deleted_edge_indices;
  ExplainabilityScore score;
  std::string diagnostic;
};

/// Scores the graph; when es >= threshold, deletes the hard-mask edges and
/// re-predicts. Single pass, no re-scoring of the sanitized graph.
DefenseOutcome defend(const ModelParams& params, const Graph& graph, const DetectionBoundary& boundary,
                      const ExplainerConfig& config);

}  // namespace gbd
