#include "gbd/defense.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gbd/error.hpp"

namespace gbd {

namespace {

double label_probability(const ModelParams& params, const Graph& graph, int label) {
  const Prediction p = forward(params, graph);
  if (label < 0 || label >= p.probabilities.size()) fail(ErrorCode::kInvalidArgument, "label out of range");
  return p.probabilities[label];
}

void check_mask(const Graph& graph, const HardMask& mask) {
  if (mask.bits.size() != graph.edge_count()) {
    fail(ErrorCode::kInvalidArgument, "mask has " + std::to_string(mask.bits.size()) + " bits for " +
                                          std::to_string(graph.edge_count()) + " edges");
  }
}

}  // namespace

double fidelity(const ModelParams& params, const Graph& graph, const HardMask& mask, int label) {
  check_mask(graph, mask);
  const auto important = indices_of(mask.bits);
  return label_probability(params, graph, label) - label_probability(params, remove_edges(graph, important), label);
}

double infidelity(const ModelParams& params, const Graph& graph, const HardMask& mask, int label) {
  check_mask(graph, mask);
  const auto important = indices_of(mask.bits);
  return label_probability(params, graph, label) - label_probability(params, keep_edges(graph, important), label);
}

ExplainabilityScore explainability_score(const ModelParams& params, const Graph& graph,
                                         const ExplainerConfig& config) {
  config.validate();
  ExplainabilityScore score;
  score.prediction = forward(params, graph);
  score.explained_label = score.prediction.predicted_label;
  score.importance = explain(params, graph, score.explained_label, config);
  score.cv = score.importance.scores.empty() ? 0.0 : coefficient_of_variation(score.importance.scores);
  score.sparsity_used = sparsity_from_cv(score.cv, config.sparsity_min, config.sparsity_max);
  score.hard_mask = harden(score.importance, score.sparsity_used);
  score.fidelity = fidelity(params, graph, score.hard_mask, score.explained_label);
  score.infidelity = infidelity(params, graph, score.hard_mask, score.explained_label);
  score.es = score.fidelity - score.infidelity;
  return score;
}

DetectionBoundary DetectionBoundary::fixed(double threshold) {
  DetectionBoundary b;
  b.threshold = threshold;
  b.quantile_value = threshold;
  return b;
}

double nearest_rank_quantile(std::vector<double> scores, double q) {
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "quantile of an empty score list");
  if (!(q > 0.0 && q <= 1.0)) fail(ErrorCode::kInvalidArgument, "quantile must be in (0, 1]");
  std::sort(scores.begin(), scores.end());
  const double rank = std::ceil(q * static_cast<double>(scores.size()));
  const auto index = static_cast<std::size_t>(std::clamp(rank, 1.0, static_cast<double>(scores.size()))) - 1;
  return scores[index];
}

DetectionBoundary calibrate(const ModelParams& params, std::span<const Graph> validation,
                            const ExplainerConfig& config, double quantile, double margin) {
  if (validation.empty()) fail(ErrorCode::kPrecondition, "calibration needs a non-empty validation set");
  DetectionBoundary boundary;
  boundary.validation_scores.reserve(validation.size());
  for (const Graph& g : validation) boundary.validation_scores.push_back(explainability_score(params, g, config).es);
  boundary.quantile_used = quantile;
  boundary.margin = margin;
  boundary.quantile_value = nearest_rank_quantile(boundary.validation_scores, quantile);
  boundary.threshold = boundary.quantile_value + margin;
  return boundary;
}

DefenseOutcome defend(const ModelParams& params, const Graph& graph, const DetectionBoundary& boundary,
                      const ExplainerConfig& config) {
  DefenseOutcome out;
  out.score = explainability_score(params, graph, config);
  out.original_prediction = out.score.prediction;
  out.final_prediction = out.original_prediction;
  out.sanitized_graph = graph;
  out.flagged = out.score.es >= boundary.threshold;
  if (!out.flagged) return out;
  out.deleted_edge_indices = indices_of(out.score.hard_mask.bits);
  if (out.deleted_edge_indices.empty()) {
    out.diagnostic = graph.edge_count() == 0 ? "flagged graph has no edges; passed through"
                                             : "flagged graph has an empty mask; passed through";
    return out;
  }
  out.sanitized_graph = remove_edges(graph, out.deleted_edge_indices);
  out.final_prediction = forward(params, out.sanitized_graph);
  return out;
}

}  // namespace gbd
