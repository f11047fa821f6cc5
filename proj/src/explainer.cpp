#include "gbd/explainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "gbd/error.hpp"
#include "gbd/rng.hpp"

namespace gbd {

void ExplainerConfig::validate() const {
  if (ig_steps < 1) fail(ErrorCode::kConfig, "integrated gradients needs at least one step");
  if (!(sparsity_min >= 0.0 && sparsity_max <= 1.0 && sparsity_min < sparsity_max)) {
    fail(ErrorCode::kConfig, "sparsity bounds must satisfy 0 <= min < max <= 1");
  }
}

bool ImportanceMap::all_zero() const {
  return std::all_of(scores.begin(), scores.end(), [](double s) { return s == 0.0; });
}

std::size_t HardMask::selected() const {
  return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
}

std::vector<double> integrated_gradients(const ModelParams& params, const Graph& graph, int class_index, int steps,
                                         OutputKind kind) {
  if (steps < 1) fail(ErrorCode::kInvalidArgument, "integrated gradients needs at least one step");
  const std::size_t m = graph.edge_count();
  std::vector<double> total(m, 0.0);
  if (m == 0) return total;
  std::vector<double> weights(m);
  for (int k = 1; k <= steps; ++k) {
    std::fill(weights.begin(), weights.end(), static_cast<double>(k) / steps);
    const auto grad = edge_weight_gradients(params, graph, weights, class_index, kind);
    for (std::size_t e = 0; e < m; ++e) total[e] += grad[e];
  }
  // (input - baseline) is 1 for every edge.
  for (double& t : total) t /= steps;
  return total;
}

std::vector<double> occlusion(const ModelParams& params, const Graph& graph, int class_index, OutputKind kind) {
  const std::size_t m = graph.edge_count();
  std::vector<double> weights(m, 1.0);
  const double full = class_output(params, graph, weights, class_index, kind);
  std::vector<double> out(m);
  for (std::size_t e = 0; e < m; ++e) {
    weights[e] = 0.0;
    out[e] = full - class_output(params, graph, weights, class_index, kind);
    weights[e] = 1.0;
  }
  return out;
}

ImportanceMap normalize(const std::vector<double>& raw) {
  ImportanceMap map;
  map.scores.resize(raw.size());
  double peak = 0.0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    map.scores[i] = std::max(raw[i], 0.0);
    peak = std::max(peak, map.scores[i]);
  }
  if (peak > 0.0) {
    for (double& s : map.scores) s /= peak;
  }
  return map;
}

double coefficient_of_variation(const std::vector<double>& scores) {
  if (scores.empty()) fail(ErrorCode::kInvalidArgument, "coefficient of variation of an empty map");
  const double n = static_cast<double>(scores.size());
  const double mean = std::accumulate(scores.begin(), scores.end(), 0.0) / n;
  if (mean < 1e-12) return 0.0;
  double sq = 0.0;
  for (double s : scores) sq += (s - mean) * (s - mean);
  return std::sqrt(sq / n) / mean;
}

double sparsity_from_cv(double cv, double s_min, double s_max) { return std::clamp(cv, s_min, s_max); }

HardMask harden(const ImportanceMap& map, double sparsity) {
  if (!(sparsity >= 0.0 && sparsity <= 1.0)) fail(ErrorCode::kInvalidArgument, "sparsity must be in [0, 1]");
  const std::size_t m = map.scores.size();
  HardMask mask{std::vector<std::uint8_t>(m, 0), sparsity};
  if (m == 0 || map.all_zero()) return mask;

  auto k = static_cast<std::size_t>(round_half_up((1.0 - sparsity) * static_cast<double>(m)));
  k = std::clamp<std::size_t>(k, 1, m);
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return map.scores[a] > map.scores[b]; });
  for (std::size_t i = 0; i < k; ++i) mask.bits[order[i]] = 1;
  return mask;
}

ImportanceMap explain(const ModelParams& params, const Graph& graph, int class_index, const ExplainerConfig& config) {
  config.validate();
  const std::vector<double> raw = config.method == ExplainMethod::kIntegratedGradients
                                      ? integrated_gradients(params, graph, class_index, config.ig_steps, config.output)
                                      : occlusion(params, graph, class_index, config.output);
  ImportanceMap map = normalize(raw);
  map.explained_label = class_index;
  map.method = config.method;
  map.steps = config.method == ExplainMethod::kIntegratedGradients ? config.ig_steps : 0;
  return map;
}

std::string to_string(ExplainMethod method) {
  return method == ExplainMethod::kIntegratedGradients ? "integrated_gradients" : "occlusion";
}

ExplainMethod explain_method_from_string(const std::string& name) {
  if (name == "integrated_gradients" || name == "ig") return ExplainMethod::kIntegratedGradients;
  if (name == "occlusion") return ExplainMethod::kOcclusion;
  fail(ErrorCode::kConfig, "unknown explainer method '" + name + "'");
}

}  // namespace gbd
