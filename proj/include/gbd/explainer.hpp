#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"

namespace gbd {

enum class ExplainMethod { kIntegratedGradients, kOcclusion };

struct ExplainerConfig {
  ExplainMethod method = ExplainMethod::kIntegratedGradients;
  int ig_steps = 50;
  double sparsity_min = 0.1;
  double sparsity_max = 0.9;
  OutputKind output = OutputKind::kProbability;

  void validate() const;
};

/// Per-edge importance in [0, 1]; the maximum is 1 unless every score is 0.
struct ImportanceMap {
  std::vector<double> scores;
  int explained_label = 0;
  ExplainMethod method = ExplainMethod::kIntegratedGradients;
  int steps = 0;

  bool all_zero() const;
};

struct HardMask {
  std::vector<std::uint8_t> bits;
  double sparsity_used = 0.0;

  std::size_t selected() const;
};

/// Right-Riemann integrated gradients from the all-zero edge weights to the
/// all-ones weights: (1/steps) * sum_k grad(k/steps * 1).
std::vector<double> integrated_gradients(const ModelParams& params, const Graph& graph, int class_index,
                                         int steps, OutputKind kind = OutputKind::kProbability);

/// f_c(graph) - f_c(graph with edge e weighted 0), for every edge.
std::vector<double> occlusion(const ModelParams& params, const Graph& graph, int class_index,
                              OutputKind kind = OutputKind::kProbability);

/// Clamps negatives to zero and divides by the maximum.
ImportanceMap normalize(const std::vector<double>& raw);

/// Population standard deviation over mean; 0 when the mean is below 1e-12.
double coefficient_of_variation(const std::vector<double>& scores);

double sparsity_from_cv(double cv, double s_min, double s_max);

/// Marks the k = round_half_up((1 - sparsity) * |E|) highest-scoring edges
/// (k >= 1 for a nonzero map). Ties go to the lower edge index. An all-zero
/// map gives an empty mask.
HardMask harden(const ImportanceMap& map, double sparsity);

ImportanceMap explain(const ModelParams& params, const Graph& graph, int class_index,
                      const ExplainerConfig& config);

std::string to_string(ExplainMethod method);
ExplainMethod explain_method_from_string(const std::string& name);

}  // namespace gbd
