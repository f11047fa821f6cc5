#pragma once

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "gbd/error.hpp"
#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"
#include "gbd/rng.hpp"

namespace gbd::test {

inline std::filesystem::path data_dir() { return GBD_TEST_DATA_DIR; }

/// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("gbd-test-" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

/// Random simple graph with one-hot features over `dim` types.
inline Graph random_graph(Rng& rng, int min_nodes, int max_nodes, int dim, double p, int label = 0) {
  const int n = min_nodes + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_nodes - min_nodes + 1)));
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform01() < p) edges.push_back({u, v});
    }
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, dim);
  for (int v = 0; v < n; ++v) x(v, static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(dim)))) = 1.0;
  return Graph(n, std::move(edges), std::move(x), label);
}

inline ModelConfig small_model(Architecture arch, int dim, int classes, Readout readout = Readout::kMean,
                               Activation act = Activation::kRelu) {
  ModelConfig c;
  c.architecture = arch;
  c.layer_dims = {5, 4};
  c.mlp_hidden = 6;
  c.gin_epsilon = 0.3;
  c.readout = readout;
  c.activation = act;
  c.feature_dim = dim;
  c.num_classes = classes;
  return c;
}

/// |a - b| <= atol + rtol * |b|
inline bool close(double a, double b, double rtol, double atol) { return std::abs(a - b) <= atol + rtol * std::abs(b); }

template <class F>
ErrorCode error_code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected gbd::Error");
  return ErrorCode::kInternal;
}

}  // namespace gbd::test
