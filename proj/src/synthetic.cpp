#include "gbd/synthetic.hpp"

#include <algorithm>
#include <set>

#include "gbd/rng.hpp"

namespace gbd {

namespace {

constexpr int kAtomTypes = 38;

// Mostly C, O, N with a tail of rarer atoms.
int common_atom(Rng& rng) {
  const double u = rng.uniform01();
  if (u < 0.60) return 0;
  if (u < 0.78) return 1;
  if (u < 0.92) return 2;
  return 6 + static_cast<int>(rng.uniform_index(kAtomTypes - 6));
}

// Atom types 3-5 mark the active class.
int marker_atom(Rng& rng) { return 3 + static_cast<int>(rng.uniform_index(3)); }

Graph molecule(int label, Rng& rng) {
  const int n = 10 + static_cast<int>(rng.uniform_index(16));
  std::vector<int> degree(static_cast<std::size_t>(n), 0);
  std::set<Edge> edges;
  for (int v = 1; v < n; ++v) {
    int parent = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(v)));
    for (int tries = 0; tries < 8 && degree[parent] >= 4; ++tries) {
      parent = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(v)));
    }
    edges.insert({parent, v});
    ++degree[parent];
    ++degree[v];
  }
  const int rings = static_cast<int>(rng.uniform_index(3));
  for (int r = 0; r < rings; ++r) {
    const int a = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    const int b = static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n)));
    if (a == b || degree[a] >= 4 || degree[b] >= 4) continue;
    if (edges.insert({std::min(a, b), std::max(a, b)}).second) {
      ++degree[a];
      ++degree[b];
    }
  }

  std::vector<int> atoms(static_cast<std::size_t>(n));
  for (int& a : atoms) a = common_atom(rng);
  if (label == 0) {
    const int markers = 2 + static_cast<int>(rng.uniform_index(3));
    for (int k = 0; k < markers; ++k) atoms[rng.uniform_index(atoms.size())] = marker_atom(rng);
  } else if (rng.uniform01() < 0.1) {
    atoms[rng.uniform_index(atoms.size())] = marker_atom(rng);
  }

  Eigen::MatrixXd features = Eigen::MatrixXd::Zero(n, kAtomTypes);
  for (int v = 0; v < n; ++v) features(v, atoms[v]) = 1.0;
  return Graph(n, std::vector<Edge>(edges.begin(), edges.end()), std::move(features), label);
}

}  // namespace

GraphDataset make_aids_like_dataset(std::uint64_t seed, std::size_t graph_count) {
  GraphDataset d;
  d.name = "AIDS";
  d.num_classes = 2;
  d.feature_dim = kAtomTypes;
  d.original_class_labels = {0, 1};
  for (int t = 0; t < kAtomTypes; ++t) d.original_node_labels.push_back(t);
  Rng rng(derive_seed(seed, "aids-like"));
  d.graphs.reserve(graph_count);
  for (std::size_t i = 0; i < graph_count; ++i) {
    const int label = (i % 5 == 0) ? 0 : 1;
    d.graphs.push_back(molecule(label, rng));
  }
  return d;
}

}  // namespace gbd
