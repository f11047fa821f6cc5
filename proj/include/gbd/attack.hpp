#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "gbd/graph.hpp"
#include "gbd/rng.hpp"

namespace gbd {

struct TriggerSpec {
  double size_fraction = 0.2;   // trigger nodes / average graph size, (0, 1]
  double density = 0.8;         // edge probability, [0, 1]
  int target_label = 0;
  double poisoning_rate = 0.05;  // fraction of train graphs, (0, 1)
  std::uint64_t seed = 0;

  /// Throws kConfig on out-of-range fields.
  void validate() const;
};

/// Subgraph trigger over local node ids [0, node_count).
struct Trigger {
  int node_count = 0;
  std::vector<Edge> edges;

  bool operator==(const Trigger&) const = default;
};

struct Injection {
  Graph graph;
  /// anchors[i] is the host node that carries trigger node i.
  std::vector<int> anchors;
};

struct PoisonRecord {
  TriggerSpec spec;
  Trigger trigger;
  int target_label = 0;
  std::vector<std::size_t> poisoned_train_indices;
  std::vector<std::vector<int>> anchors;  // parallel to poisoned_train_indices

  bool operator==(const PoisonRecord& o) const {
    return trigger == o.trigger && target_label == o.target_label &&
           poisoned_train_indices == o.poisoned_train_indices && anchors == o.anchors;
  }
};

/// Trigger-embedded copies of the non-target test graphs. Labels stay the
/// ground truth of the source graph.
struct TrojanSet {
  GraphDataset dataset;
  std::vector<std::size_t> source_indices;
  std::vector<std::vector<int>> anchors;
  std::size_t skipped_too_small = 0;
};

/// round_half_up(size_fraction * avg_nodes).
int trigger_node_count(double size_fraction, double avg_nodes);

/// Erdos-Renyi G(n_t, density), resampled until connected (at most 100
/// draws). Pairs are visited in lexicographic order, one uniform01 per pair.
Trigger generate_trigger(const TriggerSpec& spec, double avg_nodes, Rng& rng);
Trigger random_connected_graph(int node_count, double density, Rng& rng);

/// Picks node_count distinct anchors (partial Fisher-Yates), drops every
/// existing edge among them and wires the trigger edges onto them. Returns
/// nullopt when the graph has fewer nodes than the trigger.
std::optional<Injection> inject_trigger(const Graph& graph, const Trigger& trigger, Rng& rng);

/// Index set of the edges of `graph` that lie between anchors, i.e. the
/// embedded trigger edges after inject_trigger.
std::vector<std::size_t> trigger_edge_indices(const Graph& graph, const std::vector<int>& anchors);

/// Poisons round_half_up(poisoning_rate * |train|) uniformly chosen train
/// graphs: trigger injected, label replaced with the target.
std::pair<GraphDataset, PoisonRecord> poison_dataset(const GraphDataset& dataset,
                                                     const DataSplit& split,
                                                     const TriggerSpec& spec);

TrojanSet embed_test_triggers(const GraphDataset& dataset, const DataSplit& split,
                              const PoisonRecord& record);

}  // namespace gbd
