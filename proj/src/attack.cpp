#include "gbd/attack.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "gbd/error.hpp"

namespace gbd {

void TriggerSpec::validate() const {
  if (!(size_fraction > 0.0 && size_fraction <= 1.0)) {
    fail(ErrorCode::kConfig, "trigger size fraction must be in (0, 1], got " + std::to_string(size_fraction));
  }
  if (!(density >= 0.0 && density <= 1.0)) {
    fail(ErrorCode::kConfig, "trigger density must be in [0, 1], got " + std::to_string(density));
  }
  if (!(poisoning_rate > 0.0 && poisoning_rate < 1.0)) {
    fail(ErrorCode::kConfig, "poisoning rate must be in (0, 1), got " + std::to_string(poisoning_rate));
  }
  if (target_label < 0) fail(ErrorCode::kConfig, "target label must be non-negative");
}

int trigger_node_count(double size_fraction, double avg_nodes) {
  return static_cast<int>(round_half_up(size_fraction * avg_nodes));
}

namespace {

bool connected(int node_count, const std::vector<Edge>& edges) {
  std::vector<int> parent(static_cast<std::size_t>(node_count));
  std::iota(parent.begin(), parent.end(), 0);
  const auto find = [&](int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  };
  int components = node_count;
  for (const Edge& e : edges) {
    const int a = find(e.u);
    const int b = find(e.v);
    if (a != b) {
      parent[a] = b;
      --components;
    }
  }
  return components == 1;
}

constexpr int kMaxTriggerDraws = 100;

}  // namespace

Trigger random_connected_graph(int node_count, double density, Rng& rng) {
  if (node_count < 2) {
    fail(ErrorCode::kConfig, "trigger needs at least 2 nodes, got " + std::to_string(node_count));
  }
  for (int attempt = 0; attempt < kMaxTriggerDraws; ++attempt) {
    Trigger t{node_count, {}};
    for (int u = 0; u < node_count; ++u) {
      for (int v = u + 1; v < node_count; ++v) {
        if (rng.uniform01() < density) t.edges.push_back({u, v});
      }
    }
    if (connected(node_count, t.edges)) return t;
  }
  fail(ErrorCode::kConfig, "no connected trigger on " + std::to_string(node_count) + " nodes after " +
                               std::to_string(kMaxTriggerDraws) + " draws at density " +
                               std::to_string(density) + "; increase the density");
}

Trigger generate_trigger(const TriggerSpec& spec, double avg_nodes, Rng& rng) {
  spec.validate();
  return random_connected_graph(trigger_node_count(spec.size_fraction, avg_nodes), spec.density, rng);
}

std::optional<Injection> inject_trigger(const Graph& graph, const Trigger& trigger, Rng& rng) {
  const int n = graph.node_count();
  if (n < trigger.node_count) return std::nullopt;

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  for (int i = 0; i < trigger.node_count; ++i) {
    const int j = i + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(n - i)));
    std::swap(order[i], order[j]);
  }
  std::vector<int> anchors(order.begin(), order.begin() + trigger.node_count);

  std::vector<std::uint8_t> is_anchor(static_cast<std::size_t>(n), 0);
  for (int a : anchors) is_anchor[a] = 1;

  std::vector<Edge> edges;
  edges.reserve(graph.edge_count() + trigger.edges.size());
  for (const Edge& e : graph.edges()) {
    if (!(is_anchor[e.u] && is_anchor[e.v])) edges.push_back(e);
  }
  for (const Edge& e : trigger.edges) {
    edges.push_back({std::min(anchors[e.u], anchors[e.v]), std::max(anchors[e.u], anchors[e.v])});
  }
  return Injection{Graph(n, std::move(edges), graph.features(), graph.label()), std::move(anchors)};
}

std::vector<std::size_t> trigger_edge_indices(const Graph& graph, const std::vector<int>& anchors) {
  std::vector<std::uint8_t> is_anchor(static_cast<std::size_t>(graph.node_count()), 0);
  for (int a : anchors) is_anchor[a] = 1;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    const Edge& e = graph.edges()[i];
    if (is_anchor[e.u] && is_anchor[e.v]) out.push_back(i);
  }
  return out;
}

std::pair<GraphDataset, PoisonRecord> poison_dataset(const GraphDataset& dataset, const DataSplit& split,
                                                     const TriggerSpec& spec) {
  spec.validate();
  if (spec.target_label >= dataset.num_classes) {
    fail(ErrorCode::kConfig, "target label " + std::to_string(spec.target_label) + " outside [0, " +
                                 std::to_string(dataset.num_classes) + ")");
  }
  Rng trigger_rng(derive_seed(spec.seed, "trigger"));
  PoisonRecord record;
  record.spec = spec;
  record.target_label = spec.target_label;
  record.trigger = generate_trigger(spec, average_node_count(dataset), trigger_rng);

  const auto wanted = static_cast<std::size_t>(
      round_half_up(spec.poisoning_rate * static_cast<double>(split.train.size())));
  std::vector<std::size_t> eligible;
  for (std::size_t i : split.train) {
    if (dataset.graphs.at(i).node_count() >= record.trigger.node_count) eligible.push_back(i);
  }
  if (eligible.size() < wanted) {
    fail(ErrorCode::kPrecondition, "need " + std::to_string(wanted) + " poisoning victims with at least " +
                                       std::to_string(record.trigger.node_count) + " nodes, only " +
                                       std::to_string(eligible.size()) + " of " +
                                       std::to_string(split.train.size()) + " train graphs qualify");
  }
  Rng victim_rng(derive_seed(spec.seed, "victims"));
  victim_rng.shuffle(eligible);
  eligible.resize(wanted);
  std::sort(eligible.begin(), eligible.end());

  GraphDataset poisoned = dataset;
  for (std::size_t index : eligible) {
    Rng rng(derive_seed(spec.seed, "inject", index));
    auto injected = inject_trigger(dataset.graphs[index], record.trigger, rng);
    poisoned.graphs[index] = injected->graph.with_label(spec.target_label);
    record.anchors.push_back(std::move(injected->anchors));
  }
  record.poisoned_train_indices = std::move(eligible);
  return {std::move(poisoned), std::move(record)};
}

TrojanSet embed_test_triggers(const GraphDataset& dataset, const DataSplit& split,
                              const PoisonRecord& record) {
  TrojanSet out;
  out.dataset.name = dataset.name + "-trojan";
  out.dataset.num_classes = dataset.num_classes;
  out.dataset.feature_dim = dataset.feature_dim;
  out.dataset.original_class_labels = dataset.original_class_labels;
  out.dataset.original_node_labels = dataset.original_node_labels;
  for (std::size_t index : split.test) {
    const Graph& source = dataset.graphs.at(index);
    if (source.label() == record.target_label) continue;
    Rng rng(derive_seed(record.spec.seed, "test-inject", index));
    auto injected = inject_trigger(source, record.trigger, rng);
    if (!injected) {
      ++out.skipped_too_small;
      continue;
    }
    out.dataset.graphs.push_back(std::move(injected->graph));
    out.source_indices.push_back(index);
    out.anchors.push_back(std::move(injected->anchors));
  }
  return out;
}

}  // namespace gbd
