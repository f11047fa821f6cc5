#include <numeric>
#include <set>

#include "gbd/attack.hpp"
#include "support.hpp"

using namespace gbd;
using gbd::test::error_code_of;

namespace {

bool is_connected(int n, const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (const Edge& e : edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  std::vector<int> stack{0};
  seen[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    const int u = stack.back();
    stack.pop_back();
    for (int v : adj[u]) {
      if (!seen[v]) {
        seen[v] = 1;
        ++count;
        stack.push_back(v);
      }
    }
  }
  return count == n;
}

GraphDataset random_dataset(std::size_t count, std::uint64_t seed) {
  Rng rng(seed);
  GraphDataset d;
  d.name = "random";
  d.num_classes = 2;
  d.feature_dim = 3;
  for (std::size_t i = 0; i < count; ++i) {
    d.graphs.push_back(gbd::test::random_graph(rng, 6, 14, 3, 0.3, static_cast<int>(i % 2)));
  }
  return d;
}

}  // namespace

TEST_CASE("attack: trigger size from the average graph size") {
  CHECK(trigger_node_count(0.2, 17.9308510638) == 4);
  CHECK(trigger_node_count(0.25, 10.0) == 3);
  CHECK(trigger_node_count(1.0, 5.0) == 5);
}

TEST_CASE("attack: spec validation") {
  CHECK(error_code_of([] { TriggerSpec{0.2, 0.8, 0, 0.0, 1}.validate(); }) == ErrorCode::kConfig);
  CHECK(error_code_of([] { TriggerSpec{0.0, 0.8, 0, 0.05, 1}.validate(); }) == ErrorCode::kConfig);
  CHECK(error_code_of([] { TriggerSpec{0.2, 1.5, 0, 0.05, 1}.validate(); }) == ErrorCode::kConfig);
  CHECK(error_code_of([] { TriggerSpec{0.2, 0.8, -1, 0.05, 1}.validate(); }) == ErrorCode::kConfig);
  TriggerSpec{0.2, 0.8, 0, 0.05, 1}.validate();
}

TEST_CASE("attack: triggers are connected Erdos-Renyi draws") {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const Trigger t = random_connected_graph(4 + static_cast<int>(seed % 4), 0.6, rng);
    CHECK(is_connected(t.node_count, t.edges));
    for (const Edge& e : t.edges) {
      CHECK(e.u < e.v);
      CHECK(e.v < t.node_count);
    }
  }
  Rng rng(1);
  const Trigger full = random_connected_graph(5, 1.0, rng);
  CHECK(full.edges.size() == 10);
  CHECK(error_code_of([&] { random_connected_graph(4, 0.0, rng); }) == ErrorCode::kConfig);
  CHECK(error_code_of([&] { random_connected_graph(1, 0.5, rng); }) == ErrorCode::kConfig);

  // Pair order replay: one uniform01 per pair in lexicographic order.
  Rng a(99);
  const Trigger t = random_connected_graph(4, 0.7, a);
  Rng b(99);
  std::vector<Edge> replay;
  for (int attempt = 0; attempt < 100; ++attempt) {
    replay.clear();
    for (int u = 0; u < 4; ++u) {
      for (int v = u + 1; v < 4; ++v) {
        if (b.uniform01() < 0.7) replay.push_back({u, v});
      }
    }
    if (is_connected(4, replay)) break;
  }
  CHECK(t.edges == replay);
}

TEST_CASE("attack: injection replays as anchor rewiring") {
  Rng gen(5);
  for (int trial = 0; trial < 30; ++trial) {
    const Graph g = gbd::test::random_graph(gen, 5, 12, 3, 0.35);
    Rng trig(trial);
    const Trigger t = random_connected_graph(4, 0.8, trig);
    Rng rng(1000 + trial);
    const auto inj = inject_trigger(g, t, rng);
    REQUIRE(inj.has_value());

    // Independent replay of the anchor draw.
    Rng replay(1000 + trial);
    std::vector<int> order(static_cast<std::size_t>(g.node_count()));
    std::iota(order.begin(), order.end(), 0);
    for (int i = 0; i < 4; ++i) {
      const int j = i + static_cast<int>(replay.uniform_index(static_cast<std::size_t>(g.node_count() - i)));
      std::swap(order[i], order[j]);
    }
    const std::vector<int> anchors(order.begin(), order.begin() + 4);
    CHECK(inj->anchors == anchors);

    std::set<Edge> expected;
    const std::set<int> anchor_set(anchors.begin(), anchors.end());
    for (const Edge& e : g.edges()) {
      if (!(anchor_set.count(e.u) && anchor_set.count(e.v))) expected.insert(e);
    }
    for (const Edge& e : t.edges) {
      expected.insert({std::min(anchors[e.u], anchors[e.v]), std::max(anchors[e.u], anchors[e.v])});
    }
    CHECK(inj->graph.edges() == std::vector<Edge>(expected.begin(), expected.end()));
    CHECK(inj->graph.features() == g.features());
    CHECK(inj->graph.label() == g.label());
    CHECK(trigger_edge_indices(inj->graph, anchors).size() == t.edges.size());
  }
  Rng rng(1);
  const Graph small = gbd::test::random_graph(gen, 3, 3, 2, 0.5);
  CHECK_FALSE(inject_trigger(small, Trigger{4, {{0, 1}, {1, 2}, {2, 3}}}, rng).has_value());
}

TEST_CASE("attack: poisoning count, labels and determinism") {
  const GraphDataset d = random_dataset(200, 3);
  DataSplit split;
  for (std::size_t i = 0; i < 150; ++i) split.train.push_back(i);
  for (std::size_t i = 150; i < 175; ++i) split.validation.push_back(i);
  for (std::size_t i = 175; i < 200; ++i) split.test.push_back(i);

  const TriggerSpec spec{0.4, 0.8, 1, 0.05, 77};
  const auto [poisoned, record] = poison_dataset(d, split, spec);
  CHECK(record.poisoned_train_indices.size() == 8);  // round_half_up(0.05 * 150)
  CHECK(record.anchors.size() == 8);
  CHECK(record.trigger.node_count == trigger_node_count(0.4, average_node_count(d)));
  CHECK(std::is_sorted(record.poisoned_train_indices.begin(), record.poisoned_train_indices.end()));

  const std::set<std::size_t> victims(record.poisoned_train_indices.begin(), record.poisoned_train_indices.end());
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (victims.count(i)) {
      CHECK(poisoned.graphs[i].label() == 1);
      CHECK(split.train.end() != std::find(split.train.begin(), split.train.end(), i));
    } else {
      CHECK(poisoned.graphs[i] == d.graphs[i]);
    }
  }
  for (std::size_t k = 0; k < record.poisoned_train_indices.size(); ++k) {
    const Graph& g = poisoned.graphs[record.poisoned_train_indices[k]];
    CHECK(trigger_edge_indices(g, record.anchors[k]).size() == record.trigger.edges.size());
  }

  const auto again = poison_dataset(d, split, spec);
  CHECK(again.second == record);
  CHECK(again.first.graphs == poisoned.graphs);

  const TrojanSet trojan = embed_test_triggers(d, split, record);
  for (std::size_t k = 0; k < trojan.dataset.size(); ++k) {
    CHECK(d.graphs[trojan.source_indices[k]].label() != 1);
    CHECK(trojan.dataset.graphs[k].label() == d.graphs[trojan.source_indices[k]].label());
  }
  const auto non_target = std::count_if(split.test.begin(), split.test.end(), [&](std::size_t i) {
    return d.graphs[i].label() != 1;
  });
  CHECK(trojan.dataset.size() + trojan.skipped_too_small == static_cast<std::size_t>(non_target));
}

TEST_CASE("attack: too few eligible victims is a precondition error") {
  GraphDataset d = random_dataset(20, 4);
  DataSplit split;
  for (std::size_t i = 0; i < 20; ++i) split.train.push_back(i);
  const TriggerSpec spec{1.0, 0.9, 0, 0.95, 1};
  CHECK(error_code_of([&] { poison_dataset(d, split, spec); }) == ErrorCode::kPrecondition);
  const TriggerSpec bad_target{0.2, 0.8, 5, 0.1, 1};
  CHECK(error_code_of([&] { poison_dataset(d, split, bad_target); }) == ErrorCode::kConfig);
}
