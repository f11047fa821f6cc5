#include "gbd/graph.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "gbd/error.hpp"
#include "gbd/rng.hpp"

namespace gbd {

Graph::Graph(int node_count, std::vector<Edge> edges, Eigen::MatrixXd features,
             int label)
    : node_count_(node_count),
      edges_(std::move(edges)),
      features_(std::move(features)),
      label_(label) {
  if (node_count_ <= 0) fail(ErrorCode::kInvalidArgument, "graph must have at least one node");
  if (features_.rows() != node_count_) {
    fail(ErrorCode::kInvalidArgument, "feature rows (" + std::to_string(features_.rows()) +
                                          ") do not match node count (" +
                                          std::to_string(node_count_) + ")");
  }
  for (Edge& e : edges_) {
    if (e.u > e.v) std::swap(e.u, e.v);
    if (e.u < 0 || e.v >= node_count_) {
      fail(ErrorCode::kInvalidArgument, "edge (" + std::to_string(e.u) + "," + std::to_string(e.v) +
                                            ") out of range for " + std::to_string(node_count_) +
                                            " nodes");
    }
    if (e.u == e.v) fail(ErrorCode::kInvalidArgument, "self-loop on node " + std::to_string(e.u));
  }
  std::sort(edges_.begin(), edges_.end());
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end()) {
    fail(ErrorCode::kInvalidArgument, "duplicate edge");
  }
}

Graph Graph::with_label(int label) const {
  Graph g = *this;
  g.label_ = label;
  return g;
}

bool Graph::operator==(const Graph& other) const {
  return node_count_ == other.node_count_ && label_ == other.label_ && edges_ == other.edges_ &&
         features_.rows() == other.features_.rows() &&
         features_.cols() == other.features_.cols() && features_ == other.features_;
}

void validate_dataset(const GraphDataset& dataset) {
  for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
    const Graph& g = dataset.graphs[i];
    if (g.label() < 0 || g.label() >= dataset.num_classes) {
      fail(ErrorCode::kInvalidArgument,
           "graph " + std::to_string(i) + " has label " + std::to_string(g.label()) +
               " outside [0, " + std::to_string(dataset.num_classes) + ")");
    }
    if (g.feature_dim() != dataset.feature_dim) {
      fail(ErrorCode::kInvalidArgument, "graph " + std::to_string(i) + " has feature dimension " +
                                            std::to_string(g.feature_dim()) + ", expected " +
                                            std::to_string(dataset.feature_dim));
    }
  }
}

// --- TU format -------------------------------------------------------------

namespace {

struct Line {
  std::size_t number;
  std::string text;
};

std::vector<Line> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kLoad, "cannot open dataset file " + path.string());
  std::vector<Line> lines;
  std::string text;
  std::size_t number = 0;
  while (std::getline(in, text)) {
    ++number;
    if (!text.empty() && text.back() == '\r') text.pop_back();
    lines.push_back({number, text});
  }
  // Trailing blank lines are tolerated; interior ones are a format error.
  while (!lines.empty() &&
         lines.back().text.find_first_not_of(" \t") == std::string::npos) {
    lines.pop_back();
  }
  return lines;
}

[[noreturn]] void format_error(const std::filesystem::path& path, std::size_t line,
                               const std::string& what) {
  fail(ErrorCode::kFormat, path.filename().string() + ":" + std::to_string(line) + ": " + what);
}

std::vector<long> parse_integers(const std::filesystem::path& path, const Line& line,
                                 std::size_t expected) {
  std::vector<long> values;
  const std::string& s = line.text;
  std::size_t pos = 0;
  while (pos < s.size()) {
    while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == ',')) ++pos;
    if (pos >= s.size()) break;
    long value = 0;
    auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
    if (ec != std::errc()) format_error(path, line.number, "expected an integer, got '" + s + "'");
    values.push_back(value);
    pos = static_cast<std::size_t>(ptr - s.data());
  }
  if (values.size() != expected) {
    format_error(path, line.number, "expected " + std::to_string(expected) + " value(s), got " +
                                        std::to_string(values.size()));
  }
  return values;
}

}  // namespace

GraphDataset load_tu_dataset(const std::filesystem::path& directory, const std::string& name) {
  const auto path_of = [&](const char* suffix) { return directory / (name + suffix); };
  const auto a_path = path_of("_A.txt");
  const auto indicator_path = path_of("_graph_indicator.txt");
  const auto graph_label_path = path_of("_graph_labels.txt");
  const auto node_label_path = path_of("_node_labels.txt");
  for (const auto& p : {a_path, indicator_path, graph_label_path, node_label_path}) {
    if (!std::filesystem::is_regular_file(p)) fail(ErrorCode::kLoad, "missing dataset file " + p.string());
  }

  std::vector<long> graph_labels;
  for (const Line& line : read_lines(graph_label_path)) {
    graph_labels.push_back(parse_integers(graph_label_path, line, 1)[0]);
  }
  const std::size_t num_graphs = graph_labels.size();
  if (num_graphs == 0) fail(ErrorCode::kFormat, graph_label_path.filename().string() + ": no graphs");

  // Node k (0-based) belongs to graph graph_of[k] (0-based).
  std::vector<std::size_t> graph_of;
  std::vector<int> local_index;
  std::vector<int> node_counts(num_graphs, 0);
  std::vector<std::size_t> first_node(num_graphs, 0);
  long previous = 0;
  for (const Line& line : read_lines(indicator_path)) {
    const long id = parse_integers(indicator_path, line, 1)[0];
    if (id < 1 || static_cast<std::size_t>(id) > num_graphs) {
      format_error(indicator_path, line.number,
                   "graph id " + std::to_string(id) + " outside [1, " + std::to_string(num_graphs) + "]");
    }
    if (id < previous) format_error(indicator_path, line.number, "graph ids must be non-decreasing");
    const std::size_t g = static_cast<std::size_t>(id - 1);
    if (node_counts[g] == 0) first_node[g] = graph_of.size();
    graph_of.push_back(g);
    local_index.push_back(node_counts[g]++);
    previous = id;
  }
  for (std::size_t g = 0; g < num_graphs; ++g) {
    if (node_counts[g] == 0) {
      fail(ErrorCode::kFormat, indicator_path.filename().string() + ": graph " +
                                   std::to_string(g + 1) + " has no nodes");
    }
  }
  const std::size_t total_nodes = graph_of.size();

  std::vector<long> node_labels;
  for (const Line& line : read_lines(node_label_path)) {
    if (node_labels.size() >= total_nodes) {
      format_error(node_label_path, line.number, "more node labels than nodes in graph indicator (" +
                                                     std::to_string(total_nodes) + ")");
    }
    node_labels.push_back(parse_integers(node_label_path, line, 1)[0]);
  }
  if (node_labels.size() != total_nodes) {
    format_error(node_label_path, node_labels.size() + 1,
                 "expected " + std::to_string(total_nodes) + " node labels, got " +
                     std::to_string(node_labels.size()));
  }

  std::vector<std::set<Edge>> edge_sets(num_graphs);
  for (const Line& line : read_lines(a_path)) {
    const auto ij = parse_integers(a_path, line, 2);
    for (long id : ij) {
      if (id < 1 || static_cast<std::size_t>(id) > total_nodes) {
        format_error(a_path, line.number,
                     "node id " + std::to_string(id) + " outside [1, " + std::to_string(total_nodes) + "]");
      }
    }
    const std::size_t a = static_cast<std::size_t>(ij[0] - 1);
    const std::size_t b = static_cast<std::size_t>(ij[1] - 1);
    if (graph_of[a] != graph_of[b]) {
      format_error(a_path, line.number, "arc connects nodes of different graphs");
    }
    if (a == b) continue;  // self-loops are not representable
    int u = local_index[a];
    int v = local_index[b];
    if (u > v) std::swap(u, v);
    edge_sets[graph_of[a]].insert({u, v});
  }

  std::vector<long> node_values(node_labels.begin(), node_labels.end());
  std::sort(node_values.begin(), node_values.end());
  node_values.erase(std::unique(node_values.begin(), node_values.end()), node_values.end());
  std::map<long, int> node_column;
  for (std::size_t i = 0; i < node_values.size(); ++i) node_column[node_values[i]] = static_cast<int>(i);

  std::vector<long> class_values = graph_labels;
  std::sort(class_values.begin(), class_values.end());
  class_values.erase(std::unique(class_values.begin(), class_values.end()), class_values.end());
  std::map<long, int> class_index;
  for (std::size_t i = 0; i < class_values.size(); ++i) class_index[class_values[i]] = static_cast<int>(i);

  GraphDataset dataset;
  dataset.name = name;
  dataset.num_classes = static_cast<int>(class_values.size());
  dataset.feature_dim = static_cast<int>(node_values.size());
  dataset.original_class_labels = class_values;
  dataset.original_node_labels = node_values;
  dataset.graphs.reserve(num_graphs);
  for (std::size_t g = 0; g < num_graphs; ++g) {
    Eigen::MatrixXd features = Eigen::MatrixXd::Zero(node_counts[g], dataset.feature_dim);
    for (int k = 0; k < node_counts[g]; ++k) {
      features(k, node_column[node_labels[first_node[g] + k]]) = 1.0;
    }
    std::vector<Edge> edges(edge_sets[g].begin(), edge_sets[g].end());
    dataset.graphs.emplace_back(node_counts[g], std::move(edges), std::move(features),
                                class_index[graph_labels[g]]);
  }
  return dataset;
}

void save_tu_dataset(const GraphDataset& dataset, const std::filesystem::path& directory) {
  std::filesystem::create_directories(directory);
  const auto open = [&](const char* suffix) {
    const auto path = directory / (dataset.name + suffix);
    std::ofstream out(path);
    if (!out) fail(ErrorCode::kLoad, "cannot write " + path.string());
    return out;
  };
  auto a_out = open("_A.txt");
  auto indicator_out = open("_graph_indicator.txt");
  auto graph_label_out = open("_graph_labels.txt");
  auto node_label_out = open("_node_labels.txt");

  const auto class_label = [&](int c) {
    return c < static_cast<int>(dataset.original_class_labels.size()) ? dataset.original_class_labels[c]
                                                                        : static_cast<long>(c);
  };
  const auto node_label = [&](Eigen::Index column) {
    return column < static_cast<Eigen::Index>(dataset.original_node_labels.size())
               ? dataset.original_node_labels[column]
               : static_cast<long>(column);
  };

  std::size_t offset = 1;
  for (std::size_t g = 0; g < dataset.graphs.size(); ++g) {
    const Graph& graph = dataset.graphs[g];
    graph_label_out << class_label(graph.label()) << '\n';
    for (int k = 0; k < graph.node_count(); ++k) {
      indicator_out << g + 1 << '\n';
      Eigen::Index column = 0;
      graph.features().row(k).maxCoeff(&column);
      node_label_out << node_label(column) << '\n';
    }
    for (const Edge& e : graph.edges()) {
      a_out << offset + e.u << ", " << offset + e.v << '\n';
      a_out << offset + e.v << ", " << offset + e.u << '\n';
    }
    offset += static_cast<std::size_t>(graph.node_count());
  }
}

// --- splitting -------------------------------------------------------------

DataSplit split_dataset(const GraphDataset& dataset, SplitFractions fractions, std::uint64_t seed) {
  if (!(fractions.train > 0.0)) fail(ErrorCode::kInvalidArgument, "train fraction must be positive");
  if (!(fractions.validation > 0.0)) {
    fail(ErrorCode::kInvalidArgument, "validation fraction must be positive: the detection boundary needs a validation set");
  }
  if (fractions.test < 0.0) fail(ErrorCode::kInvalidArgument, "test fraction must be non-negative");
  if (fractions.train + fractions.validation + fractions.test > 1.0 + 1e-9) {
    fail(ErrorCode::kInvalidArgument, "split fractions sum above 1");
  }

  const std::array<double, 3> share{fractions.train, fractions.validation, fractions.test};
  std::array<bool, 3> active{};
  for (int p = 0; p < 3; ++p) active[p] = share[p] > 0.0;
  const int active_parts = static_cast<int>(std::count(active.begin(), active.end(), true));

  std::vector<std::vector<std::size_t>> by_class(static_cast<std::size_t>(dataset.num_classes));
  for (std::size_t i = 0; i < dataset.graphs.size(); ++i) {
    by_class[static_cast<std::size_t>(dataset.graphs[i].label())].push_back(i);
  }

  DataSplit split;
  std::array<std::vector<std::size_t>*, 3> parts{&split.train, &split.validation, &split.test};
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto members = by_class[c];
    if (members.empty()) continue;
    Rng rng(derive_seed(seed, "split", c));
    rng.shuffle(members);
    const long n = static_cast<long>(members.size());

    std::array<long, 3> count{};
    for (int p = 0; p < 3; ++p) count[p] = active[p] ? round_half_up(share[p] * static_cast<double>(n)) : 0;
    // Rounding can overshoot; trim train first, then test, then validation.
    for (int p : {0, 2, 1}) {
      const long excess = count[0] + count[1] + count[2] - n;
      if (excess > 0) count[p] -= std::min(excess, count[p]);
    }
    // Fractions that cover the whole dataset leave no graph unassigned.
    if (fractions.train + fractions.validation + fractions.test > 1.0 - 1e-9) {
      count[0] += std::max(0L, n - (count[0] + count[1] + count[2]));
    }
    if (n >= active_parts) {
      for (int p = 0; p < 3; ++p) {
        if (!active[p] || count[p] > 0) continue;
        const long total = count[0] + count[1] + count[2];
        if (total < n) {
          count[p] = 1;
          continue;
        }
        const int donor = static_cast<int>(std::max_element(count.begin(), count.end()) - count.begin());
        --count[donor];
        count[p] = 1;
      }
    } else {
      split.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(n) +
                               " graph(s), fewer than the " + std::to_string(active_parts) +
                               " split parts");
      count = {0, 0, 0};
      long left = n;
      for (int p = 0; p < 3 && left > 0; ++p) {
        if (active[p]) {
          count[p] = 1;
          --left;
        }
      }
    }

    std::size_t cursor = 0;
    for (int p = 0; p < 3; ++p) {
      for (long k = 0; k < count[p]; ++k) parts[p]->push_back(members[cursor++]);
    }
  }
  for (auto* part : parts) std::sort(part->begin(), part->end());
  if (split.validation.empty()) fail(ErrorCode::kInvalidArgument, "validation split is empty");
  if (split.train.empty()) fail(ErrorCode::kInvalidArgument, "train split is empty");
  return split;
}

// --- structural edits ------------------------------------------------------

namespace {

std::vector<std::uint8_t> membership(const Graph& graph, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> in(graph.edge_count(), 0);
  for (std::size_t i : indices) {
    if (i >= graph.edge_count()) {
      fail(ErrorCode::kInvalidArgument, "edge index " + std::to_string(i) + " out of range for " +
                                            std::to_string(graph.edge_count()) + " edges");
    }
    in[i] = 1;
  }
  return in;
}

Graph filter_edges(const Graph& graph, const std::vector<std::uint8_t>& in, bool keep_members) {
  std::vector<Edge> edges;
  edges.reserve(graph.edge_count());
  for (std::size_t i = 0; i < graph.edge_count(); ++i) {
    if ((in[i] != 0) == keep_members) edges.push_back(graph.edges()[i]);
  }
  return Graph(graph.node_count(), std::move(edges), graph.features(), graph.label());
}

}  // namespace

Graph remove_edges(const Graph& graph, std::span<const std::size_t> removal) {
  return filter_edges(graph, membership(graph, removal), false);
}

Graph keep_edges(const Graph& graph, std::span<const std::size_t> keep) {
  return filter_edges(graph, membership(graph, keep), true);
}

std::vector<std::size_t> indices_of(const std::vector<std::uint8_t>& bits) {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] != 0) out.push_back(i);
  }
  return out;
}

Graph edgeless(const Graph& graph) {
  return Graph(graph.node_count(), {}, graph.features(), graph.label());
}

double average_node_count(const GraphDataset& dataset) {
  if (dataset.graphs.empty()) fail(ErrorCode::kInvalidArgument, "average node count of an empty dataset");
  double total = 0.0;
  for (const Graph& g : dataset.graphs) total += g.node_count();
  return total / static_cast<double>(dataset.graphs.size());
}

std::vector<Graph> select(const GraphDataset& dataset, std::span<const std::size_t> indices) {
  std::vector<Graph> out;
  out.reserve(indices.size());
  for (std::size_t i : indices) {
    if (i >= dataset.graphs.size()) fail(ErrorCode::kInvalidArgument, "graph index out of range");
    out.push_back(dataset.graphs[i]);
  }
  return out;
}

}  // namespace gbd
