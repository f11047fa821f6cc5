#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace gbd {

/// Undirected edge, stored once with u < v.
struct Edge {
  int u = 0;
  int v = 0;
  auto operator<=>(const Edge&) const = default;
};

/// Undirected attributed graph with a class label.
///
/// Construction normalizes every pair to u < v and sorts the edge list.
/// Self-loops, duplicates, out-of-range endpoints and feature rows that do not
/// match node_count are rejected with kInvalidArgument.
class Graph {
 public:
  Graph() = default;
  Graph(int node_count, std::vector<Edge> edges, Eigen::MatrixXd features,
        int label);

  int node_count() const { return node_count_; }
  std::size_t edge_count() const { return edges_.size(); }
  const std::vector<Edge>& edges() const { return edges_; }
  const Eigen::MatrixXd& features() const { return features_; }
  int feature_dim() const { return static_cast<int>(features_.cols()); }
  int label() const { return label_; }

  Graph with_label(int label) const;

  bool operator==(const Graph& other) const;

 private:
  int node_count_ = 0;
  std::vector<Edge> edges_;
  Eigen::MatrixXd features_;
  int label_ = 0;
};

struct GraphDataset {
  std::string name;
  std::vector<Graph> graphs;
  int num_classes = 0;
  int feature_dim = 0;
  /// Original file label for each contiguous class index.
  std::vector<long> original_class_labels;
  /// Original node label for each one-hot feature column.
  std::vector<long> original_node_labels;

  std::size_t size() const { return graphs.size(); }
};

/// Throws kInvalidArgument when labels or feature dimensions disagree with
/// the dataset header.
void validate_dataset(const GraphDataset& dataset);

struct DataSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

/// Reads `<name>_A.txt`, `<name>_graph_indicator.txt`,
/// `<name>_graph_labels.txt` and `<name>_node_labels.txt` from `directory`.
/// Node labels become one-hot features; graph labels are remapped to the
/// sorted contiguous range [0, C).
GraphDataset load_tu_dataset(const std::filesystem::path& directory,
                             const std::string& name);

/// Writes the four TU files. Node labels are written as the original label of
/// each node's one-hot column; graph labels as the original class labels.
void save_tu_dataset(const GraphDataset& dataset,
                     const std::filesystem::path& directory);

/// Stratified, seed-deterministic split. Every class is spread over every
/// part with a positive fraction when the class has enough members; classes
/// that are too small are recorded in `warnings`.
DataSplit split_dataset(const GraphDataset& dataset, SplitFractions fractions,
                        std::uint64_t seed);

Graph remove_edges(const Graph& graph, std::span<const std::size_t> removal);
Graph keep_edges(const Graph& graph, std::span<const std::size_t> keep);

/// Indices of the set bits, in ascending order.
std::vector<std::size_t> indices_of(const std::vector<std::uint8_t>& bits);

Graph edgeless(const Graph& graph);

double average_node_count(const GraphDataset& dataset);

std::vector<Graph> select(const GraphDataset& dataset,
                          std::span<const std::size_t> indices);

}  // namespace gbd
