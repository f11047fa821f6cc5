#include "gbd/serialization.hpp"

#include <cmath>
#include <fstream>
#include <limits>

namespace gbd {

using nlohmann::json;

namespace {

void expect_format(const json& j, const char* format) {
  if (!j.is_object() || j.value("format", std::string{}) != format) {
    throw Error(ErrorCode::kFormat, std::string("expected a '") + format + "' document");
  }
  const int version = j.value("version", 0);
  if (version != 1) throw Error(ErrorCode::kFormat, std::string(format) + " version " + std::to_string(version) + " is not supported");
}

// JSON has no infinities; they are written as strings.
json real_to_json(double x) {
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  return x;
}

double real_from_json(const json& j) {
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error(ErrorCode::kFormat, "invalid real '" + s + "'");
  }
  return j.get<double>();
}

json edges_to_json(const std::vector<Edge>& edges) {
  json out = json::array();
  for (const Edge& e : edges) out.push_back({e.u, e.v});
  return out;
}

std::vector<Edge> edges_from_json(const json& j) {
  std::vector<Edge> edges;
  for (const json& e : j) edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
  return edges;
}

}  // namespace

std::string to_string(Architecture a) { return a == Architecture::kGraphConv ? "graph_conv" : "gin"; }
std::string to_string(Readout r) { return r == Readout::kMean ? "mean" : "sum"; }

// --- graphs ----------------------------------------------------------------

void to_json(json& j, const Graph& g) {
  json features = json::array();
  for (Eigen::Index r = 0; r < g.features().rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < g.features().cols(); ++c) row.push_back(g.features()(r, c));
    features.push_back(std::move(row));
  }
  j = json{{"nodes", g.node_count()}, {"edges", edges_to_json(g.edges())}, {"features", std::move(features)},
           {"label", g.label()}};
}

void from_json(const json& j, Graph& g) {
  const int n = j.at("nodes").get<int>();
  const json& rows = j.at("features");
  if (!rows.is_array() || static_cast<int>(rows.size()) != n) {
    throw Error(ErrorCode::kFormat, "graph feature rows do not match node count");
  }
  const auto d = rows.empty() ? 0 : static_cast<Eigen::Index>(rows.at(0).size());
  Eigen::MatrixXd features(n, d);
  for (int r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != d) throw Error(ErrorCode::kFormat, "ragged feature rows");
    for (Eigen::Index c = 0; c < d; ++c) features(r, c) = rows[r][c].get<double>();
  }
  g = Graph(n, edges_from_json(j.at("edges")), std::move(features), j.at("label").get<int>());
}

void to_json(json& j, const GraphDataset& d) {
  j = json{{"format", "gbd-dataset"},
           {"version", 1},
           {"name", d.name},
           {"num_classes", d.num_classes},
           {"feature_dim", d.feature_dim},
           {"original_class_labels", d.original_class_labels},
           {"original_node_labels", d.original_node_labels},
           {"graphs", d.graphs}};
}

void from_json(const json& j, GraphDataset& d) {
  expect_format(j, "gbd-dataset");
  d.name = j.at("name").get<std::string>();
  d.num_classes = j.at("num_classes").get<int>();
  d.feature_dim = j.at("feature_dim").get<int>();
  d.original_class_labels = j.value("original_class_labels", std::vector<long>{});
  d.original_node_labels = j.value("original_node_labels", std::vector<long>{});
  d.graphs = j.at("graphs").get<std::vector<Graph>>();
  validate_dataset(d);
}

void to_json(json& j, const DataSplit& s) {
  j = json{{"format", "gbd-split"}, {"version", 1},  {"train", s.train},
           {"validation", s.validation}, {"test", s.test}, {"warnings", s.warnings}};
}

void from_json(const json& j, DataSplit& s) {
  expect_format(j, "gbd-split");
  s.train = j.at("train").get<std::vector<std::size_t>>();
  s.validation = j.at("validation").get<std::vector<std::size_t>>();
  s.test = j.at("test").get<std::vector<std::size_t>>();
  s.warnings = j.value("warnings", std::vector<std::string>{});
}

// --- attack ----------------------------------------------------------------

void to_json(json& j, const TriggerSpec& s) {
  j = json{{"size_fraction", s.size_fraction},
           {"density", s.density},
           {"target_label", s.target_label},
           {"poisoning_rate", s.poisoning_rate},
           {"seed", s.seed}};
}

void from_json(const json& j, TriggerSpec& s) {
  s.size_fraction = j.value("size_fraction", s.size_fraction);
  s.density = j.value("density", s.density);
  s.target_label = j.value("target_label", s.target_label);
  s.poisoning_rate = j.value("poisoning_rate", s.poisoning_rate);
  s.seed = j.value("seed", s.seed);
}

void to_json(json& j, const PoisonRecord& r) {
  j = json{{"format", "gbd-poison-record"},
           {"version", 1},
           {"spec", r.spec},
           {"target_label", r.target_label},
           {"trigger", {{"nodes", r.trigger.node_count}, {"edges", edges_to_json(r.trigger.edges)}}},
           {"victims", r.poisoned_train_indices},
           {"anchors", r.anchors}};
}

void from_json(const json& j, PoisonRecord& r) {
  expect_format(j, "gbd-poison-record");
  r.spec = j.at("spec").get<TriggerSpec>();
  r.target_label = j.at("target_label").get<int>();
  r.trigger.node_count = j.at("trigger").at("nodes").get<int>();
  r.trigger.edges = edges_from_json(j.at("trigger").at("edges"));
  r.poisoned_train_indices = j.at("victims").get<std::vector<std::size_t>>();
  r.anchors = j.at("anchors").get<std::vector<std::vector<int>>>();
  if (r.anchors.size() != r.poisoned_train_indices.size()) {
    throw Error(ErrorCode::kFormat, "poison record has mismatched victim and anchor lists");
  }
}

// --- model -----------------------------------------------------------------

void to_json(json& j, const ModelConfig& c) {
  j = json{{"architecture", to_string(c.architecture)},
           {"layer_dims", c.layer_dims},
           {"readout", to_string(c.readout)},
           {"activation", c.activation == Activation::kRelu ? "relu" : "identity"},
           {"num_classes", c.num_classes},
           {"feature_dim", c.feature_dim}};
  if (c.architecture == Architecture::kGin) {
    j["gin_epsilon"] = c.gin_epsilon;
    j["mlp_hidden"] = c.mlp_hidden;
  }
}

void from_json(const json& j, ModelConfig& c) {
  const auto arch = j.value("architecture", std::string("graph_conv"));
  if (arch == "graph_conv") {
    c.architecture = Architecture::kGraphConv;
  } else if (arch == "gin") {
    c.architecture = Architecture::kGin;
  } else {
    throw Error(ErrorCode::kConfig, "unknown architecture '" + arch + "'");
  }
  c.layer_dims = j.value("layer_dims", c.layer_dims);
  const auto readout = j.value("readout", std::string("mean"));
  if (readout != "mean" && readout != "sum") throw Error(ErrorCode::kConfig, "unknown readout '" + readout + "'");
  c.readout = readout == "mean" ? Readout::kMean : Readout::kSum;
  const auto act = j.value("activation", std::string("relu"));
  if (act != "relu" && act != "identity") throw Error(ErrorCode::kConfig, "unknown activation '" + act + "'");
  c.activation = act == "relu" ? Activation::kRelu : Activation::kIdentity;
  c.num_classes = j.value("num_classes", c.num_classes);
  c.feature_dim = j.value("feature_dim", c.feature_dim);
  c.gin_epsilon = j.value("gin_epsilon", c.gin_epsilon);
  c.mlp_hidden = j.value("mlp_hidden", c.mlp_hidden);
}

void to_json(json& j, const TrainHyper& h) {
  j = json{{"epochs", h.epochs}, {"learning_rate", h.learning_rate}, {"batch_size", h.batch_size}, {"seed", h.seed}};
}

void from_json(const json& j, TrainHyper& h) {
  h.epochs = j.value("epochs", h.epochs);
  h.learning_rate = j.value("learning_rate", h.learning_rate);
  h.batch_size = j.value("batch_size", h.batch_size);
  h.seed = j.value("seed", h.seed);
}

void to_json(json& j, const ModelParams& p) {
  json tensors = json::array();
  for (const TensorSlot& slot : parameter_layout(p.config)) {
    tensors.push_back({{"name", slot.name},
                       {"shape", {slot.rows, slot.cols}},
                       {"values", std::vector<double>(p.values.begin() + static_cast<long>(slot.offset),
                                                      p.values.begin() + static_cast<long>(slot.offset + slot.size()))}});
  }
  j = json{{"format", "gbd-checkpoint"}, {"version", kCheckpointVersion}, {"config", p.config}, {"tensors", std::move(tensors)}};
}

void from_json(const json& j, ModelParams& p) {
  expect_format(j, "gbd-checkpoint");
  p.config = j.at("config").get<ModelConfig>();
  const auto layout = parameter_layout(p.config);
  const json& tensors = j.at("tensors");
  if (tensors.size() != layout.size()) throw Error(ErrorCode::kFormat, "checkpoint tensor count does not match its config");
  p.values.assign(layout.back().offset + layout.back().size(), 0.0);
  for (std::size_t i = 0; i < layout.size(); ++i) {
    const json& t = tensors[i];
    const auto shape = t.at("shape").get<std::vector<int>>();
    const auto values = t.at("values").get<std::vector<double>>();
    if (t.at("name").get<std::string>() != layout[i].name || shape.size() != 2 || shape[0] != layout[i].rows ||
        shape[1] != layout[i].cols || values.size() != layout[i].size()) {
      throw Error(ErrorCode::kFormat, "checkpoint tensor '" + layout[i].name + "' has the wrong name or shape");
    }
    std::copy(values.begin(), values.end(), p.values.begin() + static_cast<long>(layout[i].offset));
  }
}

// --- explainer / defense ---------------------------------------------------

void to_json(json& j, const ExplainerConfig& c) {
  j = json{{"method", to_string(c.method)},
           {"ig_steps", c.ig_steps},
           {"sparsity_bounds", {c.sparsity_min, c.sparsity_max}},
           {"output", c.output == OutputKind::kProbability ? "probability" : "logit"}};
}

void from_json(const json& j, ExplainerConfig& c) {
  c.method = explain_method_from_string(j.value("method", to_string(c.method)));
  c.ig_steps = j.value("ig_steps", c.ig_steps);
  if (j.contains("sparsity_bounds")) {
    const auto b = j.at("sparsity_bounds").get<std::vector<double>>();
    if (b.size() != 2) throw Error(ErrorCode::kConfig, "sparsity_bounds needs two values");
    c.sparsity_min = b[0];
    c.sparsity_max = b[1];
  }
  const auto output = j.value("output", std::string("probability"));
  if (output != "probability" && output != "logit") throw Error(ErrorCode::kConfig, "unknown output '" + output + "'");
  c.output = output == "probability" ? OutputKind::kProbability : OutputKind::kLogit;
  c.validate();
}

void to_json(json& j, const DetectionBoundary& b) {
  j = json{{"format", "gbd-boundary"},
           {"version", 1},
           {"threshold", real_to_json(b.threshold)},
           {"quantile_value", real_to_json(b.quantile_value)},
           {"quantile_used", b.quantile_used},
           {"margin", b.margin},
           {"validation_scores", b.validation_scores}};
}

void from_json(const json& j, DetectionBoundary& b) {
  expect_format(j, "gbd-boundary");
  b.threshold = real_from_json(j.at("threshold"));
  b.quantile_value = real_from_json(j.at("quantile_value"));
  b.quantile_used = j.at("quantile_used").get<double>();
  b.margin = j.at("margin").get<double>();
  b.validation_scores = j.at("validation_scores").get<std::vector<double>>();
}

// --- files -----------------------------------------------------------------

json read_json_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::kLoad, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const json& j, int indent) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::kLoad, "cannot write " + path.string());
  out << j.dump(indent) << '\n';
}

}  // namespace gbd
