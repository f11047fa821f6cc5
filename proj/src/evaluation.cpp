#include "gbd/evaluation.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include "gbd/error.hpp"
#include "gbd/rng.hpp"
#include "gbd/serialization.hpp"

namespace gbd {

using nlohmann::json;

// --- metrics ---------------------------------------------------------------

Rate attack_success_rate(const ModelParams& params, std::span<const Graph> trojan, int target_label) {
  return label_rate(params, trojan, target_label);
}

Rate defended_asr(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> trojan,
                  int target_label, const ExplainerConfig& config, std::vector<DefenseOutcome>* outcomes) {
  Rate r;
  for (const Graph& g : trojan) {
    DefenseOutcome o = defend(params, g, boundary, config);
    ++r.trials;
    if (o.final_prediction.predicted_label == target_label) ++r.hits;
    if (outcomes) outcomes->push_back(std::move(o));
  }
  return r;
}

Rate defense_accuracy(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> clean,
                      const ExplainerConfig& config, std::vector<DefenseOutcome>* outcomes) {
  Rate r;
  for (const Graph& g : clean) {
    DefenseOutcome o = defend(params, g, boundary, config);
    ++r.trials;
    if (o.final_prediction.predicted_label == g.label()) ++r.hits;
    if (outcomes) outcomes->push_back(std::move(o));
  }
  return r;
}

FarFrr far_frr(double threshold, std::span<const double> clean_scores, std::span<const double> trojan_scores) {
  FarFrr out;
  for (double s : trojan_scores) {
    ++out.far.trials;
    if (s < threshold) ++out.far.hits;
  }
  for (double s : clean_scores) {
    ++out.frr.trials;
    if (s >= threshold) ++out.frr.hits;
  }
  return out;
}

// --- configuration ---------------------------------------------------------

void ExperimentConfig::validate() const {
  if (models.empty()) fail(ErrorCode::kConfig, "experiment needs at least one model");
  if (trigger_sizes.empty() || densities.empty() || poison_rates.empty()) {
    fail(ErrorCode::kConfig, "trigger grid must be non-empty in every dimension");
  }
  if (seeds.empty()) fail(ErrorCode::kConfig, "experiment needs explicit seeds");
  if (!(quantile > 0.0 && quantile <= 1.0)) fail(ErrorCode::kConfig, "quantile must be in (0, 1]");
  if (histogram_bins < 1) fail(ErrorCode::kConfig, "histogram_bins must be positive");
  explainer.validate();
  for (double s : trigger_sizes) {
    for (double d : densities) {
      for (double r : poison_rates) TriggerSpec{s, d, target_label, r, 0}.validate();
    }
  }
}

ExperimentConfig experiment_config_from_json(const json& j) {
  try {
    if (!j.is_object()) fail(ErrorCode::kConfig, "experiment config must be a JSON object");
    const int version = j.value("schema_version", 1);
    if (version != 1) fail(ErrorCode::kConfig, "unsupported experiment schema_version " + std::to_string(version));
    ExperimentConfig c;
    if (j.contains("dataset")) {
      c.dataset_name = j.at("dataset").value("name", c.dataset_name);
      c.dataset_dir = j.at("dataset").value("dir", c.dataset_dir);
    }
    if (j.contains("models")) {
      for (const json& m : j.at("models")) {
        ModelConfig model;
        model.feature_dim = 0;
        model.num_classes = 0;
        from_json(m, model);
        c.models.push_back(model);
      }
    }
    if (j.contains("grid")) {
      const json& g = j.at("grid");
      c.trigger_sizes = g.value("trigger_size", c.trigger_sizes);
      c.densities = g.value("density", c.densities);
      c.poison_rates = g.value("poison_rate", c.poison_rates);
    }
    c.target_label = j.value("target_label", c.target_label);
    if (j.contains("explainer")) c.explainer = j.at("explainer").get<ExplainerConfig>();
    if (j.contains("train")) c.train = j.at("train").get<TrainHyper>();
    c.seeds = j.value("seeds", c.seeds);
    if (j.contains("split")) {
      const auto f = j.at("split").get<std::vector<double>>();
      if (f.size() != 3) fail(ErrorCode::kConfig, "split needs three fractions");
      c.split = {f[0], f[1], f[2]};
    }
    c.quantile = j.value("quantile", c.quantile);
    c.histogram_bins = j.value("histogram_bins", c.histogram_bins);
    return c;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kConfig, std::string("malformed experiment config: ") + e.what());
  }
}

json to_json(const ExperimentConfig& c) {
  json models = json::array();
  for (const ModelConfig& m : c.models) {
    json mj;
    gbd::to_json(mj, m);
    models.push_back(mj);
  }
  json explainer;
  gbd::to_json(explainer, c.explainer);
  json train;
  gbd::to_json(train, c.train);
  return json{{"schema_version", 1},
              {"dataset", {{"name", c.dataset_name}, {"dir", c.dataset_dir}}},
              {"models", models},
              {"grid", {{"trigger_size", c.trigger_sizes}, {"density", c.densities}, {"poison_rate", c.poison_rates}}},
              {"target_label", c.target_label},
              {"explainer", explainer},
              {"train", train},
              {"seeds", c.seeds},
              {"split", {c.split.train, c.split.validation, c.split.test}},
              {"quantile", c.quantile},
              {"histogram_bins", c.histogram_bins}};
}

std::vector<GridPoint> expand_grid(const ExperimentConfig& config) {
  std::vector<GridPoint> points;
  for (std::size_t m = 0; m < config.models.size(); ++m) {
    std::size_t trigger_index = 0;
    for (double size : config.trigger_sizes) {
      for (double density : config.densities) {
        for (double rate : config.poison_rates) {
          for (std::uint64_t seed : config.seeds) points.push_back({m, trigger_index, size, density, rate, seed});
          ++trigger_index;
        }
      }
    }
  }
  return points;
}

// --- running ---------------------------------------------------------------

ModelConfig resolve_model(ModelConfig model, const GraphDataset& dataset) {
  if (model.feature_dim == 0) model.feature_dim = dataset.feature_dim;
  if (model.num_classes == 0) model.num_classes = dataset.num_classes;
  if (model.feature_dim != dataset.feature_dim || model.num_classes != dataset.num_classes) {
    fail(ErrorCode::kConfig, "model input/output sizes do not match dataset " + dataset.name);
  }
  model.validate();
  return model;
}

AttackSetup prepare_attack(const GraphDataset& dataset, const ExperimentConfig& config, const GridPoint& point) {
  AttackSetup setup;
  setup.split = split_dataset(dataset, config.split, derive_seed(point.seed, "split"));
  TriggerSpec spec{point.trigger_size, point.density, config.target_label, point.poison_rate,
                   derive_seed(point.seed, "attack", point.trigger_index)};
  auto [poisoned, record] = poison_dataset(dataset, setup.split, spec);
  setup.poisoned = std::move(poisoned);
  setup.record = std::move(record);
  setup.trojan = embed_test_triggers(dataset, setup.split, setup.record);
  return setup;
}

namespace {

struct RowOutput {
  ResultRow row;
  RowArtifacts artifacts;
};

std::optional<double> mean_of(const std::vector<double>& v) {
  if (v.empty()) return std::nullopt;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

}  // namespace

void evaluate_defense(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> clean_test,
                      std::span<const std::size_t> clean_indices, const TrojanSet& trojan, int target_label,
                      const ExplainerConfig& explainer, std::size_t row_index, ResultRow& row,
                      std::vector<GraphLog>& logs) {
  if (clean_indices.size() != clean_test.size()) {
    fail(ErrorCode::kInvalidArgument, "clean graphs and their indices differ in length");
  }
  const auto& trojan_graphs = trojan.dataset.graphs;
  std::vector<DefenseOutcome> clean_outcomes;
  std::vector<DefenseOutcome> trojan_outcomes;
  row.clean_acc = accuracy(params, clean_test).value();
  row.asr_before = attack_success_rate(params, trojan_graphs, target_label).value();
  row.defense_acc = defense_accuracy(params, boundary, clean_test, explainer, &clean_outcomes).value();
  row.asr_after = defended_asr(params, boundary, trojan_graphs, target_label, explainer, &trojan_outcomes).value();

  std::vector<double> clean_scores;
  std::vector<double> trojan_scores;
  for (std::size_t i = 0; i < clean_outcomes.size(); ++i) {
    clean_scores.push_back(clean_outcomes[i].score.es);
    logs.push_back({row_index, "clean", clean_indices[i], clean_test[i].label(), {}, std::move(clean_outcomes[i])});
  }
  for (std::size_t i = 0; i < trojan_outcomes.size(); ++i) {
    trojan_scores.push_back(trojan_outcomes[i].score.es);
    logs.push_back({row_index, "trojan", trojan.source_indices[i], trojan_graphs[i].label(),
                    trigger_edge_indices(trojan_graphs[i], trojan.anchors[i]), std::move(trojan_outcomes[i])});
  }
  const FarFrr rates = far_frr(boundary.threshold, clean_scores, trojan_scores);
  row.far = rates.far.value();
  row.frr = rates.frr.value();
  row.mean_es_clean = mean_of(clean_scores);
  row.mean_es_trojan = mean_of(trojan_scores);
}

namespace {

TrainHyper row_hyper(const ExperimentConfig& config, const GridPoint& point) {
  TrainHyper hyper = config.train;
  hyper.seed = derive_seed(point.seed, "train");
  return hyper;
}

RowOutput run_row(const ExperimentConfig& config, const GraphDataset& dataset, const GridPoint& point,
                  std::size_t row_index) {
  RowOutput out;
  ResultRow& row = out.row;
  row.dataset = dataset.name;
  row.arch = to_string(config.models[point.model_index].architecture);
  row.trigger_size = point.trigger_size;
  row.density = point.density;
  row.poison_rate = point.poison_rate;
  row.seed = point.seed;
  try {
    const ModelConfig model = resolve_model(config.models[point.model_index], dataset);
    row.params_count = parameter_count(model);
    const AttackSetup setup = prepare_attack(dataset, config, point);
    const auto train_graphs = select(setup.poisoned, setup.split.train);
    const auto clean_test = select(dataset, setup.split.test);
    const auto validation = select(dataset, setup.split.validation);
    const auto& trojan = setup.trojan.dataset.graphs;

    TrainMonitors monitors{clean_test, trojan, config.target_label};
    TrainReport report = train(model, train_graphs, row_hyper(config, point), monitors);
    out.artifacts.history = report.history;
    const ModelParams& params = report.params;

    const DetectionBoundary boundary = calibrate(params, validation, config.explainer, config.quantile);
    out.artifacts.threshold = boundary.threshold;

    evaluate_defense(params, boundary, clean_test, setup.split.test, setup.trojan, config.target_label,
                     config.explainer, row_index, row, out.artifacts.logs);
  } catch (const std::exception& e) {
    ResultRow failed;
    failed.dataset = row.dataset;
    failed.arch = row.arch;
    failed.params_count = row.params_count;
    failed.trigger_size = row.trigger_size;
    failed.density = row.density;
    failed.poison_rate = row.poison_rate;
    failed.seed = row.seed;
    failed.error = e.what();
    row = std::move(failed);
    out.artifacts = {};
  }
  return out;
}

}  // namespace

ExperimentResult run_experiment(const ExperimentConfig& config, const GraphDataset& dataset, int jobs) {
  config.validate();
  const auto points = expand_grid(config);
  std::vector<RowOutput> outputs(points.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < points.size(); i = next++) outputs[i] = run_row(config, dataset, points[i], i);
  };
  const int threads = std::clamp(jobs, 1, static_cast<int>(std::max<std::size_t>(points.size(), 1)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  ExperimentResult result;
  for (RowOutput& o : outputs) {
    result.table.push_back(std::move(o.row));
    result.artifacts.push_back(std::move(o.artifacts));
  }
  return result;
}

GraphDataset load_experiment_dataset(const ExperimentConfig& config) {
  const std::filesystem::path dir(config.dataset_dir);
  if (dir.extension() == ".json") return parse_as<GraphDataset>(read_json_file(dir), "dataset export");
  return load_tu_dataset(dir, config.dataset_name);
}

std::optional<int> first_epoch_above(const std::vector<EpochRecord>& history, double level) {
  for (const EpochRecord& r : history) {
    if (r.asr && *r.asr > level) return r.epoch;
  }
  return std::nullopt;
}

std::vector<CapacityCurve> capacity_study(const ExperimentConfig& config, const GraphDataset& dataset,
                                          double asr_level) {
  config.validate();
  std::vector<CapacityCurve> curves;
  for (std::uint64_t seed : config.seeds) {
    const GridPoint point{0, 0, config.trigger_sizes[0], config.densities[0], config.poison_rates[0], seed};
    const AttackSetup setup = prepare_attack(dataset, config, point);
    const auto train_graphs = select(setup.poisoned, setup.split.train);
    const auto clean_test = select(dataset, setup.split.test);
    TrainMonitors monitors{clean_test, setup.trojan.dataset.graphs, config.target_label};
    for (std::size_t m = 0; m < config.models.size(); ++m) {
      const ModelConfig model = resolve_model(config.models[m], dataset);
      const TrainReport report = train(model, train_graphs, row_hyper(config, point), monitors);
      CapacityCurve curve;
      curve.model_index = m;
      curve.seed = seed;
      curve.parameter_count = report.parameter_count;
      curve.history = report.history;
      curve.first_epoch_asr_above = first_epoch_above(report.history, asr_level);
      curves.push_back(std::move(curve));
    }
  }
  return curves;
}

// --- reports ---------------------------------------------------------------

namespace {

std::string cell(const std::optional<double>& v, bool failed) {
  if (failed) return kFailed;
  return v ? fmt::format("{}", *v) : std::string(kNoTrials);
}

std::string csv_text(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells(1);
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cells.back() += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cells.back() += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.emplace_back();
    } else {
      cells.back() += c;
    }
  }
  return cells;
}

double parse_real(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) fail(ErrorCode::kFormat, "invalid number '" + s + "' in results CSV");
  return v;
}

std::optional<double> parse_cell(const std::string& s, bool& failed) {
  if (s == kFailed) {
    failed = true;
    return std::nullopt;
  }
  if (s == kNoTrials) return std::nullopt;
  return parse_real(s);
}

}  // namespace

std::string results_csv(const ResultsTable& table) {
  std::string out = std::string(kResultsHeader) + "\n";
  for (const ResultRow& r : table) {
    const bool failed = !r.error.empty();
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", csv_text(r.dataset), csv_text(r.arch),
                       r.params_count, r.trigger_size, r.density, r.poison_rate, r.seed, cell(r.clean_acc, failed),
                       cell(r.asr_before, failed), cell(r.asr_after, failed), cell(r.defense_acc, failed),
                       cell(r.far, failed), cell(r.frr, failed), cell(r.mean_es_clean, failed),
                       cell(r.mean_es_trojan, failed));
  }
  return out;
}

ResultsTable parse_results_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) fail(ErrorCode::kFormat, "results CSV header mismatch");
  ResultsTable table;
  std::size_t number = 1;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    if (c.size() != 15) fail(ErrorCode::kFormat, "results CSV line " + std::to_string(number) + " has " + std::to_string(c.size()) + " cells");
    ResultRow r;
    r.dataset = c[0];
    r.arch = c[1];
    r.params_count = static_cast<std::size_t>(std::stoull(c[2]));
    r.trigger_size = parse_real(c[3]);
    r.density = parse_real(c[4]);
    r.poison_rate = parse_real(c[5]);
    r.seed = std::stoull(c[6]);
    bool failed = false;
    std::optional<double>* metrics[] = {&r.clean_acc, &r.asr_before, &r.asr_after, &r.defense_acc,
                                        &r.far,       &r.frr,        &r.mean_es_clean, &r.mean_es_trojan};
    for (std::size_t k = 0; k < 8; ++k) *metrics[k] = parse_cell(c[7 + k], failed);
    if (failed) r.error = "failed";
    table.push_back(std::move(r));
  }
  return table;
}

ResultsTable read_results_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::kLoad, "cannot open " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_results_csv(buffer.str());
}

std::vector<HistogramBin> histogram(std::span<const double> values, double lo, double hi, int bins) {
  if (bins < 1) fail(ErrorCode::kInvalidArgument, "histogram needs at least one bin");
  if (!(hi > lo)) hi = lo + 1.0;
  std::vector<HistogramBin> out(static_cast<std::size_t>(bins));
  const double width = (hi - lo) / bins;
  for (int b = 0; b < bins; ++b) {
    out[b].lo = lo + b * width;
    out[b].hi = b + 1 == bins ? hi : lo + (b + 1) * width;
  }
  for (double v : values) {
    auto b = static_cast<long>(std::floor((v - lo) / width));
    b = std::clamp(b, 0L, static_cast<long>(bins) - 1);
    ++out[static_cast<std::size_t>(b)].count;
  }
  return out;
}

std::string summary_csv(const ResultsTable& table) {
  static const char* names[] = {"clean_acc", "asr_before", "asr_after", "defense_acc",
                                "far",       "frr",        "mean_es_clean", "mean_es_trojan"};
  std::string out = "dataset,arch,params_count,trigger_size,density,poison_rate,rows";
  for (const char* n : names) out += fmt::format(",{0}_mean,{0}_min,{0}_max", n);
  out += "\n";

  std::vector<std::string> order;
  std::map<std::string, std::vector<const ResultRow*>> groups;
  for (const ResultRow& r : table) {
    const auto key = fmt::format("{},{},{},{},{},{}", csv_text(r.dataset), csv_text(r.arch), r.params_count,
                                 r.trigger_size, r.density, r.poison_rate);
    if (!groups.count(key)) order.push_back(key);
    groups[key].push_back(&r);
  }
  for (const auto& key : order) {
    const auto& rows = groups[key];
    out += fmt::format("{},{}", key, rows.size());
    for (std::size_t k = 0; k < 8; ++k) {
      std::vector<double> v;
      for (const ResultRow* r : rows) {
        const std::optional<double>* m[] = {&r->clean_acc, &r->asr_before, &r->asr_after, &r->defense_acc,
                                            &r->far,       &r->frr,        &r->mean_es_clean, &r->mean_es_trojan};
        if (*m[k]) v.push_back(**m[k]);
      }
      if (v.empty()) {
        out += fmt::format(",{0},{0},{0}", kNoTrials);
      } else {
        double s = 0.0;
        for (double x : v) s += x;
        out += fmt::format(",{},{},{}", s / static_cast<double>(v.size()), *std::min_element(v.begin(), v.end()),
                           *std::max_element(v.begin(), v.end()));
      }
    }
    out += "\n";
  }
  return out;
}

json to_json(const ResultRow& r) {
  const auto metric = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
  json j{{"dataset", r.dataset},
         {"arch", r.arch},
         {"params_count", r.params_count},
         {"trigger_size", r.trigger_size},
         {"density", r.density},
         {"poison_rate", r.poison_rate},
         {"seed", r.seed},
         {"clean_acc", metric(r.clean_acc)},
         {"asr_before", metric(r.asr_before)},
         {"asr_after", metric(r.asr_after)},
         {"defense_acc", metric(r.defense_acc)},
         {"far", metric(r.far)},
         {"frr", metric(r.frr)},
         {"mean_es_clean", metric(r.mean_es_clean)},
         {"mean_es_trojan", metric(r.mean_es_trojan)}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

ResultRow result_row_from_json(const json& j) {
  try {
    const auto metric = [&](const char* key) -> std::optional<double> {
      if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
      return j.at(key).get<double>();
    };
    ResultRow r;
    r.dataset = j.at("dataset").get<std::string>();
    r.arch = j.at("arch").get<std::string>();
    r.params_count = j.at("params_count").get<std::size_t>();
    r.trigger_size = j.at("trigger_size").get<double>();
    r.density = j.at("density").get<double>();
    r.poison_rate = j.at("poison_rate").get<double>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.clean_acc = metric("clean_acc");
    r.asr_before = metric("asr_before");
    r.asr_after = metric("asr_after");
    r.defense_acc = metric("defense_acc");
    r.far = metric("far");
    r.frr = metric("frr");
    r.mean_es_clean = metric("mean_es_clean");
    r.mean_es_trojan = metric("mean_es_trojan");
    r.error = j.value("error", std::string());
    return r;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::kFormat, std::string("malformed results row: ") + e.what());
  }
}

std::string curve_csv(const std::vector<EpochRecord>& history) {
  std::string out = "epoch,loss,clean_acc,asr\n";
  for (const EpochRecord& r : history) {
    out += fmt::format("{},{},{},{}\n", r.epoch, r.loss, cell(r.clean_accuracy, false), cell(r.asr, false));
  }
  return out;
}

json to_json(const GraphLog& log) {
  const DefenseOutcome& o = log.outcome;
  const auto probs = [](const Prediction& p) {
    return std::vector<double>(p.probabilities.data(), p.probabilities.data() + p.probabilities.size());
  };
  json j{{"row", log.row},
         {"set", log.set},
         {"graph", log.graph},
         {"label", log.label},
         {"es", o.score.es},
         {"fidelity", o.score.fidelity},
         {"infidelity", o.score.infidelity},
         {"cv", o.score.cv},
         {"sparsity", o.score.sparsity_used},
         {"flagged", o.flagged},
         {"deleted_edges", o.deleted_edge_indices},
         {"prediction_before", o.original_prediction.predicted_label},
         {"prediction_after", o.final_prediction.predicted_label},
         {"probabilities_before", probs(o.original_prediction)},
         {"probabilities_after", probs(o.final_prediction)},
         {"importance", o.score.importance.scores},
         {"mask", o.score.hard_mask.bits}};
  if (log.set == "trojan") j["trigger_edges"] = log.trigger_edges;
  if (!o.diagnostic.empty()) j["diagnostic"] = o.diagnostic;
  return j;
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::kLoad, "cannot write " + path.string());
  out << text;
}

}  // namespace

void emit_report(const ExperimentResult& result, const std::filesystem::path& output_dir, int bins) {
  std::filesystem::create_directories(output_dir / "curves");
  write_text(output_dir / "results.csv", results_csv(result.table));
  write_text(output_dir / "summary.csv", summary_csv(result.table));

  std::string log_lines;
  std::string errors;
  std::string es_hist = "row,set,bin_lo,bin_hi,count\n";
  // trigger size -> edge kind -> scores
  std::map<double, std::map<std::string, std::vector<double>>> importance;
  for (std::size_t i = 0; i < result.table.size(); ++i) {
    const ResultRow& row = result.table[i];
    if (!row.error.empty()) {
      errors += json{{"row", i}, {"error", row.error}}.dump() + "\n";
      continue;
    }
    const RowArtifacts& art = i < result.artifacts.size() ? result.artifacts[i] : RowArtifacts{};
    write_text(output_dir / "curves" / fmt::format("row_{}.csv", i), curve_csv(art.history));

    std::map<std::string, std::vector<double>> scores{{"clean", {}}, {"trojan", {}}};
    for (const GraphLog& log : art.logs) {
      log_lines += to_json(log).dump() + "\n";
      scores[log.set].push_back(log.outcome.score.es);
      const auto& map = log.outcome.score.importance.scores;
      if (log.set == "clean") {
        importance[row.trigger_size]["clean"].insert(importance[row.trigger_size]["clean"].end(), map.begin(), map.end());
        continue;
      }
      std::vector<std::uint8_t> is_trigger(map.size(), 0);
      for (std::size_t e : log.trigger_edges) is_trigger[e] = 1;
      for (std::size_t e = 0; e < map.size(); ++e) {
        importance[row.trigger_size][is_trigger[e] ? "trojan_trigger" : "trojan_benign"].push_back(map[e]);
      }
    }
    double lo = 0.0;
    double hi = 0.0;
    bool first = true;
    for (const auto& [set, v] : scores) {
      for (double x : v) {
        lo = first ? x : std::min(lo, x);
        hi = first ? x : std::max(hi, x);
        first = false;
      }
    }
    for (const auto& [set, v] : scores) {
      for (const HistogramBin& b : histogram(v, lo, hi, bins)) {
        es_hist += fmt::format("{},{},{},{},{}\n", i, set, b.lo, b.hi, b.count);
      }
    }
  }
  write_text(output_dir / "defense_log.jsonl", log_lines);
  write_text(output_dir / "errors.jsonl", errors);
  write_text(output_dir / "es_histogram.csv", es_hist);

  std::string imp = "trigger_size,edge_kind,bin_lo,bin_hi,count\n";
  for (const auto& [size, kinds] : importance) {
    for (const auto& [kind, v] : kinds) {
      for (const HistogramBin& b : histogram(v, 0.0, 1.0, bins)) {
        imp += fmt::format("{},{},{},{},{}\n", size, kind, b.lo, b.hi, b.count);
      }
    }
  }
  write_text(output_dir / "importance_distribution.csv", imp);
}

}  // namespace gbd
