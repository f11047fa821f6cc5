// Acceptance gate: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. All tolerances and run settings are fixed below.

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "gbd/defense.hpp"
#include "gbd/evaluation.hpp"
#include "gbd/explainer.hpp"
#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"
#include "gbd/rng.hpp"
#include "gbd/serialization.hpp"
#include "gbd/synthetic.hpp"

using namespace gbd;

namespace {

// criterion 1
constexpr int kGradientGraphs = 50;
constexpr int kMaxGradientNodes = 8;
constexpr double kGradRtol = 1e-4;
constexpr double kGradAtol = 1e-7;
constexpr double kFdStep = 1e-6;
constexpr double kKinkMargin = 1e-4;
constexpr double kSuiteSeconds = 60.0;
// criterion 2
constexpr int kMaxOcclusionEdges = 8;
constexpr int kIgSteps = 300;
constexpr double kIgResidual = 1e-2;
// criterion 3
constexpr int kPropertyInstances = 2000;
constexpr double kCvScaleRtol = 1e-9;
// criteria 4-6
constexpr double kTriggerSize = 0.2;
constexpr double kDensity = 0.8;
constexpr double kPoisonRate = 0.05;
constexpr int kTargetLabel = 0;
constexpr int kEpochs = 200;
const std::vector<std::uint64_t> kMutagSeeds{1, 2, 3, 4, 5, 6};
const std::vector<std::uint64_t> kAidsSeeds{1, 2, 3};
constexpr std::uint64_t kAidsFixtureSeed = 2024;
constexpr double kMinAsrBefore = 0.6;
constexpr double kMaxAsrAfter = 0.3;
constexpr double kMaxAsrRatio = 0.5;
constexpr double kMaxAccuracyGap = 0.1;
constexpr double kMaxFrr = 0.15;
// criterion 7
const std::vector<int> kLowCapacity{28, 71};       // 4611 parameters on MUTAG
const std::vector<int> kHighCapacity{61, 89, 89};  // 27973 parameters on MUTAG
constexpr double kAsrLevel = 0.5;
// criterion 8
constexpr int kDeterminismEpochs = 20;

int failures = 0;

void report(int number, const std::string& name, bool ok, const std::string& detail) {
  if (!ok) ++failures;
  std::cout << fmt::format("{} criterion {}: {}: {}", ok ? "PASS" : "FAIL", number, name, detail) << std::endl;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool close(double a, double b, double rtol, double atol) { return std::abs(a - b) <= atol + rtol * std::abs(b); }

Graph random_graph(Rng& rng, int max_nodes, int dim, double p) {
  const int n = 1 + static_cast<int>(rng.uniform_index(static_cast<std::size_t>(max_nodes)));
  std::vector<Edge> edges;
  for (int u = 0; u < n; ++u) {
    for (int v = u + 1; v < n; ++v) {
      if (rng.uniform01() < p) edges.push_back({u, v});
    }
  }
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(n, dim);
  for (int v = 0; v < n; ++v) x(v, static_cast<Eigen::Index>(rng.uniform_index(static_cast<std::size_t>(dim)))) = 1;
  return Graph(n, std::move(edges), std::move(x), 0);
}

ModelConfig probe_model(Architecture arch) {
  ModelConfig c;
  c.architecture = arch;
  c.layer_dims = {6, 5};
  c.mlp_hidden = 7;
  c.gin_epsilon = 0.2;
  c.feature_dim = 4;
  c.num_classes = 3;
  return c;
}

// --- criterion 1 -------------------------------------------------------------

void gradient_correctness() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::size_t compared = 0;
  std::size_t mismatched = 0;
  int graphs = 0;
  for (Architecture arch : {Architecture::kGraphConv, Architecture::kGin}) {
    int checked = 0;
    for (std::uint64_t draw = 0; checked < kGradientGraphs && draw < 1000; ++draw) {
      const ModelParams p = init_params(probe_model(arch), 500 + draw);
      const Graph g = random_graph(rng, kMaxGradientNodes, 4, 0.5);
      std::vector<double> w(g.edge_count());
      for (double& x : w) x = rng.uniform(0.1, 1.0);
      if (ForwardPass(p, g, w).min_abs_preactivation() < kKinkMargin) continue;
      ++checked;
      const int c = static_cast<int>(rng.uniform_index(3));
      const auto ge = edge_weight_gradients(p, g, w, c);
      for (std::size_t e = 0; e < w.size(); ++e) {
        auto up = w;
        auto down = w;
        up[e] += kFdStep;
        down[e] -= kFdStep;
        const double fd = (class_output(p, g, up, c) - class_output(p, g, down, c)) / (2 * kFdStep);
        ++compared;
        mismatched += !close(ge[e], fd, kGradRtol, kGradAtol);
      }
      const auto gp = parameter_gradients(p, g, w, c);
      for (std::size_t i = 0; i < p.size(); ++i) {
        ModelParams up = p;
        ModelParams down = p;
        up.values[i] += kFdStep;
        down.values[i] -= kFdStep;
        const double fd = (class_output(up, g, w, c) - class_output(down, g, w, c)) / (2 * kFdStep);
        ++compared;
        mismatched += !close(gp[i], fd, kGradRtol, kGradAtol);
      }
    }
    graphs += checked;
  }
  const double secs = seconds_since(t0);
  report(1, "gradient correctness", mismatched == 0 && graphs == 2 * kGradientGraphs && secs < kSuiteSeconds,
         fmt::format("{} graphs, {} derivatives, {} outside rtol {} atol {}, {:.1f}s", graphs, compared, mismatched,
                     kGradRtol, kGradAtol, secs));
}

// --- criterion 2 -------------------------------------------------------------

void explainer_oracles() {
  Rng rng(202);
  int fixtures = 0;
  int occlusion_mismatch = 0;
  double worst_residual = 0.0;
  for (Architecture arch : {Architecture::kGraphConv, Architecture::kGin}) {
    const ModelParams p = init_params(probe_model(arch), 17);
    for (int i = 0; i < 60; ++i) {
      const Graph g = random_graph(rng, 7, 4, 0.4);
      if (g.edge_count() == 0 || g.edge_count() > static_cast<std::size_t>(kMaxOcclusionEdges)) continue;
      ++fixtures;
      const int c = static_cast<int>(rng.uniform_index(3));
      const std::vector<double> ones(g.edge_count(), 1.0);
      const std::vector<double> zeros(g.edge_count(), 0.0);
      const double full = class_output(p, g, ones, c);
      const auto occ = occlusion(p, g, c);
      for (std::size_t e = 0; e < g.edge_count(); ++e) {
        const std::vector<std::size_t> drop{e};
        const Graph h = remove_edges(g, drop);
        occlusion_mismatch += occ[e] != full - class_output(p, h, std::vector<double>(h.edge_count(), 1.0), c);
      }
      const auto ig = integrated_gradients(p, g, c, kIgSteps);
      const double residual = std::abs(std::accumulate(ig.begin(), ig.end(), 0.0) - (full - class_output(p, g, zeros, c)));
      worst_residual = std::max(worst_residual, residual);
    }
  }
  report(2, "explainer oracles", occlusion_mismatch == 0 && worst_residual <= kIgResidual && fixtures > 0,
         fmt::format("{} fixtures, {} occlusion mismatches, max IG completeness residual {:.3g} at {} steps (<= {})",
                     fixtures, occlusion_mismatch, worst_residual, kIgSteps, kIgResidual));
}

// --- criterion 3 -------------------------------------------------------------

void metric_definitions() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(303);
  int violations = 0;
  const ModelParams p = init_params(probe_model(Architecture::kGraphConv), 23);
  ExplainerConfig config;
  config.ig_steps = 10;
  for (int i = 0; i < kPropertyInstances; ++i) {
    // Masks and metrics on random graphs.
    if (i % 10 == 0) {
      const Graph g = random_graph(rng, 9, 4, 0.4);
      const int label = static_cast<int>(rng.uniform_index(3));
      const HardMask empty{std::vector<std::uint8_t>(g.edge_count(), 0), 0.5};
      const HardMask full{std::vector<std::uint8_t>(g.edge_count(), 1), 0.5};
      violations += fidelity(p, g, empty, label) != 0.0;
      violations += infidelity(p, g, full, label) != 0.0;
      const ExplainabilityScore s = explainability_score(p, g, config);
      violations += s.es != s.fidelity - s.infidelity;
    }
    // Hard-mask cardinality on random maps.
    std::vector<double> raw(1 + rng.uniform_index(30));
    for (double& x : raw) x = rng.uniform(-0.5, 1.0);
    const ImportanceMap map = normalize(raw);
    const double s = rng.uniform01();
    const HardMask mask = harden(map, s);
    const long m = static_cast<long>(raw.size());
    const long k = map.all_zero() ? 0 : std::clamp(round_half_up((1.0 - s) * static_cast<double>(m)), 1L, m);
    violations += static_cast<long>(mask.selected()) != k;
    // c_v scale invariance.
    const double scale = rng.uniform(1e-3, 1e3);
    std::vector<double> scaled(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) scaled[j] = std::abs(raw[j]) * scale;
    std::vector<double> base(raw.size());
    for (std::size_t j = 0; j < raw.size(); ++j) base[j] = std::abs(raw[j]);
    violations += !close(coefficient_of_variation(scaled), coefficient_of_variation(base), kCvScaleRtol, 1e-12);
  }
  const double secs = seconds_since(t0);
  report(3, "metric definitions", violations == 0 && secs < kSuiteSeconds,
         fmt::format("{} instances, {} violations, {:.1f}s", kPropertyInstances, violations, secs));
}

// --- criteria 4-6 ------------------------------------------------------------

ExperimentConfig scaled_run(const std::string& name, const std::vector<std::uint64_t>& seeds) {
  ExperimentConfig c;
  c.dataset_name = name;
  ModelConfig m;
  m.layer_dims = kHighCapacity;
  m.readout = Readout::kMean;
  m.feature_dim = 0;
  m.num_classes = 0;
  c.models = {m};
  c.trigger_sizes = {kTriggerSize};
  c.densities = {kDensity};
  c.poison_rates = {kPoisonRate};
  c.target_label = kTargetLabel;
  c.train.epochs = kEpochs;
  c.seeds = seeds;
  return c;
}

double mean_of(const ResultsTable& t, std::optional<double> ResultRow::*field, bool& missing) {
  double s = 0.0;
  for (const ResultRow& r : t) {
    if (!(r.*field)) {
      missing = true;
      continue;
    }
    s += *(r.*field);
  }
  return t.empty() ? 0.0 : s / static_cast<double>(t.size());
}

std::string per_seed(const ResultsTable& t, std::optional<double> ResultRow::*field) {
  std::string out;
  for (const ResultRow& r : t) out += fmt::format("{}{:.3f}", out.empty() ? "" : " ", (r.*field).value_or(NAN));
  return out;
}

void attack_and_defense(const GraphDataset& mutag, const GraphDataset& aids) {
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentResult m = run_experiment(scaled_run("MUTAG", kMutagSeeds), mutag);
  const double m_secs = seconds_since(t0);
  bool missing = false;
  for (const ResultRow& r : m.table) {
    if (!r.error.empty()) {
      missing = true;
      std::cout << "  row error: " << r.error << "\n";
    }
  }
  std::cout << results_csv(m.table);

  const double before = mean_of(m.table, &ResultRow::asr_before, missing);
  const double after = mean_of(m.table, &ResultRow::asr_after, missing);
  report(4, "attack reproduction", !missing && before >= kMinAsrBefore,
         fmt::format("MUTAG {} seeds, mean asr_before {:.3f} (>= {}); per seed [{}]; {:.0f}s", m.table.size(), before,
                     kMinAsrBefore, per_seed(m.table, &ResultRow::asr_before), m_secs));

  int separated = 0;
  for (const ResultRow& r : m.table) {
    separated += r.mean_es_trojan && r.mean_es_clean && *r.mean_es_trojan > *r.mean_es_clean;
  }
  const bool every_seed = separated == static_cast<int>(m.table.size());
  report(5, "defense effectiveness",
         !missing && after <= kMaxAsrAfter && after <= kMaxAsrRatio * before && every_seed,
         fmt::format("mean asr_after {:.3f} (<= {} and <= {} x {:.3f} = {:.3f}); per seed [{}]; "
                     "ES trojan > clean on {}/{} seeds",
                     after, kMaxAsrAfter, kMaxAsrRatio, before, kMaxAsrRatio * before,
                     per_seed(m.table, &ResultRow::asr_after), separated, m.table.size()));

  const auto t1 = std::chrono::steady_clock::now();
  const ExperimentResult a = run_experiment(scaled_run("AIDS", kAidsSeeds), aids);
  const double a_secs = seconds_since(t1);
  std::cout << results_csv(a.table);
  bool a_missing = false;
  for (const ResultRow& r : a.table) a_missing |= !r.error.empty();
  const double m_gap = mean_of(m.table, &ResultRow::clean_acc, missing) - mean_of(m.table, &ResultRow::defense_acc, missing);
  const double a_gap =
      mean_of(a.table, &ResultRow::clean_acc, a_missing) - mean_of(a.table, &ResultRow::defense_acc, a_missing);
  const double m_frr = mean_of(m.table, &ResultRow::frr, missing);
  const double a_frr = mean_of(a.table, &ResultRow::frr, a_missing);
  report(6, "clean-sample preservation",
         !missing && !a_missing && m_gap <= kMaxAccuracyGap && a_gap <= kMaxAccuracyGap && m_frr <= kMaxFrr &&
             a_frr <= kMaxFrr,
         fmt::format("accuracy gap MUTAG {:.3f}, AIDS-format {:.3f} (<= {}); FRR MUTAG {:.3f}, AIDS-format {:.3f} "
                     "(<= {}); AIDS per-seed asr_before [{}]; {:.0f}s",
                     m_gap, a_gap, kMaxAccuracyGap, m_frr, a_frr, kMaxFrr, per_seed(a.table, &ResultRow::asr_before),
                     a_secs));
}

// --- criterion 7 -------------------------------------------------------------

void capacity_direction(const GraphDataset& mutag) {
  ExperimentConfig c = scaled_run("MUTAG", kMutagSeeds);
  ModelConfig low = c.models[0];
  low.layer_dims = kLowCapacity;
  c.models = {low, c.models[0]};
  const auto curves = capacity_study(c, mutag, kAsrLevel);

  // Mean ASR curve per model over the shared seeds.
  std::vector<std::vector<double>> mean(2, std::vector<double>(static_cast<std::size_t>(kEpochs), 0.0));
  std::vector<std::size_t> params(2, 0);
  std::string seeds;
  for (const CapacityCurve& curve : curves) {
    params[curve.model_index] = curve.parameter_count;
    for (const EpochRecord& r : curve.history) {
      mean[curve.model_index][static_cast<std::size_t>(r.epoch - 1)] += r.asr.value_or(0.0) / kMutagSeeds.size();
    }
  }
  for (std::size_t i = 0; i + 1 < curves.size(); i += 2) {
    const auto show = [](const std::optional<int>& e) { return e ? std::to_string(*e) : std::string("never"); };
    seeds += fmt::format("{}seed {}: {} vs {}", seeds.empty() ? "" : "; ", curves[i].seed,
                         show(curves[i].first_epoch_asr_above), show(curves[i + 1].first_epoch_asr_above));
  }
  const auto first_above = [](const std::vector<double>& curve) {
    for (std::size_t e = 0; e < curve.size(); ++e) {
      if (curve[e] > kAsrLevel) return static_cast<int>(e) + 1;
    }
    return std::numeric_limits<int>::max();
  };
  const int low_epoch = first_above(mean[0]);
  const int high_epoch = first_above(mean[1]);
  const auto show = [](int e) { return e == std::numeric_limits<int>::max() ? std::string("never") : std::to_string(e); };
  report(7, "capacity-study direction", low_epoch >= high_epoch && params[0] < params[1],
         fmt::format("first epoch with mean ASR > {}: {} params -> {}, {} params -> {}; per seed ({})", kAsrLevel,
                     params[0], show(low_epoch), params[1], show(high_epoch), seeds));
}

// --- criterion 8 -------------------------------------------------------------

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

void end_to_end_determinism(const std::string& cli) {
  const auto root = std::filesystem::temp_directory_path() / "gbd-acceptance-determinism";
  std::filesystem::remove_all(root);
  std::filesystem::create_directories(root);
  ExperimentConfig c = scaled_run("MUTAG", {7, 8});
  c.dataset_dir = std::string(GBD_TEST_DATA_DIR) + "/MUTAG";
  c.poison_rates = {0.05, 0.1};
  c.seeds = {7};
  c.train.epochs = kDeterminismEpochs;
  write_json_file(root / "sweep.json", to_json(c));
  std::vector<std::string> csv;
  bool ran = true;
  for (const char* run : {"a", "b"}) {
    const std::string cmd = fmt::format("\"{}\" sweep --config \"{}\" --out \"{}\" > /dev/null", cli,
                                        (root / "sweep.json").string(), (root / run).string());
    ran &= std::system(cmd.c_str()) == 0;
    csv.push_back(slurp(root / run / "results.csv"));
  }
  const auto rows = std::count(csv[0].begin(), csv[0].end(), '\n') - 1;
  report(8, "end-to-end determinism", ran && rows == 2 && csv[0] == csv[1],
         fmt::format("2-point sweep via CLI, {} rows, results.csv {} across two runs", rows,
                     csv[0] == csv[1] ? "byte-identical" : "DIFFERENT"));
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
  }
  try {
    gradient_correctness();
    explainer_oracles();
    metric_definitions();
    const GraphDataset mutag = load_tu_dataset(std::string(GBD_TEST_DATA_DIR) + "/MUTAG", "MUTAG");
    const GraphDataset aids = make_aids_like_dataset(kAidsFixtureSeed);
    attack_and_defense(mutag, aids);
    capacity_direction(mutag);
    if (cli.empty()) {
      report(8, "end-to-end determinism", false, "no --cli path given");
    } else {
      end_to_end_determinism(cli);
    }
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << std::endl;
    return 1;
  }
  std::cout << fmt::format("{} criterion failure(s)", failures) << std::endl;
  return failures == 0 ? 0 : 1;
}
