#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gbd/attack.hpp"
#include "gbd/defense.hpp"
#include "gbd/explainer.hpp"
#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"

namespace gbd {

// --- metrics ---------------------------------------------------------------

/// Fraction of trojan graphs predicted as the target label.
Rate attack_success_rate(const ModelParams& params, std::span<const Graph> trojan, int target_label);

/// ASR after every trojan graph has been routed through `defend`.
Rate defended_asr(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> trojan,
                  int target_label, const ExplainerConfig& config,
                  std::vector<DefenseOutcome>* outcomes = nullptr);

/// Accuracy of the defended classifier on clean graphs.
Rate defense_accuracy(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> clean,
                      const ExplainerConfig& config, std::vector<DefenseOutcome>* outcomes = nullptr);

struct FarFrr {
  Rate far;  // trojan graphs with es < threshold
  Rate frr;  // clean graphs with es >= threshold
};

FarFrr far_frr(double threshold, std::span<const double> clean_scores, std::span<const double> trojan_scores);

// --- experiments -----------------------------------------------------------

struct ExperimentConfig {
  std::string dataset_name = "MUTAG";
  std::string dataset_dir;
  /// feature_dim and num_classes of 0 are filled in from the dataset.
  std::vector<ModelConfig> models;
  std::vector<double> trigger_sizes{0.2};
  std::vector<double> densities{0.8};
  std::vector<double> poison_rates{0.05};
  int target_label = 0;
  ExplainerConfig explainer;
  TrainHyper train;
  std::vector<std::uint64_t> seeds{0};
  SplitFractions split;
  double quantile = 1.0;
  int histogram_bins = 20;

  void validate() const;
};

ExperimentConfig experiment_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const ExperimentConfig& config);

struct GridPoint {
  std::size_t model_index = 0;
  std::size_t trigger_index = 0;  // position in the trigger grid
  double trigger_size = 0.0;
  double density = 0.0;
  double poison_rate = 0.0;
  std::uint64_t seed = 0;
};

/// Row order: model, trigger size, density, poison rate, seed.
std::vector<GridPoint> expand_grid(const ExperimentConfig& config);

struct ResultRow {
  std::string dataset;
  std::string arch;
  std::size_t params_count = 0;
  double trigger_size = 0.0;
  double density = 0.0;
  double poison_rate = 0.0;
  std::uint64_t seed = 0;
  std::optional<double> clean_acc;
  std::optional<double> asr_before;
  std::optional<double> asr_after;
  std::optional<double> defense_acc;
  std::optional<double> far;
  std::optional<double> frr;
  std::optional<double> mean_es_clean;
  std::optional<double> mean_es_trojan;
  /// Empty on success; failed rows keep their grid fields only.
  std::string error;
};

using ResultsTable = std::vector<ResultRow>;

/// Metrics without trials are written as null.
nlohmann::json to_json(const ResultRow& row);
ResultRow result_row_from_json(const nlohmann::json& j);

/// One defended graph, as written to the per-graph log.
struct GraphLog {
  std::size_t row = 0;
  std::string set;  // "clean" or "trojan"
  std::size_t graph = 0;  // index in the source dataset
  int label = 0;
  std::vector<std::size_t> trigger_edges;  // trojan graphs only
  DefenseOutcome outcome;
};

nlohmann::json to_json(const GraphLog& log);

struct RowArtifacts {
  std::vector<EpochRecord> history;
  std::vector<GraphLog> logs;
  double threshold = 0.0;
};

/// Everything produced for one grid point before training.
struct AttackSetup {
  DataSplit split;
  GraphDataset poisoned;
  PoisonRecord record;
  TrojanSet trojan;
};

/// Split, poison and embed test triggers with rng streams derived from
/// (seed, trigger grid index). Models sharing a seed share the data.
AttackSetup prepare_attack(const GraphDataset& dataset, const ExperimentConfig& config, const GridPoint& point);

ModelConfig resolve_model(ModelConfig model, const GraphDataset& dataset);

/// Fills the metric columns of `row` (clean accuracy, ASR before/after,
/// defense accuracy, FAR, FRR, mean ES) and appends one log per defended
/// graph. clean_indices[i] is the dataset index of clean_test[i].
void evaluate_defense(const ModelParams& params, const DetectionBoundary& boundary, std::span<const Graph> clean_test,
                      std::span<const std::size_t> clean_indices, const TrojanSet& trojan, int target_label,
                      const ExplainerConfig& explainer, std::size_t row_index, ResultRow& row,
                      std::vector<GraphLog>& logs);

struct ExperimentResult {
  ResultsTable table;
  std::vector<RowArtifacts> artifacts;
};

/// split -> poison -> train -> calibrate -> evaluate for every grid row.
/// Rows run on up to `jobs` threads; results do not depend on `jobs`.
/// A failing row records its error and the rest continue.
ExperimentResult run_experiment(const ExperimentConfig& config, const GraphDataset& dataset, int jobs = 1);

/// Loads config.dataset_dir / config.dataset_name in TU format, or a JSON
/// export when dataset_dir names a .json file.
GraphDataset load_experiment_dataset(const ExperimentConfig& config);

struct CapacityCurve {
  std::size_t model_index = 0;
  std::uint64_t seed = 0;
  std::size_t parameter_count = 0;
  std::vector<EpochRecord> history;
  /// First epoch with ASR strictly above the level, if any.
  std::optional<int> first_epoch_asr_above;
};

std::optional<int> first_epoch_above(const std::vector<EpochRecord>& history, double level);

/// Trains every model on the first trigger grid point for every seed and
/// returns the per-epoch clean accuracy / ASR curves.
std::vector<CapacityCurve> capacity_study(const ExperimentConfig& config, const GraphDataset& dataset,
                                          double asr_level = 0.5);

// --- reports ---------------------------------------------------------------

inline constexpr const char* kResultsHeader =
    "dataset,arch,params_count,trigger_size,density,poison_rate,seed,clean_acc,asr_before,asr_after,"
    "defense_acc,far,frr,mean_es_clean,mean_es_trojan";
inline constexpr const char* kNoTrials = "no_trials";
inline constexpr const char* kFailed = "failed";

std::string results_csv(const ResultsTable& table);
ResultsTable parse_results_csv(const std::string& text);
ResultsTable read_results_csv(const std::filesystem::path& path);

struct HistogramBin {
  double lo = 0.0;
  double hi = 0.0;
  std::size_t count = 0;
};

/// Equal-width bins over [lo, hi]; the last bin is closed.
std::vector<HistogramBin> histogram(std::span<const double> values, double lo, double hi, int bins);

/// Mean and range per configuration point across seeds.
std::string summary_csv(const ResultsTable& table);

std::string curve_csv(const std::vector<EpochRecord>& history);

/// Writes results.csv, summary.csv, defense_log.jsonl, es_histogram.csv,
/// importance_distribution.csv, errors.jsonl and curves/row_<i>.csv.
void emit_report(const ExperimentResult& result, const std::filesystem::path& output_dir, int bins = 20);

}  // namespace gbd
