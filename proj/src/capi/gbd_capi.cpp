#include "gbd/gbd.h"

#include <fmt/format.h>

#include <algorithm>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <new>
#include <string>

#include "gbd/attack.hpp"
#include "gbd/defense.hpp"
#include "gbd/error.hpp"
#include "gbd/evaluation.hpp"
#include "gbd/rng.hpp"
#include "gbd/serialization.hpp"
#include "gbd/synthetic.hpp"

using nlohmann::json;

struct gbd_dataset {
  gbd::GraphDataset value;
};
struct gbd_split {
  gbd::DataSplit value;
};
struct gbd_poison {
  gbd::PoisonRecord value;
};
struct gbd_model {
  gbd::ModelParams value;
};
struct gbd_boundary {
  gbd::DetectionBoundary value;
};

namespace {

thread_local std::string last_error;

gbd_status status_of(gbd::ErrorCode code) { return static_cast<gbd_status>(static_cast<int>(code)); }

template <class F>
gbd_status guarded(F&& body) {
  try {
    body();
    return GBD_OK;
  } catch (const gbd::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const json::exception& e) {
    last_error = std::string("malformed JSON: ") + e.what();
    return GBD_ERR_FORMAT;
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return GBD_ERR_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return GBD_ERR_INTERNAL;
  } catch (...) {
    last_error = "unknown error";
    return GBD_ERR_INTERNAL;
  }
}

void require(bool ok, const char* what) {
  if (!ok) gbd::fail(gbd::ErrorCode::kInvalidArgument, std::string(what) + " must not be NULL");
}

char* copy_out(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

json parse_json_text(const char* text, const char* what) {
  if (!text) return json::object();
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw gbd::Error(gbd::ErrorCode::kConfig, std::string("malformed ") + what + ": " + e.what());
  }
}

gbd::ExplainerConfig explainer_from(const char* text) {
  gbd::ExplainerConfig c = gbd::parse_as<gbd::ExplainerConfig>(parse_json_text(text, "explainer config"), "explainer config");
  c.validate();
  return c;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) gbd::fail(gbd::ErrorCode::kLoad, "cannot write " + path.string());
  out << text;
}

gbd::ExperimentConfig experiment_from(const char* config_json) {
  require(config_json != nullptr, "config_json");
  gbd::ExperimentConfig c = gbd::experiment_config_from_json(parse_json_text(config_json, "experiment config"));
  c.validate();
  return c;
}

}  // namespace

extern "C" {

const char* gbd_version(void) { return "1.0.0"; }

const char* gbd_last_error(void) { return last_error.c_str(); }

const char* gbd_status_name(gbd_status status) {
  switch (status) {
    case GBD_OK: return "ok";
    case GBD_ERR_INVALID_ARGUMENT: return "invalid_argument";
    case GBD_ERR_LOAD: return "load";
    case GBD_ERR_FORMAT: return "format";
    case GBD_ERR_CONFIG: return "config";
    case GBD_ERR_NUMERIC: return "numeric";
    case GBD_ERR_PRECONDITION: return "precondition";
    case GBD_ERR_INTERNAL: return "internal";
  }
  return "unknown";
}

void gbd_string_free(char* s) { std::free(s); }

uint64_t gbd_derive_seed(uint64_t master, const char* stream, uint64_t index) {
  return gbd::derive_seed(master, stream ? stream : "", index);
}

// ---- datasets

gbd_status gbd_dataset_load_tu(const char* dir, const char* name, gbd_dataset** out) {
  return guarded([&] {
    require(dir && name && out, "dir, name and out");
    *out = new gbd_dataset{gbd::load_tu_dataset(dir, name)};
  });
}

gbd_status gbd_dataset_save_tu(const gbd_dataset* dataset, const char* dir) {
  return guarded([&] {
    require(dataset && dir, "dataset and dir");
    gbd::save_tu_dataset(dataset->value, dir);
  });
}

gbd_status gbd_dataset_load_json(const char* path, gbd_dataset** out) {
  return guarded([&] {
    require(path && out, "path and out");
    auto d = gbd::parse_as<gbd::GraphDataset>(gbd::read_json_file(path), "dataset export");
    gbd::validate_dataset(d);
    *out = new gbd_dataset{std::move(d)};
  });
}

gbd_status gbd_dataset_save_json(const gbd_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset && path, "dataset and path");
    json j;
    gbd::to_json(j, dataset->value);
    gbd::write_json_file(path, j, -1);
  });
}

gbd_status gbd_dataset_synthesize_aids(uint64_t seed, size_t graph_count, gbd_dataset** out) {
  return guarded([&] {
    require(out != nullptr, "out");
    if (graph_count == 0) gbd::fail(gbd::ErrorCode::kInvalidArgument, "graph_count must be positive");
    *out = new gbd_dataset{gbd::make_aids_like_dataset(seed, graph_count)};
  });
}

gbd_status gbd_dataset_info(const gbd_dataset* dataset, char** out_json) {
  return guarded([&] {
    require(dataset && out_json, "dataset and out_json");
    const auto& d = dataset->value;
    std::size_t edges = 0;
    int min_nodes = 0;
    int max_nodes = 0;
    std::vector<std::size_t> counts(static_cast<std::size_t>(std::max(d.num_classes, 0)), 0);
    for (std::size_t i = 0; i < d.graphs.size(); ++i) {
      const auto& g = d.graphs[i];
      edges += g.edge_count();
      min_nodes = i == 0 ? g.node_count() : std::min(min_nodes, g.node_count());
      max_nodes = i == 0 ? g.node_count() : std::max(max_nodes, g.node_count());
      if (g.label() >= 0 && static_cast<std::size_t>(g.label()) < counts.size()) ++counts[g.label()];
    }
    const double n = static_cast<double>(std::max<std::size_t>(d.size(), 1));
    json j{{"name", d.name},
           {"graphs", d.size()},
           {"num_classes", d.num_classes},
           {"feature_dim", d.feature_dim},
           {"average_nodes", gbd::average_node_count(d)},
           {"average_edges", static_cast<double>(edges) / n},
           {"min_nodes", min_nodes},
           {"max_nodes", max_nodes},
           {"class_counts", counts}};
    *out_json = copy_out(j.dump());
  });
}

size_t gbd_dataset_size(const gbd_dataset* dataset) { return dataset ? dataset->value.size() : 0; }

void gbd_dataset_free(gbd_dataset* dataset) { delete dataset; }

// ---- splits

gbd_status gbd_split_create(const gbd_dataset* dataset, double train, double validation, double test, uint64_t seed,
                            gbd_split** out) {
  return guarded([&] {
    require(dataset && out, "dataset and out");
    *out = new gbd_split{gbd::split_dataset(dataset->value, {train, validation, test}, seed)};
  });
}

gbd_status gbd_split_load(const char* path, gbd_split** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = new gbd_split{gbd::parse_as<gbd::DataSplit>(gbd::read_json_file(path), "split")};
  });
}

gbd_status gbd_split_save(const gbd_split* split, const char* path) {
  return guarded([&] {
    require(split && path, "split and path");
    json j;
    gbd::to_json(j, split->value);
    gbd::write_json_file(path, j);
  });
}

size_t gbd_split_count(const gbd_split* split, int part) {
  if (!split) return 0;
  switch (part) {
    case 0: return split->value.train.size();
    case 1: return split->value.validation.size();
    case 2: return split->value.test.size();
    default: return 0;
  }
}

void gbd_split_free(gbd_split* split) { delete split; }

// ---- attack

gbd_status gbd_attack_poison(const gbd_dataset* dataset, const gbd_split* split, const char* spec_json,
                             gbd_dataset** poisoned, gbd_poison** record) {
  return guarded([&] {
    require(dataset && split && spec_json && poisoned && record, "dataset, split, spec_json and outputs");
    const auto spec = gbd::parse_as<gbd::TriggerSpec>(parse_json_text(spec_json, "trigger spec"), "trigger spec");
    auto [data, rec] = gbd::poison_dataset(dataset->value, split->value, spec);
    auto* d = new gbd_dataset{std::move(data)};
    *record = new gbd_poison{std::move(rec)};
    *poisoned = d;
  });
}

gbd_status gbd_attack_embed_test(const gbd_dataset* clean, const gbd_split* split, const gbd_poison* record,
                                 gbd_dataset** trojan) {
  return guarded([&] {
    require(clean && split && record && trojan, "clean, split, record and trojan");
    *trojan = new gbd_dataset{gbd::embed_test_triggers(clean->value, split->value, record->value).dataset};
  });
}

gbd_status gbd_poison_load(const char* path, gbd_poison** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = new gbd_poison{gbd::parse_as<gbd::PoisonRecord>(gbd::read_json_file(path), "poison record")};
  });
}

gbd_status gbd_poison_save(const gbd_poison* record, const char* path) {
  return guarded([&] {
    require(record && path, "record and path");
    json j;
    gbd::to_json(j, record->value);
    gbd::write_json_file(path, j);
  });
}

size_t gbd_poison_victim_count(const gbd_poison* record) {
  return record ? record->value.poisoned_train_indices.size() : 0;
}

int gbd_poison_target_label(const gbd_poison* record) { return record ? record->value.target_label : -1; }

void gbd_poison_free(gbd_poison* record) { delete record; }

// ---- model

gbd_status gbd_model_train(const gbd_dataset* train_set, const gbd_dataset* clean_set, const gbd_split* split,
                           const gbd_dataset* trojan, int target_label, const char* model_json,
                           const char* train_json, gbd_model** out, char** history_csv) {
  return guarded([&] {
    require(train_set && clean_set && split && out, "train_set, clean_set, split and out");
    auto model = gbd::parse_as<gbd::ModelConfig>(parse_json_text(model_json, "model config"), "model config");
    model.feature_dim = 0;
    model.num_classes = 0;
    model = gbd::resolve_model(model, train_set->value);
    const auto hyper = gbd::parse_as<gbd::TrainHyper>(parse_json_text(train_json, "train config"), "train config");
    const auto train_graphs = gbd::select(train_set->value, split->value.train);
    const auto clean_test = gbd::select(clean_set->value, split->value.test);
    gbd::TrainMonitors monitors{clean_test, {}, target_label};
    if (trojan) monitors.trojan_test = trojan->value.graphs;
    auto report = gbd::train(model, train_graphs, hyper, monitors);
    std::string csv = gbd::curve_csv(report.history);
    char* history = history_csv ? copy_out(csv) : nullptr;
    *out = new gbd_model{std::move(report.params)};
    if (history_csv) *history_csv = history;
  });
}

gbd_status gbd_model_load(const char* path, gbd_model** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = new gbd_model{gbd::parse_as<gbd::ModelParams>(gbd::read_json_file(path), "checkpoint")};
  });
}

gbd_status gbd_model_save(const gbd_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path");
    json j;
    gbd::to_json(j, model->value);
    gbd::write_json_file(path, j, -1);
  });
}

size_t gbd_model_parameter_count(const gbd_model* model) { return model ? model->value.size() : 0; }

gbd_status gbd_model_predict(const gbd_model* model, const gbd_dataset* dataset, size_t graph_index,
                             double* probabilities, size_t capacity, int* predicted_label) {
  return guarded([&] {
    require(model && dataset, "model and dataset");
    if (graph_index >= dataset->value.size()) {
      gbd::fail(gbd::ErrorCode::kInvalidArgument,
                fmt::format("graph index {} out of range for {} graphs", graph_index, dataset->value.size()));
    }
    const auto p = gbd::forward(model->value, dataset->value.graphs[graph_index]);
    if (probabilities) {
      if (capacity < static_cast<size_t>(p.probabilities.size())) {
        gbd::fail(gbd::ErrorCode::kInvalidArgument, "probability buffer smaller than the class count");
      }
      std::copy(p.probabilities.data(), p.probabilities.data() + p.probabilities.size(), probabilities);
    }
    if (predicted_label) *predicted_label = p.predicted_label;
  });
}

void gbd_model_free(gbd_model* model) { delete model; }

// ---- defense

gbd_status gbd_boundary_calibrate(const gbd_model* model, const gbd_dataset* clean_set, const gbd_split* split,
                                  const char* explainer_json, double quantile, gbd_boundary** out) {
  return guarded([&] {
    require(model && clean_set && split && out, "model, clean_set, split and out");
    if (!(quantile > 0.0 && quantile <= 1.0)) gbd::fail(gbd::ErrorCode::kConfig, "quantile must be in (0, 1]");
    const auto validation = gbd::select(clean_set->value, split->value.validation);
    *out = new gbd_boundary{gbd::calibrate(model->value, validation, explainer_from(explainer_json), quantile)};
  });
}

gbd_status gbd_boundary_load(const char* path, gbd_boundary** out) {
  return guarded([&] {
    require(path && out, "path and out");
    *out = new gbd_boundary{gbd::parse_as<gbd::DetectionBoundary>(gbd::read_json_file(path), "boundary")};
  });
}

gbd_status gbd_boundary_save(const gbd_boundary* boundary, const char* path) {
  return guarded([&] {
    require(boundary && path, "boundary and path");
    json j;
    gbd::to_json(j, boundary->value);
    gbd::write_json_file(path, j);
  });
}

double gbd_boundary_threshold(const gbd_boundary* boundary) { return boundary ? boundary->value.threshold : 0.0; }

void gbd_boundary_free(gbd_boundary* boundary) { delete boundary; }

gbd_status gbd_defend(const gbd_model* model, const gbd_boundary* boundary, const gbd_dataset* dataset,
                      const size_t* indices, size_t index_count, const char* explainer_json, char** out_jsonl) {
  return guarded([&] {
    require(model && boundary && dataset && out_jsonl, "model, boundary, dataset and out_jsonl");
    const auto config = explainer_from(explainer_json);
    std::vector<std::size_t> which;
    if (indices) {
      which.assign(indices, indices + index_count);
    } else {
      for (std::size_t i = 0; i < dataset->value.size(); ++i) which.push_back(i);
    }
    std::string lines;
    for (std::size_t i : which) {
      if (i >= dataset->value.size()) gbd::fail(gbd::ErrorCode::kInvalidArgument, fmt::format("graph index {} out of range", i));
      const auto& g = dataset->value.graphs[i];
      gbd::GraphLog log{0, "input", i, g.label(), {}, gbd::defend(model->value, g, boundary->value, config)};
      json j = gbd::to_json(log);
      j.erase("row");
      lines += j.dump() + "\n";
    }
    *out_jsonl = copy_out(lines);
  });
}

gbd_status gbd_evaluate(const gbd_model* model, const gbd_boundary* boundary, const gbd_dataset* clean_set,
                        const gbd_split* split, const gbd_dataset* trojan, const gbd_poison* record,
                        const char* explainer_json, char** out_json) {
  return guarded([&] {
    require(model && boundary && clean_set && split && record && out_json,
            "model, boundary, clean_set, split, record and out_json");
    const auto config = explainer_from(explainer_json);
    gbd::TrojanSet set;
    if (trojan) {
      set.dataset = trojan->value;
    } else {
      set = gbd::embed_test_triggers(clean_set->value, split->value, record->value);
    }
    if (set.anchors.size() != set.dataset.size()) {
      // A trojan set passed in without provenance: rebuild the anchors from the record.
      const auto rebuilt = gbd::embed_test_triggers(clean_set->value, split->value, record->value);
      if (!(rebuilt.dataset.graphs == set.dataset.graphs)) {
        gbd::fail(gbd::ErrorCode::kPrecondition, "trojan set does not match the poison record and split");
      }
      set = rebuilt;
    }
    const auto clean_test = gbd::select(clean_set->value, split->value.test);
    gbd::ResultRow row;
    row.dataset = clean_set->value.name;
    row.arch = gbd::to_string(model->value.config.architecture);
    row.params_count = model->value.size();
    row.trigger_size = record->value.spec.size_fraction;
    row.density = record->value.spec.density;
    row.poison_rate = record->value.spec.poisoning_rate;
    row.seed = record->value.spec.seed;
    std::vector<gbd::GraphLog> logs;
    gbd::evaluate_defense(model->value, boundary->value, clean_test, split->value.test, set,
                          record->value.target_label, config, 0, row, logs);
    *out_json = copy_out(gbd::to_json(row).dump());
  });
}

gbd_status gbd_results_csv(const char* rows_json, char** out_csv) {
  return guarded([&] {
    require(rows_json && out_csv, "rows_json and out_csv");
    const json rows = parse_json_text(rows_json, "results rows");
    if (!rows.is_array()) gbd::fail(gbd::ErrorCode::kFormat, "results rows must be a JSON array");
    gbd::ResultsTable table;
    for (const json& r : rows) table.push_back(gbd::result_row_from_json(r));
    *out_csv = copy_out(gbd::results_csv(table));
  });
}

// ---- experiments

gbd_status gbd_sweep_plan(const char* config_json, char** out_json) {
  return guarded([&] {
    require(out_json != nullptr, "out_json");
    const auto config = experiment_from(config_json);
    json plan = json::array();
    for (const auto& p : gbd::expand_grid(config)) {
      plan.push_back({{"model_index", p.model_index},
                      {"architecture", gbd::to_string(config.models[p.model_index].architecture)},
                      {"trigger_size", p.trigger_size},
                      {"density", p.density},
                      {"poison_rate", p.poison_rate},
                      {"seed", p.seed}});
    }
    *out_json = copy_out(plan.dump());
  });
}

gbd_status gbd_sweep_run(const char* config_json, int jobs, const char* out_dir, size_t* failed_rows) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir");
    const auto config = experiment_from(config_json);
    const auto dataset = gbd::load_experiment_dataset(config);
    const auto result = gbd::run_experiment(config, dataset, jobs);
    gbd::emit_report(result, out_dir, config.histogram_bins);
    if (failed_rows) {
      *failed_rows = static_cast<size_t>(std::count_if(result.table.begin(), result.table.end(),
                                                       [](const gbd::ResultRow& r) { return !r.error.empty(); }));
    }
  });
}

gbd_status gbd_capacity_study(const char* config_json, const char* out_dir, char** out_json) {
  return guarded([&] {
    require(out_dir != nullptr, "out_dir");
    const auto config = experiment_from(config_json);
    const auto dataset = gbd::load_experiment_dataset(config);
    const auto curves = gbd::capacity_study(config, dataset);
    const std::filesystem::path dir(out_dir);
    std::filesystem::create_directories(dir);
    std::string csv = "model_index,seed,params_count,epoch,loss,clean_acc,asr\n";
    json summary = json::array();
    for (const auto& c : curves) {
      for (const auto& r : c.history) {
        csv += fmt::format("{},{},{},{},{},{},{}\n", c.model_index, c.seed, c.parameter_count, r.epoch, r.loss,
                           r.clean_accuracy ? fmt::format("{}", *r.clean_accuracy) : std::string(gbd::kNoTrials),
                           r.asr ? fmt::format("{}", *r.asr) : std::string(gbd::kNoTrials));
      }
      summary.push_back({{"model_index", c.model_index},
                         {"seed", c.seed},
                         {"parameter_count", c.parameter_count},
                         {"first_epoch_asr_above_0.5",
                          c.first_epoch_asr_above ? json(*c.first_epoch_asr_above) : json(nullptr)}});
    }
    write_text(dir / "capacity.csv", csv);
    write_text(dir / "capacity_summary.json", summary.dump(2) + "\n");
    if (out_json) *out_json = copy_out(summary.dump());
  });
}

gbd_status gbd_report_summarize(const char* results_csv_path, char** out_csv) {
  return guarded([&] {
    require(results_csv_path && out_csv, "results_csv_path and out_csv");
    *out_csv = copy_out(gbd::summary_csv(gbd::read_results_csv(results_csv_path)));
  });
}

}  // extern "C"
