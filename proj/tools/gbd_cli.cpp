// gbd: command-line driver over the C interface.
//
// Single-run commands share a run directory (--out). `attack` fills it with
// the clean dataset, split, poisoned training set, poison record and the
// trigger-embedded test set; `train`, `calibrate`, `defend` and `eval` read
// what earlier steps wrote. Settings resolve as flags > --config file >
// defaults, and every command records them in <out>/manifest.json before
// doing any work.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "gbd/gbd.h"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kDataDirEnv = "GBD_DATA_DIR";

// --- C API plumbing ----------------------------------------------------------

struct CallError : std::runtime_error {
  gbd_status status;
  CallError(gbd_status s, const std::string& what) : std::runtime_error(what), status(s) {}
};

void check(gbd_status s) {
  if (s != GBD_OK) throw CallError(s, gbd_last_error());
}

struct StringDeleter {
  void operator()(char* p) const { gbd_string_free(p); }
};
using OwnedString = std::unique_ptr<char, StringDeleter>;

std::string take(char* s) { return OwnedString(s).get(); }

template <class T, void (*Free)(T*)>
struct Deleter {
  void operator()(T* p) const { Free(p); }
};
using Dataset = std::unique_ptr<gbd_dataset, Deleter<gbd_dataset, gbd_dataset_free>>;
using Split = std::unique_ptr<gbd_split, Deleter<gbd_split, gbd_split_free>>;
using Poison = std::unique_ptr<gbd_poison, Deleter<gbd_poison, gbd_poison_free>>;
using Model = std::unique_ptr<gbd_model, Deleter<gbd_model, gbd_model_free>>;
using Boundary = std::unique_ptr<gbd_boundary, Deleter<gbd_boundary, gbd_boundary_free>>;

// --- settings --------------------------------------------------------------

struct Options {
  std::string dataset;
  std::string dir;
  std::optional<std::uint64_t> seed;
  std::string out = "run";
  std::string config;

  std::optional<double> trigger_size;
  std::optional<double> density;
  std::optional<double> poison_rate;
  std::optional<int> target;
  std::vector<double> split;

  std::string arch;
  std::vector<int> layers;
  std::string readout;
  std::optional<int> epochs;
  std::optional<double> lr;
  std::optional<std::size_t> batch_size;

  std::string method;
  std::optional<int> ig_steps;
  std::vector<double> sparsity_bounds;
  std::string output;
  std::optional<double> quantile;

  std::string input;
  std::vector<std::size_t> indices;

  std::size_t count = 500;
  int jobs = 1;
  bool dry_run = false;
  bool capacity = false;
  std::string results;
};

json defaults() {
  return json{{"schema_version", 1},
              {"dataset", {{"name", "MUTAG"}, {"dir", ""}}},
              {"models", json::array({{{"architecture", "graph_conv"}, {"layer_dims", {64, 64}}, {"readout", "mean"}}})},
              {"grid", {{"trigger_size", {0.2}}, {"density", {0.8}}, {"poison_rate", {0.05}}}},
              {"target_label", 0},
              {"explainer", {{"method", "integrated_gradients"}, {"ig_steps", 50}, {"sparsity_bounds", {0.1, 0.9}},
                             {"output", "probability"}}},
              {"train", {{"epochs", 100}, {"learning_rate", 0.01}, {"batch_size", 0}}},
              {"seeds", {0}},
              {"split", {0.8, 0.1, 0.1}},
              {"quantile", 1.0},
              {"histogram_bins", 20}};
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw CallError(GBD_ERR_LOAD, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw CallError(GBD_ERR_CONFIG, path.string() + ": " + e.what());
  }
}

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw CallError(GBD_ERR_LOAD, "cannot write " + path.string());
  out << text;
}

std::string dataset_dir_for(const std::string& name, const std::string& dir) {
  std::string base = dir;
  if (base.empty()) {
    const char* env = std::getenv(kDataDirEnv);
    base = env ? env : "data";
  }
  // Accept both the parent of <name>/ and the directory holding the files.
  const fs::path nested = fs::path(base) / name;
  if (fs::is_directory(nested)) return nested.string();
  return base;
}

/// flags > file > defaults, in the experiment-config schema.
json resolve(const Options& o) {
  json c = defaults();
  if (!o.config.empty()) c.merge_patch(read_json(o.config));
  if (!o.dataset.empty()) c["dataset"]["name"] = o.dataset;
  if (!o.dir.empty()) c["dataset"]["dir"] = o.dir;
  if (o.seed) c["seeds"] = {*o.seed};
  if (o.trigger_size) c["grid"]["trigger_size"] = {*o.trigger_size};
  if (o.density) c["grid"]["density"] = {*o.density};
  if (o.poison_rate) c["grid"]["poison_rate"] = {*o.poison_rate};
  if (o.target) c["target_label"] = *o.target;
  if (!o.split.empty()) c["split"] = o.split;
  json& m = c["models"][0];
  if (!o.arch.empty()) m["architecture"] = o.arch;
  if (!o.layers.empty()) m["layer_dims"] = o.layers;
  if (!o.readout.empty()) m["readout"] = o.readout;
  if (o.epochs) c["train"]["epochs"] = *o.epochs;
  if (o.lr) c["train"]["learning_rate"] = *o.lr;
  if (o.batch_size) c["train"]["batch_size"] = *o.batch_size;
  json& e = c["explainer"];
  if (!o.method.empty()) e["method"] = o.method == "ig" ? "integrated_gradients" : o.method;
  if (o.ig_steps) e["ig_steps"] = *o.ig_steps;
  if (!o.sparsity_bounds.empty()) e["sparsity_bounds"] = o.sparsity_bounds;
  if (!o.output.empty()) e["output"] = o.output;
  if (o.quantile) c["quantile"] = *o.quantile;
  const std::string name = c["dataset"]["name"].get<std::string>();
  if (fs::path(name).extension() != ".json") {
    c["dataset"]["dir"] = dataset_dir_for(name, c["dataset"]["dir"].get<std::string>());
  } else {
    c["dataset"]["dir"] = name;
  }
  return c;
}

template <class T>
T first(const json& v) {
  return v.is_array() ? v.at(0).get<T>() : v.get<T>();
}

std::uint64_t master_seed(const json& c) { return first<std::uint64_t>(c.at("seeds")); }

/// Adds this command's settings and artifacts to <out>/manifest.json.
void record_manifest(const fs::path& out, const std::string& command, const json& config, const json& artifacts) {
  fs::create_directories(out);
  const fs::path path = out / "manifest.json";
  json manifest = fs::exists(path) ? read_json(path) : json::object();
  manifest["tool_version"] = gbd_version();
  manifest["commands"][command] = {{"config", config}, {"seed", master_seed(config)}, {"artifacts", artifacts}};
  write_text(path, manifest.dump(2) + "\n");
}

Dataset load_dataset(const json& c) {
  const std::string name = c["dataset"]["name"].get<std::string>();
  gbd_dataset* d = nullptr;
  if (fs::path(name).extension() == ".json") {
    check(gbd_dataset_load_json(name.c_str(), &d));
  } else {
    check(gbd_dataset_load_tu(c["dataset"]["dir"].get<std::string>().c_str(), name.c_str(), &d));
  }
  return Dataset(d);
}

Dataset load_dataset_file(const fs::path& path) {
  gbd_dataset* d = nullptr;
  check(gbd_dataset_load_json(path.string().c_str(), &d));
  return Dataset(d);
}

Split load_split(const fs::path& path) {
  gbd_split* s = nullptr;
  check(gbd_split_load(path.string().c_str(), &s));
  return Split(s);
}

Poison load_poison(const fs::path& path) {
  gbd_poison* p = nullptr;
  check(gbd_poison_load(path.string().c_str(), &p));
  return Poison(p);
}

Model load_model(const fs::path& path) {
  gbd_model* m = nullptr;
  check(gbd_model_load(path.string().c_str(), &m));
  return Model(m);
}

Boundary load_boundary(const fs::path& run) {
  const fs::path path = run / "boundary.json";
  if (!fs::exists(path)) {
    throw CallError(GBD_ERR_PRECONDITION, "no calibration artifact at " + path.string() +
                                              "; run `gbd calibrate --out " + run.string() + "` first");
  }
  gbd_boundary* b = nullptr;
  check(gbd_boundary_load(path.string().c_str(), &b));
  return Boundary(b);
}

void require_artifact(const fs::path& path, const std::string& producer) {
  if (!fs::exists(path)) {
    throw CallError(GBD_ERR_PRECONDITION,
                    "missing " + path.string() + "; run `gbd " + producer + "` with the same --out first");
  }
}

/// Run-directory settings written by earlier commands, with this command's
/// flags applied on top.
json run_config(const Options& o) {
  const fs::path path = fs::path(o.out) / "config.json";
  Options merged = o;
  if (merged.config.empty() && fs::exists(path)) merged.config = path.string();
  return resolve(merged);
}

// --- commands ----------------------------------------------------------------

int cmd_data_info(const Options& o) {
  const json c = resolve(o);
  const Dataset d = load_dataset(c);
  char* text = nullptr;
  check(gbd_dataset_info(d.get(), &text));
  const json info = json::parse(take(text));
  std::cout << "dataset        " << info["name"].get<std::string>() << "\n"
            << "graphs         " << info["graphs"] << "\n"
            << "classes        " << info["num_classes"] << "\n"
            << "feature_dim    " << info["feature_dim"] << "\n"
            << "average_nodes  " << info["average_nodes"] << "\n"
            << "average_edges  " << info["average_edges"] << "\n"
            << "nodes_range    " << info["min_nodes"] << ".." << info["max_nodes"] << "\n";
  const auto counts = info["class_counts"];
  for (std::size_t k = 0; k < counts.size(); ++k) std::cout << "class_" << k << "        " << counts[k] << "\n";
  return 0;
}

int cmd_data_export(const Options& o) {
  const json c = resolve(o);
  const Dataset d = load_dataset(c);
  fs::path out(o.out);
  if (out.extension() != ".json") out /= c["dataset"]["name"].get<std::string>() + ".json";
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  check(gbd_dataset_save_json(d.get(), out.string().c_str()));
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_data_synth(const Options& o) {
  gbd_dataset* raw = nullptr;
  check(gbd_dataset_synthesize_aids(o.seed.value_or(0), o.count, &raw));
  const Dataset d(raw);
  const fs::path out = fs::path(o.out) / "AIDS";
  fs::create_directories(out);
  check(gbd_dataset_save_tu(d.get(), out.string().c_str()));
  std::cout << out.string() << "\n";
  return 0;
}

int cmd_attack(const Options& o) {
  const json c = resolve(o);
  const fs::path out(o.out);
  const std::uint64_t seed = master_seed(c);
  const json spec{{"size_fraction", first<double>(c["grid"]["trigger_size"])},
                  {"density", first<double>(c["grid"]["density"])},
                  {"target_label", c["target_label"]},
                  {"poisoning_rate", first<double>(c["grid"]["poison_rate"])},
                  {"seed", gbd_derive_seed(seed, "attack", 0)}};
  const json artifacts{{"dataset", (out / "dataset.json").string()},     {"split", (out / "split.json").string()},
                       {"poisoned", (out / "poisoned.json").string()},   {"poison_record", (out / "poison.json").string()},
                       {"trojan_test", (out / "trojan_test.json").string()}};
  record_manifest(out, "attack", c, artifacts);
  write_text(out / "config.json", c.dump(2) + "\n");

  const Dataset dataset = load_dataset(c);
  const auto f = c["split"].get<std::vector<double>>();
  gbd_split* split = nullptr;
  check(gbd_split_create(dataset.get(), f.at(0), f.at(1), f.at(2), gbd_derive_seed(seed, "split", 0), &split));
  const Split split_owned(split);
  gbd_dataset* poisoned = nullptr;
  gbd_poison* record = nullptr;
  check(gbd_attack_poison(dataset.get(), split, spec.dump().c_str(), &poisoned, &record));
  const Dataset poisoned_owned(poisoned);
  const Poison record_owned(record);
  gbd_dataset* trojan = nullptr;
  check(gbd_attack_embed_test(dataset.get(), split, record, &trojan));
  const Dataset trojan_owned(trojan);

  check(gbd_dataset_save_json(dataset.get(), (out / "dataset.json").string().c_str()));
  check(gbd_split_save(split, (out / "split.json").string().c_str()));
  check(gbd_dataset_save_json(poisoned, (out / "poisoned.json").string().c_str()));
  check(gbd_poison_save(record, (out / "poison.json").string().c_str()));
  check(gbd_dataset_save_json(trojan, (out / "trojan_test.json").string().c_str()));
  std::cout << "poisoned " << gbd_poison_victim_count(record) << " of " << gbd_split_count(split, 0)
            << " training graphs; " << gbd_dataset_size(trojan) << " trojan test graphs\n";
  return 0;
}

int cmd_train(const Options& o) {
  const json c = run_config(o);
  const fs::path out(o.out);
  for (const char* f : {"dataset.json", "split.json", "poisoned.json", "trojan_test.json"}) {
    require_artifact(out / f, "attack");
  }
  json train = c["train"];
  train["seed"] = gbd_derive_seed(master_seed(c), "train", 0);
  record_manifest(out, "train", c,
                  {{"checkpoint", (out / "model.json").string()}, {"history", (out / "history.csv").string()}});
  write_text(out / "config.json", c.dump(2) + "\n");

  const Dataset clean = load_dataset_file(out / "dataset.json");
  const Dataset poisoned = load_dataset_file(out / "poisoned.json");
  const Dataset trojan = load_dataset_file(out / "trojan_test.json");
  const Split split = load_split(out / "split.json");
  gbd_model* model = nullptr;
  char* history = nullptr;
  check(gbd_model_train(poisoned.get(), clean.get(), split.get(), trojan.get(), c["target_label"].get<int>(),
                        c["models"][0].dump().c_str(), train.dump().c_str(), &model, &history));
  const Model owned(model);
  write_text(out / "history.csv", take(history));
  check(gbd_model_save(model, (out / "model.json").string().c_str()));
  std::cout << "trained " << gbd_model_parameter_count(model) << " parameters\n";
  return 0;
}

int cmd_calibrate(const Options& o) {
  const json c = run_config(o);
  const fs::path out(o.out);
  require_artifact(out / "model.json", "train");
  record_manifest(out, "calibrate", c, {{"boundary", (out / "boundary.json").string()}});
  write_text(out / "config.json", c.dump(2) + "\n");

  const Model model = load_model(out / "model.json");
  const Dataset clean = load_dataset_file(out / "dataset.json");
  const Split split = load_split(out / "split.json");
  gbd_boundary* boundary = nullptr;
  check(gbd_boundary_calibrate(model.get(), clean.get(), split.get(), c["explainer"].dump().c_str(),
                               c["quantile"].get<double>(), &boundary));
  const Boundary owned(boundary);
  check(gbd_boundary_save(boundary, (out / "boundary.json").string().c_str()));
  std::cout << "threshold " << json(gbd_boundary_threshold(boundary)).dump() << "\n";
  return 0;
}

int cmd_defend(const Options& o) {
  const json c = run_config(o);
  const fs::path out(o.out);
  require_artifact(out / "model.json", "train");
  const Boundary boundary = load_boundary(out);
  const fs::path input = o.input.empty() ? out / "trojan_test.json" : fs::path(o.input);
  record_manifest(out, "defend", c, {{"input", input.string()}, {"log", (out / "defense_log.jsonl").string()}});

  const Model model = load_model(out / "model.json");
  const Dataset dataset = load_dataset_file(input);
  char* lines = nullptr;
  check(gbd_defend(model.get(), boundary.get(), dataset.get(), o.indices.empty() ? nullptr : o.indices.data(),
                   o.indices.size(), c["explainer"].dump().c_str(), &lines));
  const std::string text = take(lines);
  write_text(out / "defense_log.jsonl", text);
  std::size_t flagged = 0;
  std::size_t total = 0;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    ++total;
    if (json::parse(line).at("flagged").get<bool>()) ++flagged;
  }
  std::cout << "flagged " << flagged << " of " << total << " graphs\n";
  return 0;
}

int cmd_eval(const Options& o) {
  const json c = run_config(o);
  const fs::path out(o.out);
  require_artifact(out / "model.json", "train");
  const Boundary boundary = load_boundary(out);
  record_manifest(out, "eval", c, {{"row", (out / "row.json").string()}, {"results", (out / "results.csv").string()}});

  const Model model = load_model(out / "model.json");
  const Dataset clean = load_dataset_file(out / "dataset.json");
  const Dataset trojan = load_dataset_file(out / "trojan_test.json");
  const Split split = load_split(out / "split.json");
  const Poison record = load_poison(out / "poison.json");
  char* row = nullptr;
  check(gbd_evaluate(model.get(), boundary.get(), clean.get(), split.get(), trojan.get(), record.get(),
                     c["explainer"].dump().c_str(), &row));
  json row_json = json::parse(take(row));
  // The table reports the master seed, matching sweep rows.
  row_json["seed"] = master_seed(c);
  write_text(out / "row.json", row_json.dump(2) + "\n");
  char* csv = nullptr;
  check(gbd_results_csv(json::array({row_json}).dump().c_str(), &csv));
  const std::string table = take(csv);
  write_text(out / "results.csv", table);
  std::cout << table;
  return 0;
}

int cmd_sweep(const Options& o) {
  if (o.config.empty()) throw CallError(GBD_ERR_CONFIG, "sweep needs --config");
  Options flags = o;
  json c = resolve(flags);
  if (!o.seed) {
    // A file's seed list is kept whole; --seed replaces it with one seed.
    const json file = read_json(o.config);
    if (file.contains("seeds")) c["seeds"] = file["seeds"];
  }
  const std::string text = c.dump();
  if (o.dry_run) {
    char* plan = nullptr;
    check(gbd_sweep_plan(text.c_str(), &plan));
    const json points = json::parse(take(plan));
    std::cout << "model_index,architecture,trigger_size,density,poison_rate,seed\n";
    for (const json& p : points) {
      std::cout << p["model_index"] << "," << p["architecture"].get<std::string>() << "," << p["trigger_size"] << ","
                << p["density"] << "," << p["poison_rate"] << "," << p["seed"] << "\n";
    }
    std::cout << points.size() << " grid points\n";
    return 0;
  }
  const fs::path out(o.out);
  if (o.capacity) {
    record_manifest(out, "capacity", c, {{"curves", (out / "capacity.csv").string()},
                                         {"summary", (out / "capacity_summary.json").string()}});
    char* summary = nullptr;
    check(gbd_capacity_study(text.c_str(), out.string().c_str(), &summary));
    std::cout << json::parse(take(summary)).dump(2) << "\n";
    return 0;
  }
  record_manifest(out, "sweep", c,
                  {{"results", (out / "results.csv").string()}, {"summary", (out / "summary.csv").string()},
                   {"defense_log", (out / "defense_log.jsonl").string()}, {"errors", (out / "errors.jsonl").string()},
                   {"es_histogram", (out / "es_histogram.csv").string()},
                   {"importance_distribution", (out / "importance_distribution.csv").string()},
                   {"curves", (out / "curves").string()}});
  std::size_t failed = 0;
  check(gbd_sweep_run(text.c_str(), o.jobs, out.string().c_str(), &failed));
  if (failed > 0) {
    std::cerr << "gbd: " << failed << " grid row(s) failed; see " << (out / "errors.jsonl").string() << "\n";
    return 1;
  }
  std::cout << (out / "results.csv").string() << "\n";
  return 0;
}

int cmd_report(const Options& o) {
  const fs::path results = o.results.empty() ? fs::path(o.out) / "results.csv" : fs::path(o.results);
  char* csv = nullptr;
  check(gbd_report_summarize(results.string().c_str(), &csv));
  std::cout << take(csv);
  return 0;
}

// --- flag wiring -------------------------------------------------------------

void common_flags(CLI::App* app, Options& o) {
  app->add_option("--dataset", o.dataset, "Dataset name (TU format) or path to a JSON export");
  app->add_option("--dir", o.dir, std::string("Data directory (default $") + kDataDirEnv + " or ./data)");
  app->add_option("--seed", o.seed, "Master seed");
  app->add_option("--out", o.out, "Output / run directory")->capture_default_str();
  app->add_option("--config", o.config, "JSON config file (experiment schema)");
}

void attack_flags(CLI::App* app, Options& o) {
  app->add_option("--trigger-size", o.trigger_size, "Trigger nodes as a fraction of the average graph size")
      ->check(CLI::Range(0.0, 1.0));
  app->add_option("--density", o.density, "Trigger edge probability")->check(CLI::Range(0.0, 1.0));
  app->add_option("--poison-rate", o.poison_rate, "Fraction of training graphs to poison")
      ->check(CLI::Validator(
          [](std::string& s) -> std::string {
            const double v = std::stod(s);
            return v > 0.0 && v < 1.0 ? "" : "poison rate must be in (0, 1)";
          },
          "(0, 1)"));
  app->add_option("--target", o.target, "Target label");
  app->add_option("--split", o.split, "Train, validation and test fractions")->expected(3);
}

void model_flags(CLI::App* app, Options& o) {
  app->add_option("--arch", o.arch, "graph_conv or gin")->check(CLI::IsMember({"graph_conv", "gin"}));
  app->add_option("--layers", o.layers, "Hidden widths, e.g. --layers 64 64");
  app->add_option("--readout", o.readout, "mean or sum")->check(CLI::IsMember({"mean", "sum"}));
  app->add_option("--epochs", o.epochs, "Training epochs")->check(CLI::PositiveNumber);
  app->add_option("--lr", o.lr, "Adam learning rate")->check(CLI::PositiveNumber);
  app->add_option("--batch-size", o.batch_size, "Mini-batch size, 0 = full batch");
}

void explainer_flags(CLI::App* app, Options& o) {
  app->add_option("--method", o.method, "ig, integrated_gradients or occlusion")
      ->check(CLI::IsMember({"ig", "integrated_gradients", "occlusion"}));
  app->add_option("--ig-steps", o.ig_steps, "Integrated-gradients steps")->check(CLI::PositiveNumber);
  app->add_option("--sparsity-bounds", o.sparsity_bounds, "Lower and upper sparsity")->expected(2);
  app->add_option("--output", o.output, "probability or logit")->check(CLI::IsMember({"probability", "logit"}));
  app->add_option("--quantile", o.quantile, "Validation quantile for the boundary");
}

int run(int argc, char** argv) {
  CLI::App app{"Graph backdoor attack and explanation-based defense"};
  app.require_subcommand(1);
  app.set_version_flag("--version", gbd_version());
  Options o;
  int status = 0;

  auto* data = app.add_subcommand("data", "Inspect, export or synthesize datasets");
  data->require_subcommand(1);
  auto* info = data->add_subcommand("info", "Print dataset statistics");
  auto* exp = data->add_subcommand("export", "Write the dataset as JSON");
  auto* synth = data->add_subcommand("synth", "Write the synthetic AIDS-format fixture in TU format");
  for (auto* s : {info, exp, synth}) common_flags(s, o);
  synth->add_option("--count", o.count, "Number of graphs")->capture_default_str();
  info->callback([&] { status = cmd_data_info(o); });
  exp->callback([&] { status = cmd_data_export(o); });
  synth->callback([&] { status = cmd_data_synth(o); });

  auto* attack = app.add_subcommand("attack", "Split, poison the training set and embed test triggers");
  common_flags(attack, o);
  attack_flags(attack, o);
  attack->callback([&] { status = cmd_attack(o); });

  auto* train = app.add_subcommand("train", "Train a classifier on the poisoned training set");
  common_flags(train, o);
  model_flags(train, o);
  train->callback([&] { status = cmd_train(o); });

  auto* calibrate = app.add_subcommand("calibrate", "Fit the detection boundary on clean validation graphs");
  common_flags(calibrate, o);
  explainer_flags(calibrate, o);
  calibrate->callback([&] { status = cmd_calibrate(o); });

  auto* defend = app.add_subcommand("defend", "Detect and sanitize graphs");
  common_flags(defend, o);
  explainer_flags(defend, o);
  defend->add_option("--input", o.input, "Dataset JSON to defend (default: the run's trojan test set)");
  defend->add_option("--indices", o.indices, "Graph indices to defend (default: all)");
  defend->callback([&] { status = cmd_defend(o); });

  auto* eval = app.add_subcommand("eval", "Compute one results row for the run");
  common_flags(eval, o);
  explainer_flags(eval, o);
  eval->callback([&] { status = cmd_eval(o); });

  auto* sweep = app.add_subcommand("sweep", "Run an experiment grid from a config file");
  common_flags(sweep, o);
  sweep->add_option("--jobs", o.jobs, "Parallel grid rows")->check(CLI::PositiveNumber)->capture_default_str();
  sweep->add_flag("--dry-run", o.dry_run, "Print the grid without running it");
  sweep->add_flag("--capacity", o.capacity, "Per-epoch ASR curves for every model instead of the grid");
  sweep->callback([&] { status = cmd_sweep(o); });

  auto* report = app.add_subcommand("report", "Summarize a results CSV");
  common_flags(report, o);
  report->add_option("--results", o.results, "Results CSV (default <out>/results.csv)");
  report->callback([&] { status = cmd_report(o); });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  } catch (const CallError& e) {
    std::cerr << "gbd: " << gbd_status_name(e.status) << ": " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "gbd: " << e.what() << "\n";
    return 2;
  }
  return status;
}

}  // namespace

int main(int argc, char** argv) { return run(argc, argv); }
