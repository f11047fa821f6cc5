#include <fstream>
#include <limits>

#include "gbd/serialization.hpp"
#include "support.hpp"

using namespace gbd;
using nlohmann::json;

template <class T>
T round_trip(const T& value) {
  json j;
  to_json(j, value);
  return parse_as<T>(json::parse(j.dump()), "value");
}

TEST_CASE("serialization: dataset, split and poison record round trips") {
  const GraphDataset d = load_tu_dataset(gbd::test::data_dir() / "MUTAG", "MUTAG");
  const GraphDataset back = round_trip(d);
  CHECK(back.name == d.name);
  CHECK(back.graphs == d.graphs);
  CHECK(back.original_node_labels == d.original_node_labels);

  DataSplit s{{0, 3, 4}, {1}, {2}, {"warning"}};
  const DataSplit sb = round_trip(s);
  CHECK(sb.train == s.train);
  CHECK(sb.warnings == s.warnings);

  PoisonRecord r;
  r.spec = {0.2, 0.8, 1, 0.05, 99};
  r.target_label = 1;
  r.trigger = {3, {{0, 1}, {1, 2}}};
  r.poisoned_train_indices = {4, 7};
  r.anchors = {{1, 2, 3}, {0, 5, 6}};
  const PoisonRecord rb = round_trip(r);
  CHECK(rb == r);
  CHECK(rb.spec.seed == 99);
}

TEST_CASE("serialization: checkpoints restore identical predictions") {
  Rng rng(51);
  for (Architecture arch : {Architecture::kGraphConv, Architecture::kGin}) {
    const ModelParams p = init_params(gbd::test::small_model(arch, 3, 2, Readout::kSum), 7);
    json j;
    to_json(j, p);
    CHECK(j.at("format") == "gbd-checkpoint");
    CHECK(j.at("version") == kCheckpointVersion);
    const ModelParams back = parse_as<ModelParams>(json::parse(j.dump()), "checkpoint");
    CHECK(back.values == p.values);
    const Graph g = gbd::test::random_graph(rng, 3, 7, 3, 0.5);
    CHECK(forward(back, g).probabilities == forward(p, g).probabilities);

    json bad = j;
    bad["tensors"][0]["shape"] = {1, 1};
    CHECK(gbd::test::error_code_of([&] { parse_as<ModelParams>(bad, "checkpoint"); }) == ErrorCode::kFormat);
    json wrong = j;
    wrong["format"] = "something-else";
    CHECK(gbd::test::error_code_of([&] { parse_as<ModelParams>(wrong, "checkpoint"); }) == ErrorCode::kFormat);
  }
}

TEST_CASE("serialization: boundaries keep infinities") {
  DetectionBoundary b = DetectionBoundary::fixed(std::numeric_limits<double>::infinity());
  b.validation_scores = {0.25, -0.5};
  const DetectionBoundary back = round_trip(b);
  CHECK(back.threshold == std::numeric_limits<double>::infinity());
  CHECK(back.validation_scores == b.validation_scores);
  DetectionBoundary low = DetectionBoundary::fixed(-std::numeric_limits<double>::infinity());
  CHECK(round_trip(low).threshold == -std::numeric_limits<double>::infinity());
}

TEST_CASE("serialization: configs parse with defaults and reject unknown names") {
  const ModelConfig m = parse_as<ModelConfig>(json::parse(R"({"architecture":"gin","layer_dims":[8]})"), "model");
  CHECK(m.architecture == Architecture::kGin);
  CHECK(m.layer_dims == std::vector<int>{8});
  CHECK(m.readout == Readout::kMean);
  CHECK(gbd::test::error_code_of([] { parse_as<ModelConfig>(json::parse(R"({"architecture":"gcn"})"), "model"); }) ==
        ErrorCode::kConfig);

  const ExplainerConfig e =
      parse_as<ExplainerConfig>(json::parse(R"({"method":"occlusion","sparsity_bounds":[0.2,0.8]})"), "explainer");
  CHECK(e.method == ExplainMethod::kOcclusion);
  CHECK(e.sparsity_min == 0.2);
  CHECK(e.sparsity_max == 0.8);
  CHECK(round_trip(e).output == e.output);

  const TrainHyper h = parse_as<TrainHyper>(json::parse(R"({"epochs":5})"), "train");
  CHECK(h.epochs == 5);
  CHECK(h.learning_rate == 0.01);
}

TEST_CASE("serialization: file helpers report missing and malformed files") {
  const auto dir = gbd::test::scratch_dir("json-files");
  CHECK(gbd::test::error_code_of([&] { read_json_file(dir / "missing.json"); }) == ErrorCode::kLoad);
  std::ofstream(dir / "bad.json") << "{not json";
  CHECK(gbd::test::error_code_of([&] { read_json_file(dir / "bad.json"); }) == ErrorCode::kFormat);
  write_json_file(dir / "nested" / "ok.json", json{{"a", 1}});
  CHECK(read_json_file(dir / "nested" / "ok.json").at("a") == 1);
}
