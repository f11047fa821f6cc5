#include <limits>

#include "gbd/defense.hpp"
#include "support.hpp"

using namespace gbd;

TEST_CASE("defense: fidelity and infidelity at the mask extremes") {
  Rng rng(41);
  for (Architecture arch : {Architecture::kGraphConv, Architecture::kGin}) {
    const ModelParams p = init_params(gbd::test::small_model(arch, 3, 3), 2);
    for (int i = 0; i < 100; ++i) {
      const Graph g = gbd::test::random_graph(rng, 1, 9, 3, 0.4);
      const int label = static_cast<int>(rng.uniform_index(3));
      HardMask empty{std::vector<std::uint8_t>(g.edge_count(), 0), 0.5};
      HardMask full{std::vector<std::uint8_t>(g.edge_count(), 1), 0.5};
      CHECK(fidelity(p, g, empty, label) == 0.0);
      CHECK(infidelity(p, g, full, label) == 0.0);
      HardMask random = empty;
      for (auto& b : random.bits) b = rng.uniform01() < 0.5;
      const double f = fidelity(p, g, random, label);
      const double inf = infidelity(p, g, random, label);
      CHECK(std::abs(f) <= 1.0);
      CHECK(std::abs(inf) <= 1.0);
    }
  }
}

TEST_CASE("defense: explainability score composition") {
  Rng rng(42);
  const ModelParams p = init_params(gbd::test::small_model(Architecture::kGraphConv, 3, 2), 3);
  for (ExplainMethod method : {ExplainMethod::kIntegratedGradients, ExplainMethod::kOcclusion}) {
    ExplainerConfig config;
    config.method = method;
    config.ig_steps = 20;
    for (int i = 0; i < 40; ++i) {
      const Graph g = gbd::test::random_graph(rng, 1, 9, 3, 0.4);
      const ExplainabilityScore s = explainability_score(p, g, config);
      CHECK(s.es == s.fidelity - s.infidelity);
      CHECK(s.explained_label == s.prediction.predicted_label);
      CHECK(s.sparsity_used >= 0.1);
      CHECK(s.sparsity_used <= 0.9);
      CHECK(s.hard_mask.bits.size() == g.edge_count());
      CHECK(s.fidelity == fidelity(p, g, s.hard_mask, s.explained_label));
      if (g.edge_count() == 0) {
        CHECK(s.cv == 0.0);
        CHECK(s.es == 0.0);
      }
    }
  }
}

TEST_CASE("defense: nearest-rank quantile matches a sort oracle") {
  Rng rng(43);
  for (int i = 0; i < 300; ++i) {
    std::vector<double> v(1 + rng.uniform_index(30));
    for (double& x : v) x = rng.uniform(-1.0, 1.0);
    const double q = 0.01 + 0.99 * rng.uniform01();
    std::vector<double> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    // Smallest element with at least q n elements at or below it.
    double oracle = sorted.back();
    for (std::size_t r = 1; r <= sorted.size(); ++r) {
      if (static_cast<double>(r) >= q * static_cast<double>(sorted.size())) {
        oracle = sorted[r - 1];
        break;
      }
    }
    CHECK(nearest_rank_quantile(v, q) == oracle);
  }
  CHECK(nearest_rank_quantile({3.0, 1.0, 2.0}, 1.0) == 3.0);
  CHECK(nearest_rank_quantile({3.0, 1.0, 2.0, 4.0}, 0.5) == 2.0);
  CHECK(gbd::test::error_code_of([] { nearest_rank_quantile({}, 0.5); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("defense: calibration and the flagging rule") {
  Rng rng(44);
  const ModelParams p = init_params(gbd::test::small_model(Architecture::kGraphConv, 3, 2), 4);
  std::vector<Graph> validation;
  for (int i = 0; i < 12; ++i) validation.push_back(gbd::test::random_graph(rng, 3, 9, 3, 0.4));
  ExplainerConfig config;
  config.ig_steps = 10;
  const DetectionBoundary b = calibrate(p, validation, config);
  CHECK(b.validation_scores.size() == validation.size());
  CHECK(b.quantile_value == *std::max_element(b.validation_scores.begin(), b.validation_scores.end()));
  CHECK(b.threshold == b.quantile_value);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < validation.size(); ++i) {
    const bool f = defend(p, validation[i], b, config).flagged;
    CHECK(f == (b.validation_scores[i] >= b.threshold));
    flagged += f;
  }
  CHECK(flagged >= 1);
  const DetectionBoundary above = calibrate(p, validation, config, 1.0, 1e-9);
  CHECK(above.threshold == above.quantile_value + 1e-9);
  for (const Graph& g : validation) CHECK_FALSE(defend(p, g, above, config).flagged);
  const DetectionBoundary single = calibrate(p, std::span<const Graph>(validation.data(), 1), config);
  CHECK(single.threshold == single.validation_scores[0]);
  CHECK(gbd::test::error_code_of([&] { calibrate(p, std::span<const Graph>{}, config); }) == ErrorCode::kPrecondition);

  const auto everything = DetectionBoundary::fixed(-std::numeric_limits<double>::infinity());
  const auto nothing = DetectionBoundary::fixed(std::numeric_limits<double>::infinity());
  for (const Graph& g : validation) {
    const DefenseOutcome kept = defend(p, g, nothing, config);
    CHECK_FALSE(kept.flagged);
    CHECK(kept.sanitized_graph == g);
    CHECK(kept.final_prediction.predicted_label == kept.original_prediction.predicted_label);

    const DefenseOutcome cut = defend(p, g, everything, config);
    CHECK(cut.flagged);
    CHECK(cut.deleted_edge_indices == indices_of(cut.score.hard_mask.bits));
    CHECK(cut.sanitized_graph == remove_edges(g, cut.deleted_edge_indices));
    CHECK(cut.final_prediction.predicted_label == forward(p, cut.sanitized_graph).predicted_label);
    if (g.edge_count() == 0) CHECK_FALSE(cut.diagnostic.empty());
  }

  const Graph lonely(4, {}, Eigen::MatrixXd::Identity(4, 3), 0);
  const DefenseOutcome pass = defend(p, lonely, everything, config);
  CHECK(pass.flagged);
  CHECK(pass.sanitized_graph == lonely);
  CHECK_FALSE(pass.diagnostic.empty());
}
