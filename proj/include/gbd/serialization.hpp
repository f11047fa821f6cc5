#pragma once

#include <filesystem>
#include <string>

#include <json.hpp>

#include "gbd/attack.hpp"
#include "gbd/error.hpp"
#include "gbd/defense.hpp"
#include "gbd/explainer.hpp"
#include "gbd/gnn.hpp"
#include "gbd/graph.hpp"

// JSON forms of the pipeline artifacts. Readers throw gbd::Error with
// kFormat on malformed documents.

namespace gbd {

inline constexpr int kCheckpointVersion = 1;

void to_json(nlohmann::json& j, const Graph& g);
void from_json(const nlohmann::json& j, Graph& g);
void to_json(nlohmann::json& j, const GraphDataset& d);
void from_json(const nlohmann::json& j, GraphDataset& d);
void to_json(nlohmann::json& j, const DataSplit& s);
void from_json(const nlohmann::json& j, DataSplit& s);

void to_json(nlohmann::json& j, const TriggerSpec& s);
void from_json(const nlohmann::json& j, TriggerSpec& s);
void to_json(nlohmann::json& j, const PoisonRecord& r);
void from_json(const nlohmann::json& j, PoisonRecord& r);

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainHyper& h);
void from_json(const nlohmann::json& j, TrainHyper& h);
/// Versioned checkpoint: config plus named tensors (shape, row-major values).
void to_json(nlohmann::json& j, const ModelParams& p);
void from_json(const nlohmann::json& j, ModelParams& p);

void to_json(nlohmann::json& j, const ExplainerConfig& c);
void from_json(const nlohmann::json& j, ExplainerConfig& c);
void to_json(nlohmann::json& j, const DetectionBoundary& b);
void from_json(const nlohmann::json& j, DetectionBoundary& b);

std::string to_string(Architecture a);
std::string to_string(Readout r);

nlohmann::json read_json_file(const std::filesystem::path& path);
void write_json_file(const std::filesystem::path& path, const nlohmann::json& j, int indent = 2);

/// Parses with `from_json`, converting library exceptions to kFormat.
template <class T>
T parse_as(const nlohmann::json& j, const std::string& what) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::kFormat, "malformed " + what + ": " + e.what());
  }
}

}  // namespace gbd
