#pragma once

#include <cstdint>

#include "gbd/graph.hpp"

namespace gbd {

/// Deterministic molecule-like dataset in the shape of the AIDS collection:
/// two classes at a 1:4 ratio (class 0 "active"), 10-25 atoms per graph,
/// tree backbones with a few ring closures, 38 atom types. Active graphs
/// carry a handful of atom types that are rare in inactive ones.
GraphDataset make_aids_like_dataset(std::uint64_t seed, std::size_t graph_count = 500);

}  // namespace gbd
