#pragma once

#include <optional>
#include <string>

#include "vtx/bundle.hpp"

namespace vtx {

// VTXF binary state container: little-endian, header {magic "VTXF",
// version u32, complex_dim u32, grid 4×u32, rank u32, chern 2×i32}, then a
// block list of float64 payloads. Link angles and sections round-trip
// bit-exactly; matrix blocks are stored raw and re-validated on load.
struct StateBundle {
  std::optional<GaugeField> gauge;
  std::vector<Section> sections;
  std::optional<MetricField> metric;
};

void save_checkpoint(const std::string& path, const StateBundle& state);
StateBundle load_checkpoint(const std::string& path, const LatticeTorus& torus);

} // namespace vtx
