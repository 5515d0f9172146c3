#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "vtx/geometry.hpp"

namespace vtx {

struct RunOverrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
};

struct RunResult {
  int exit_code = 1;
  std::string report_path;
  std::string report_json;
};

// Experiment runner behind the CLI: parses a JSON config, wires the modules,
// writes report.json / trace.csv / field dumps, and returns the exit status
// contract (0 solution or expected verdicts, 2 non-existence, 1 errors).
RunResult run_experiment_file(const std::string& config_path, const RunOverrides& ov);
RunResult run_experiment_json(const std::string& config_json, const RunOverrides& ov);

// row-major CSV grid with axis metadata in the header comment
void emit_grid(const RealField& field, const std::string& path, const std::string& name);

} // namespace vtx
