#pragma once

// Batch front-end: JSON scenario configs, deterministic subcommand runs,
// report.json plus CSV emission for external plotting.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace flagdyn {

// Schema violations, unreadable files, inconsistent dimensions. Maps to
// exit code 1; parse failures carry file:line:column anchors.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct CliOverrides {
  std::optional<std::uint64_t> seed;  // overrides the config seed
  std::optional<int> threads;
  bool strict = false;  // non-convergence warnings turn into exit code 3
};

// Runs one subcommand (spectrum | morse | check | unique-ergodic | iid-demo |
// perturb) against a JSON config, writing report.json, hull_vertices.csv,
// margins.csv and spectrum_convergence.csv into out_dir. Returns the process
// exit code: 0 success, 1 config error, 2 capacity/resolution error, 3
// non-convergence under strict. Reports are byte-identical for identical
// config + seed, independent of the thread count.
int run_scenario(const std::string& subcommand, const std::string& config_path,
                 const std::string& out_dir, const CliOverrides& overrides = {});

}  // namespace flagdyn
