// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "reorient/config.hpp"

namespace reorient::cli {

// Exit codes: 0 success, 2 configuration error, 3 runtime failure.
int run_command(const std::vector<std::string>& args);

struct RoundtripReport {
  bool ok = false;
  std::string kind;
  std::string detail;
};

// Loads a checkpoint, replays its stored probe batch, and compares the
// outputs bitwise.
RoundtripReport checkpoint_roundtrip(const std::string& path);

// Shared by eval and sweep; returns the written records.
struct EvalArtifacts {
  std::string records_path;
  std::string report_csv_path;
  std::string report_json_path;
  std::string ecdf_svg_path;
  double success_rate_04 = 0.0;
  double mean_error = 0.0;
};

EvalArtifacts run_eval(const GlobalConfig& config, const std::string& run_dir,
                       const std::string& policy_kind,
                       const std::string& checkpoint_path, int episodes,
                       const std::string& object_name);

}  // namespace reorient::cli
