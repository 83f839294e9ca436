#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "danzer/chabauty.hpp"
#include "danzer/pointset.hpp"
#include "danzer/witness.hpp"

namespace danzer {

/// Format version stamped into every emitted document.
inline constexpr const char* kSpecVersion = "1.0";

/// Exit-code contract shared by all experiment drivers: 0 for a concentration
/// (or all-pass) outcome, 2 for a gap / property failure, 1 for errors.
inline constexpr int kExitConcentration = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitGap = 2;

struct ExperimentConfig {
    std::string experiment; ///< optional; the CLI subcommand takes precedence
    std::uint64_t seed = 0;
    bool has_seed = false;
    nlohmann::json net;    ///< point-set specification (see NetOracle::from_json)
    nlohmann::json params; ///< per-experiment parameters
    std::string out;       ///< output path; empty writes to stdout
    std::string format = "json"; ///< "json" or "csv" where both make sense

    static ExperimentConfig from_json(const nlohmann::json& j);
    static ExperimentConfig from_file(const std::string& path);
    nlohmann::ordered_json to_json() const;
};

/// Writes content to path via a temporary file and rename; never leaves a
/// half-written result behind.
void write_file_atomic(const std::string& path, const std::string& content);

/// RFC 4180 field quoting.
std::string csv_escape(const std::string& field);

int run_witness_cmd(const ExperimentConfig& cfg);
int run_chained_cmd(const ExperimentConfig& cfg); ///< the `proof2` subcommand
int run_stress_cmd(const ExperimentConfig& cfg);
int run_sweep_cmd(const ExperimentConfig& cfg);
int run_boxes_cmd(const ExperimentConfig& cfg);
int run_metric_cmd(const ExperimentConfig& cfg);
int run_linebuild_cmd(const ExperimentConfig& cfg);
int run_schedule_cmd(const ExperimentConfig& cfg);

} // namespace danzer
