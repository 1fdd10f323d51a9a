#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "dyadlab/lattice.hpp"

namespace dyadlab {

// Flat key=value experiment configuration shared by all subcommands.
// Unset sample budgets (samples < 0) fall back to per-command defaults.
struct ExperimentConfig {
    int dim = 1;
    int k_min = -10;                    // norm sweeps; dense oracles use -8
    std::uint64_t seed = 1;
    std::string out_dir = "out";
    std::string shift_family = "petermichl";
    std::vector<double> power_exponents;  // power-weight family parameters
    std::vector<double> a2_targets;       // cascade-weight family targets
    std::vector<int> r_values;            // complexity sweep range
    int r0_min = 2;
    int r0_max = 8;
    std::int64_t samples = -1;
    double weight_target = 100.0;
    double alpha = 1.0;
    double tolerance = 1e-6;            // power-iteration residual tolerance
};

// Parses `key = value` lines; '#' starts a comment; unknown keys throw.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig load_config(const std::string& path);

struct FitResult {
    double slope = 0.0;
    double intercept = 0.0;
    double r2 = 0.0;
    std::int64_t points = 0;
    double residual_max = 0.0;
    bool valid = false;  // a slope is only reported with >= 4 points
};

// Ordinary least squares y ~ slope * x + intercept.
FitResult ols_fit(const std::vector<double>& x, const std::vector<double>& y);

// One CSV artifact: fixed column order, 17-significant-digit numbers, plus the
// (module, operation, seed) provenance triple recorded in the summary JSON.
struct CsvTable {
    std::string name;
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;
    std::string module;
    std::string operation;
    std::uint64_t seed = 0;
    std::string to_string() const;
};

std::string format_sig(double v);  // 17 significant digits

struct RunReport {
    std::string command;
    std::vector<CsvTable> tables;
    std::string summary_json;  // deterministic (key-ordered) serialization
    bool pass = true;
};

RunReport run_a2_sweep(const ExperimentConfig& cfg);
RunReport run_complexity_sweep(const ExperimentConfig& cfg);
RunReport run_weak11(const ExperimentConfig& cfg);
RunReport run_carleson(const ExperimentConfig& cfg);
RunReport run_corona(const ExperimentConfig& cfg);
RunReport run_jn(const ExperimentConfig& cfg);
RunReport run_representation(const ExperimentConfig& cfg);
RunReport run_invariant_suite(const ExperimentConfig& cfg);

// Writes every table as <name>.csv and the summary as <command>_summary.json.
void write_report(const RunReport& report, const std::string& out_dir);

}  // namespace dyadlab
