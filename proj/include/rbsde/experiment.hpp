#pragma once

#include "rbsde/convex_analysis.hpp"
#include "rbsde/driver.hpp"
#include "rbsde/levy_model.hpp"
#include "rbsde/pdii_fd_oracle.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace rbsde {

/// Parsed experiment file. The file is JSON (comments allowed) with blocks
/// model, barrier, driver, grid, basis, regression, ladder, oracle,
/// tolerances and output; see README for the schema and defaults.
struct ExperimentConfig {
    std::string text;  // canonical JSON of the effective configuration

    double drift = 0.0;
    double sigma = 0.0;
    std::vector<JumpAtom> atoms;
    double horizon = 1.0;

    std::string barrier_kind = "none";
    double barrier_lower = -kInf;
    double barrier_upper = kInf;
    double kappa = 1.0;
    double slope = 1.0;
    double level = 0.0;

    std::string driver_preset = "zero";
    double c0 = 0.0;
    double c1 = 0.0;
    double y_coef = 0.0;
    double z_coef = 0.0;
    std::string terminal = "identity";
    double strike = 0.0;

    int steps = 100;
    std::size_t paths = 100000;
    std::uint64_t seed = 0;

    int truncation = 6;
    int degree = 4;
    bool hinge = true;
    int knots = 8;

    std::vector<double> ladder;

    bool oracle_enabled = false;
    std::optional<double> oracle_x_min;
    std::optional<double> oracle_x_max;
    double oracle_dx = 0.01;
    double oracle_dtau = 1e-3;
    int oracle_time_points = 10;
    double oracle_max_extrapolated_share = 0.01;

    double tol_domain_violation = 1e-2;
    double tol_minimality_se = 3.0;
    double tol_fk_y0 = 2e-2;
    bool require_cauchy = true;

    std::string output_dir = "out";
    bool dump = true;
};

/// Parses and validates; throws ConfigError with a specific message.
ExperimentConfig parse_config(const std::string& text);
ExperimentConfig load_config(const std::filesystem::path& file);

LevyModel config_model(const ExperimentConfig& cfg);
ConvexBarrier config_barrier(const ExperimentConfig& cfg);
DriverSpec config_driver(const ExperimentConfig& cfg);
FdGridParams config_oracle_grid(const ExperimentConfig& cfg, const LevyModel& model);

struct RunOptions {
    std::optional<std::uint64_t> seed;
    std::optional<std::filesystem::path> out_dir;
    unsigned threads = 0;
};

struct Summary {
    bool pass = true;
    std::vector<std::string> lines;
};

/// Exit codes of run/replay.
inline constexpr int kExitPass = 0;
inline constexpr int kExitError = 1;
inline constexpr int kExitToleranceFailure = 2;

/// simulate -> solve_reflected -> check_solution_contract -> optional oracle.
/// Writes convergence.csv, checks.csv, basis.csv, summary.txt (and bundle.bin,
/// surface.csv when enabled) into the output directory; returns the exit code.
int run_experiment(const std::filesystem::path& config_file, const RunOptions& options);
int run_experiment(ExperimentConfig cfg, const RunOptions& options);

/// Reruns the solver stages on a dumped bundle. The embedded config is used
/// unless `config_file` is given; throws HashMismatch if its model differs.
int replay_experiment(const std::filesystem::path& dump_file, const std::optional<std::filesystem::path>& config_file,
                      const RunOptions& options);

/// Pass/fail from the emitted CSV texts only.
Summary summarize(const std::string& convergence_csv, const std::string& checks_csv);

/// Merges convergence tables, prefixing each row with its source file.
std::string merge_tables(const std::vector<std::filesystem::path>& files);

/// Resolves the output directory: explicit option, then RBSDE_OUT_DIR, then the config.
std::filesystem::path resolve_output_dir(const ExperimentConfig& cfg, const RunOptions& options);

}  // namespace rbsde
