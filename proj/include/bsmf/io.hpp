#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "bsmf/meanfield.hpp"
#include "bsmf/measures.hpp"
#include "bsmf/qbd.hpp"
#include "bsmf/sim.hpp"

namespace bsmf {

inline constexpr const char* kToolVersion = "bsmf 0.1.0";

/// One swept model field: name in {lambda<i>, mu<i>, alpha, beta, K, C, L}
/// (environment-state indices are 1-based in configs and output headers).
struct SweepAxis {
    std::string param;
    std::vector<double> values;
};

/// Resolved experiment configuration. Loaded from a JSON document; CLI flags
/// override individual fields after loading.
struct ExperimentConfig {
    ModelParams model;

    // fixed-point solver
    AssemblyMode mode = AssemblyMode::Standard;
    FixedPointOptions solver;

    // ODE integration
    double ode_t_end = 200.0;
    int ode_outputs = 201;
    std::optional<std::int64_t> ode_n; // empty = limiting equations
    StepControl ode_ctrl;
    SteadyStateOptions steady;

    // simulation
    SimOptions sim;

    // sweep
    std::vector<SweepAxis> axes;
    bool sweep_efficiency_ratio = false;

    // compare
    std::vector<std::int64_t> compare_n_list;

    std::filesystem::path out_dir = "out";
    bool plots = false;
    int threads = 0; // 0 = hardware concurrency

    std::string echo; // compact JSON of the resolved configuration
};

ExperimentConfig load_config(const std::filesystem::path& path);

/// Environment spec files (JSON: m, W, theta, lambda, mu).
void save_environment(const EnvironmentSpec& env, const std::filesystem::path& path);
EnvironmentSpec load_environment(const std::filesystem::path& path);

/// '#'-prefixed metadata header embedded at the top of every output file:
/// tool version plus the resolved configuration echo. Never timestamps, so
/// identical runs produce identical bytes.
std::string metadata_header(const std::string& config_echo);

void write_csv(const std::filesystem::path& path, const std::string& header_comment,
               const std::vector<std::string>& columns,
               const std::vector<std::vector<std::string>>& rows);

std::string format_double(double v);

/// Delimited dumps of the core objects.
void write_matrix_csv(const std::filesystem::path& path, const Eigen::MatrixXd& mat,
                      const std::string& header_comment);
void write_fixed_point_csv(const std::filesystem::path& path, const FixedPoint& fp,
                           const ModelParams& p, const std::string& header_comment);
void write_fixed_point_json(const std::filesystem::path& path, const FixedPoint& fp,
                            const ModelParams& p);
void write_trajectory_csv(const std::filesystem::path& path, const Trajectory& traj,
                          const ModelParams& p, const std::string& header_comment);
void write_sim_csv(const std::filesystem::path& path, const SimResult& sim,
                   const ModelParams& p, const std::string& header_comment);

} // namespace bsmf
