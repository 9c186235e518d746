#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "bsmf/model.hpp"

namespace bsmf {

/// Two readings of the finite-N microscopic dynamics.
///
/// `Physical` is the mechanistic system: one shared environment state for the
/// whole network, customers arrive at rate N lambda_j and pick a station
/// uniformly, rented bikes join an explicit in-transit pool, each in-transit
/// bike completes at rate mu_j with a uniform destination, and a bike refused
/// by a full station stays in the pool (memoryless re-ride). Bike count is
/// conserved exactly and checked after every event.
///
/// `PaperRates` closes the dynamics on the empirical measure: each station
/// carries its own environment state switching at the W rates, moves down at
/// the virtual service rate and up at the finite-N virtual arrival rate
/// evaluated on the current empirical measure. This is the Markov system
/// whose mean-field limit is the block-structured ODE, so it is the mode the
/// convergence validations run in; divergence of `Physical` from it is a
/// reported diagnostic, not an error.
enum class SimMode { Physical, PaperRates };

std::string to_string(SimMode mode);
SimMode sim_mode_from_string(const std::string& name);

struct SimOptions {
    std::int64_t N = 100;
    double horizon = 100.0; // model hours
    std::uint64_t seed = 1;
    SimMode mode = SimMode::Physical;
    double sample_dt = 0.0;      // spacing of the sampled trajectory; 0 = none
    double burn_in_frac = 0.2;   // fraction of the horizon excluded from time averages
    int initial_level = kDefaultInitialLevel;
    std::int64_t max_events = -1; // stop early after this many events (< 0: no cap)
    bool track_station_means = false;

    static constexpr int kDefaultInitialLevel = INT32_MIN; // resolves to C
};

struct SimResult {
    SimMode mode = SimMode::Physical;
    std::int64_t N = 0;
    std::uint64_t seed = 0;
    double elapsed = 0.0; // simulated hours (== horizon unless max_events hit)
    double burn_in = 0.0;
    std::int64_t events = 0;
    std::int64_t clamp_events = 0;

    std::vector<double> sample_times;
    std::vector<Eigen::MatrixXd> samples; // occupancy fractions, levels x m

    /// Occupancy fractions averaged over [burn_in, elapsed], levels x m.
    Eigen::MatrixXd time_avg;

    /// Per-station time-averaged level over [0, elapsed]
    /// (only when track_station_means was set).
    std::vector<double> station_mean_level;

    Eigen::VectorXd time_avg_level_marginal() const;
};

SimResult run(const ModelParams& p, const SimOptions& opts);

/// Joint distribution of a station subset's levels versus the product of the
/// single-station marginal, estimated by the exchangeability-averaged
/// time-average (all ordered distinct subsets contribute, which is what makes
/// the estimate usable at moderate horizons). The bootstrap interval
/// resamples time blocks.
struct ChaosResult {
    int subset_size = 2;
    std::vector<double> joint;    // flattened levels^subset_size, row-major
    Eigen::VectorXd marginal;     // single-station level marginal
    double tv = 0.0;              // TV(joint, product of marginals)
    double tv_ci_lo = 0.0;        // bootstrap 2.5 percentile
    double tv_ci_hi = 0.0;        // bootstrap 97.5 percentile
    int blocks = 0;
    std::int64_t samples = 0;
};

ChaosResult chaos_check(const ModelParams& p, const SimOptions& opts, int subset_size,
                        int n_blocks = 30, int n_bootstrap = 200, double grid_dt = 0.05);

/// One row per (N, seed) replication: total-variation distance of the
/// time-averaged empirical level marginal to the reference level marginal.
struct ConvergenceRow {
    std::int64_t N = 0;
    std::uint64_t seed = 0;
    double tv = 0.0;
};

std::vector<ConvergenceRow> convergence_sweep(const ModelParams& p,
                                              const std::vector<std::int64_t>& n_list,
                                              double horizon,
                                              const std::vector<std::uint64_t>& seeds,
                                              SimMode mode,
                                              const Eigen::VectorXd& reference_level_marginal,
                                              int threads = 0);

/// Replication seeds derive from a master seed by hashing the replication
/// index through a SplitMix64 step: child = splitmix64(master ^ golden*(i+1)).
std::uint64_t child_seed(std::uint64_t master, std::uint64_t index);

} // namespace bsmf
