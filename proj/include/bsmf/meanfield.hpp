#pragma once

#include "bsmf/generator.hpp"

namespace bsmf {

/// Adaptive step control for the embedded Runge-Kutta pair.
struct StepControl {
    double abs_tol = 1e-10;
    double rel_tol = 1e-8;
    double h_init = 1e-3;
    double h_min = 1e-12;
    double h_max = 1.0;
    /// Entries above this negative floor are treated as roundoff and clamped
    /// to zero (then renormalized); anything below aborts the integration.
    double negativity_floor = -1e-12;
};

struct Trajectory {
    std::vector<double> times;
    std::vector<MeanFieldVector> states;
    AssemblyMode mode = AssemblyMode::Standard;
    std::optional<std::int64_t> n; // empty = limiting equations
    std::int64_t clamp_events = 0;
    double max_mass_defect = 0.0; // max |y e - 1| seen at accepted steps
    std::int64_t steps_accepted = 0;
    std::int64_t steps_rejected = 0;
};

/// Integrates dy/dt = y V_y from g to t_end, reporting states on `n_outputs`
/// evenly spaced times (including 0 and t_end). V_y is reassembled at every
/// derivative evaluation. Mass is conserved to roundoff and checked against
/// 1e-9 at every accepted step.
Trajectory integrate(const MeanFieldVector& g, const ModelParams& p,
                     std::optional<std::int64_t> N, AssemblyMode mode, double t_end,
                     const StepControl& ctrl = {}, int n_outputs = 201);

struct SteadyStateOptions {
    double tol = 1e-10;   // stop when ||y V_y||_inf drops below this
    double t_max = 2e4;   // model hours before giving up
    double check_dt = 5.0; // first derivative-check interval; grows geometrically
    StepControl ctrl;
};

/// Long-horizon integration until the derivative norm falls below tol;
/// the brute-force oracle for the nonlinear QBD fixed point. Throws
/// NoConvergence (detail = final derivative norm) if t_max is reached first.
MeanFieldVector steady_state_by_integration(const ModelParams& p,
                                            std::optional<std::int64_t> N, AssemblyMode mode,
                                            const MeanFieldVector& g,
                                            const SteadyStateOptions& opts = {});

/// ||y V_y||_inf at y.
double derivative_norm(const MeanFieldVector& y, const ModelParams& p,
                       std::optional<std::int64_t> N, AssemblyMode mode);

} // namespace bsmf
