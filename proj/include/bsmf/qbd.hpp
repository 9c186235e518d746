#pragma once

#include "bsmf/generator.hpp"

namespace bsmf {

/// Forward block elimination of a level-tridiagonal generator: R[k] expresses
/// pi_{k-1} = pi_k R[k], and `xi_censored` is the generator of the chain
/// censored at the ceiling level, whose null vector seeds back-substitution.
struct RMeasure {
    int floor = 0;
    int ceiling = 0;
    int m = 0;
    std::vector<Eigen::MatrixXd> R; // R[offset(k)] defined for k > floor
    Eigen::MatrixXd xi_censored;

    int offset(int level) const { return level - floor; }
};

/// R[floor+1] = -down[floor+1] local[floor]^{-1};
/// R[k]       = -down[k] (R[k-1] up[k-2] + local[k-1])^{-1};
/// censored   = R[ceiling] up[ceiling-1] + local[ceiling].
/// Throws FactorizationFailure naming the level when an inner matrix is
/// singular.
RMeasure rg_factorize(const BlockTridiagonalGenerator& V);

/// Stationary vector of the frozen generator V: solves the censored boundary
/// system at the ceiling, back-substitutes pi_k = pi_{k+1} R[k+1], and
/// normalizes. Throws DegenerateBoundary when the censored null space is not
/// one-dimensional.
MeanFieldVector linear_qbd_solve(const BlockTridiagonalGenerator& V);

struct FixedPointOptions {
    enum class Init { LevelC, Uniform };
    Init init = Init::LevelC;
    /// Mixing weight of the damped-substitution safeguard step (used when a
    /// Newton step on the reduced map is unusable).
    double damping = 0.5;
    double tol = 1e-10; // on both ||pi V_pi||_inf and the final step norm
    int max_iter = 500;
};

struct FixedPoint {
    MeanFieldVector pi;
    double residual = 0.0; // ||pi V_pi||_inf at the returned iterate
    int iterations = 0;
    AssemblyMode mode = AssemblyMode::Standard;
    bool converged = false;
    double last_step = 0.0; // ||pi_{n+1} - pi_n||_inf at exit
    std::int64_t clamp_events = 0;
};

/// Solves pi V_pi = 0, pi e = 1. The generator depends on pi only through
/// the m interaction scalars, so the outer iteration is a safeguarded
/// finite-difference Newton root-find on zeta -> zeta(pi(zeta)), each
/// evaluation passing through the R-measure solve of the frozen chain;
/// plain damped substitution limit-cycles near critical load and is kept
/// only as the safeguard direction. Non-convergence returns the best
/// iterate flagged, it does not throw.
FixedPoint solve_fixed_point(const ModelParams& p, AssemblyMode mode,
                             const FixedPointOptions& opts = {});
FixedPoint solve_fixed_point(const ModelParams& p, AssemblyMode mode,
                             const MeanFieldVector& init, const FixedPointOptions& opts);

/// ||pi V_pi||_inf with V assembled at pi (limiting rates).
double fixed_point_residual(const MeanFieldVector& pi, const ModelParams& p, AssemblyMode mode);

} // namespace bsmf
