#pragma once

#include <cstdint>
#include <optional>

#include "bsmf/model.hpp"

namespace bsmf {

/// Counts rate evaluations whose mean-field bracket went negative and was
/// clamped to zero. A negative virtual arrival rate has no generator
/// interpretation, so callers surface the count instead.
struct ClampStats {
    std::int64_t clamped = 0;
};

/// Virtual service rate eta_{k,j}: the rate at which the level moves down at
/// level k in environment state j. lambda_j when a bike is available
/// (1 <= k <= K+L), lambda_j * alpha when an arriving renter may join the
/// waiting room (-(L-1) <= k <= 0). Independent of the station count and of
/// the mean field. Throws NoServiceAtFloor at k = -L.
double service_rate(int k, int j, const ModelParams& p);

/// Mean-field interaction scalar zeta_j evaluated at y:
///
///   zeta_j = C - sum_{k=1}^{K+L} k y_{k,j}
///          + sum_{k=K}^{K+L-1} (1-beta) y_{k,j} / (1 - (1-beta) y_{k,j})^2
///          + y_{K+L,j} / (1 - y_{K+L,j})^2
///
/// The retry sums are the closed form of the geometric series
/// x + 2x^2 + 3x^3 + ... = x/(1-x)^2 and require x < 1; otherwise a
/// RetrySeriesDivergence error is thrown. The result may be negative for
/// adversarial y; rate evaluators clamp at zero (see ClampStats).
double interaction_scalar(const MeanFieldVector& y, int j, const ModelParams& p);

/// Finite-N virtual arrival rate xi^{(N)}_{l,j}(y) for level l in
/// [-L, K+L-1]. Throws NoArrivalAtCeiling at l = K+L.
double arrival_rate_finiteN(int l, int j, const MeanFieldVector& y, std::int64_t N,
                            const ModelParams& p, ClampStats* stats = nullptr);

/// Limiting (N -> infinity) virtual arrival rate: mu_j zeta_j(y) for
/// -L <= l <= K-1 and beta mu_j zeta_j(y) for K <= l <= K+L-1.
double arrival_rate_limit(int l, int j, const MeanFieldVector& y,
                          const ModelParams& p, ClampStats* stats = nullptr);

/// Per-level rate vectors feeding generator assembly: xi[k] defined on
/// [-L, K+L-1], eta[k] on [-L+1, K+L], both indexed by level offset k+L.
struct RateTable {
    int floor = 0;
    int ceiling = 0;
    int m = 0;
    Eigen::MatrixXd xi;  // num_levels x m; ceiling row unused (zero)
    Eigen::MatrixXd eta; // num_levels x m; floor row unused (zero)
};

/// Evaluates the full rate table at y. `N` empty selects the limiting form.
RateTable rate_table(const MeanFieldVector& y, const ModelParams& p,
                     std::optional<std::int64_t> N, ClampStats* stats = nullptr);

} // namespace bsmf
