#include "bsmf/measures.hpp"

#include <algorithm>
#include <cmath>

namespace bsmf {

PerformanceReport performance(const MeanFieldVector& pi, const ModelParams& p) {
    if (pi.num_levels() != p.num_levels() || pi.m() != p.env.m ||
        pi.floor_level() != p.floor_level())
        throw Error(ErrorCode::InvalidArgument, "vector geometry does not match model");

    const int K = p.K, L = p.L;
    auto block_sum = [&](int k) {
        double s = 0.0;
        for (int j = 0; j < p.env.m; ++j) s += pi(k, j);
        return s;
    };

    PerformanceReport r;
    for (int k = 1; k <= K + L; ++k) r.mean_bikes += static_cast<double>(k) * block_sum(k);
    for (int k = -L; k <= -1; ++k) r.mean_wait_rent += static_cast<double>(-k) * block_sum(k);
    for (int k = K + 1; k <= K + L; ++k)
        r.mean_wait_return += static_cast<double>(k - K) * block_sum(k);
    r.mean_wait_max = std::max(r.mean_wait_rent, r.mean_wait_return);
    r.prob_strong = block_sum(-L) + block_sum(K + L);
    for (int k = -L; k <= 0; ++k) r.prob_weak += block_sum(k);
    for (int k = K; k <= K + L; ++k) r.prob_weak += block_sum(k);
    return r;
}

double efficiency_ratio(const ModelParams& p, AssemblyMode mode,
                        const FixedPointOptions& opts) {
    if (p.L < 1)
        throw Error(ErrorCode::InvalidArgument,
                    "efficiency ratio is undefined at its own L = 0 baseline");

    ModelParams baseline = p;
    baseline.L = 0;

    FixedPoint with_room = solve_fixed_point(p, mode, opts);
    FixedPoint without_room = solve_fixed_point(baseline, mode, opts);
    if (!with_room.converged || !without_room.converged)
        throw Error(ErrorCode::NoConvergence,
                    "fixed-point solve did not converge while computing the efficiency ratio",
                    std::max(with_room.residual, without_room.residual));

    double ps = performance(with_room.pi, p).prob_strong;
    double ps0 = performance(without_room.pi, baseline).prob_strong;
    if (ps0 <= 0.0)
        throw Error(ErrorCode::DegenerateBoundary,
                    "baseline strong probability vanished; ratio undefined");
    return ps / ps0;
}

} // namespace bsmf
