#pragma once

#include "bsmf/qbd.hpp"

namespace bsmf {

/// Stationary performance measures of the tagged station.
struct PerformanceReport {
    double mean_bikes = 0.0;       // E[Q]  = sum_{k=1}^{K+L} k pi_k e
    double mean_wait_rent = 0.0;   // E[N1] = sum_{k=-L}^{-1} (-k) pi_k e
    double mean_wait_return = 0.0; // E[N2] = sum_{k=K+1}^{K+L} (k-K) pi_k e
    double mean_wait_max = 0.0;    // E[N]  = max(E[N1], E[N2])
    double prob_strong = 0.0;      // p_s = pi_{-L} e + pi_{K+L} e
    double prob_weak = 0.0;        // p_w = sum_{k<=0} pi_k e + sum_{k>=K} pi_k e
};

PerformanceReport performance(const MeanFieldVector& pi, const ModelParams& p);

/// Improvement ratio of the strong problematic-station probability relative
/// to the same model without a waiting room: upsilon = p_s / p_s|_{L=0}.
/// Solves both models; requires L >= 1.
double efficiency_ratio(const ModelParams& p, AssemblyMode mode,
                        const FixedPointOptions& opts = {});

} // namespace bsmf
