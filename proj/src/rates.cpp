#include "bsmf/rates.hpp"

namespace bsmf {

namespace {

void check_env_state(int j, const ModelParams& p) {
    if (j < 0 || j >= p.env.m)
        throw Error(ErrorCode::InvalidArgument, "environment state out of range");
}

/// x + 2x^2 + 3x^3 + ... = x/(1-x)^2, requiring x < 1.
double retry_series(double x) {
    double denom = 1.0 - x;
    if (denom <= 0.0)
        throw Error(ErrorCode::RetrySeriesDivergence,
                    "retry series requires mass fraction < 1", x);
    return x / (denom * denom);
}

double clamp_rate(double rate, ClampStats* stats) {
    if (rate < 0.0) {
        if (stats) ++stats->clamped;
        return 0.0;
    }
    return rate;
}

} // namespace

double service_rate(int k, int j, const ModelParams& p) {
    check_env_state(j, p);
    if (k == p.floor_level())
        throw Error(ErrorCode::NoServiceAtFloor, "no downward transition at the floor level", k);
    if (k < p.floor_level() || k > p.ceiling_level())
        throw Error(ErrorCode::InvalidArgument, "level out of range");
    if (k >= 1) return p.env.lambda[j];
    return p.env.lambda[j] * p.alpha; // -(L-1) <= k <= 0
}

double interaction_scalar(const MeanFieldVector& y, int j, const ModelParams& p) {
    check_env_state(j, p);
    const int K = p.K, L = p.L;
    double zeta = static_cast<double>(p.C);
    for (int k = 1; k <= K + L; ++k) zeta -= static_cast<double>(k) * y(k, j);
    for (int k = K; k <= K + L - 1; ++k) zeta += retry_series((1.0 - p.beta) * y(k, j));
    zeta += retry_series(y(K + L, j));
    return zeta;
}

double arrival_rate_finiteN(int l, int j, const MeanFieldVector& y, std::int64_t N,
                            const ModelParams& p, ClampStats* stats) {
    check_env_state(j, p);
    if (N < 1) throw Error(ErrorCode::InvalidArgument, "need N >= 1");
    if (l == p.ceiling_level())
        throw Error(ErrorCode::NoArrivalAtCeiling, "no upward transition at the ceiling level", l);
    if (l < p.floor_level() || l > p.ceiling_level())
        throw Error(ErrorCode::InvalidArgument, "level out of range");

    const double theta_j = interaction_scalar(y, j, p);
    const double interaction = static_cast<double>(N - 1) * theta_j;
    const double mu_over_n = p.env.mu[j] / static_cast<double>(N);

    double rate;
    if (l <= 0) {
        rate = mu_over_n * (static_cast<double>(p.C) + interaction);
    } else if (l <= p.C - 1) {
        rate = mu_over_n * (static_cast<double>(p.C - l) + interaction);
    } else if (l <= p.K - 1) {
        rate = mu_over_n * interaction;
    } else { // K <= l <= K+L-1
        rate = p.beta * mu_over_n * interaction;
    }
    return clamp_rate(rate, stats);
}

double arrival_rate_limit(int l, int j, const MeanFieldVector& y,
                          const ModelParams& p, ClampStats* stats) {
    check_env_state(j, p);
    if (l == p.ceiling_level())
        throw Error(ErrorCode::NoArrivalAtCeiling, "no upward transition at the ceiling level", l);
    if (l < p.floor_level() || l > p.ceiling_level())
        throw Error(ErrorCode::InvalidArgument, "level out of range");

    double rate = p.env.mu[j] * interaction_scalar(y, j, p);
    if (l >= p.K) rate *= p.beta;
    return clamp_rate(rate, stats);
}

RateTable rate_table(const MeanFieldVector& y, const ModelParams& p,
                     std::optional<std::int64_t> N, ClampStats* stats) {
    RateTable t;
    t.floor = p.floor_level();
    t.ceiling = p.ceiling_level();
    t.m = p.env.m;
    t.xi = Eigen::MatrixXd::Zero(p.num_levels(), p.env.m);
    t.eta = Eigen::MatrixXd::Zero(p.num_levels(), p.env.m);

    for (int j = 0; j < p.env.m; ++j) {
        // zeta_j is level-independent; evaluate once and reuse across levels.
        const double zeta = interaction_scalar(y, j, p);
        for (int k = t.floor; k <= t.ceiling - 1; ++k) {
            double rate;
            if (N) {
                const double interaction = static_cast<double>(*N - 1) * zeta;
                const double mu_over_n = p.env.mu[j] / static_cast<double>(*N);
                if (k <= 0)
                    rate = mu_over_n * (static_cast<double>(p.C) + interaction);
                else if (k <= p.C - 1)
                    rate = mu_over_n * (static_cast<double>(p.C - k) + interaction);
                else if (k <= p.K - 1)
                    rate = mu_over_n * interaction;
                else
                    rate = p.beta * mu_over_n * interaction;
            } else {
                rate = p.env.mu[j] * zeta;
                if (k >= p.K) rate *= p.beta;
            }
            if (rate < 0.0) {
                if (stats) ++stats->clamped;
                rate = 0.0;
            }
            t.xi(p.offset(k), j) = rate;
        }
        for (int k = t.floor + 1; k <= t.ceiling; ++k)
            t.eta(p.offset(k), j) = (k >= 1) ? p.env.lambda[j] : p.env.lambda[j] * p.alpha;
    }
    return t;
}

} // namespace bsmf
