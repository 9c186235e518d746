#include "bsmf/meanfield.hpp"

#include <algorithm>
#include <cmath>

namespace bsmf {

namespace {

// Dormand-Prince 5(4) coefficients.
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247,
                 a64 = 49.0 / 176, a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192,
                 b5 = -2187.0 / 6784, b6 = 11.0 / 84;
constexpr double e1 = 35.0 / 384 - 5179.0 / 57600, e3 = 500.0 / 1113 - 7571.0 / 16695,
                 e4 = 125.0 / 192 - 393.0 / 640, e5 = -2187.0 / 6784 + 92097.0 / 339200,
                 e6 = 11.0 / 84 - 187.0 / 2100, e7 = -1.0 / 40;

struct Derivative {
    const ModelParams& p;
    std::optional<std::int64_t> N;
    AssemblyMode mode;
    ClampStats* stats;
    BlockTridiagonalGenerator V;
    MeanFieldVector scratch;

    Derivative(const ModelParams& params, std::optional<std::int64_t> n, AssemblyMode m,
               ClampStats* s)
        : p(params), N(n), mode(m), stats(s), scratch(MeanFieldVector::zero(params)) {}

    void operator()(const Eigen::VectorXd& y, Eigen::VectorXd& dy) {
        scratch.data() = y;
        assemble_into(V, scratch, p, N, mode, stats);
        V.apply_left(y, dy);
    }
};

struct Integrator {
    Derivative f;
    StepControl ctrl;
    double t = 0.0;
    double h;
    Eigen::VectorXd y;
    Eigen::VectorXd k1, k2, k3, k4, k5, k6, k7, ytmp, y5, err;
    std::int64_t accepted = 0, rejected = 0;
    double max_mass_defect = 0.0;
    bool have_k1 = false;

    Integrator(Derivative deriv, const StepControl& c, Eigen::VectorXd y0)
        : f(std::move(deriv)), ctrl(c), h(c.h_init), y(std::move(y0)) {}

    double error_norm(const Eigen::VectorXd& e, const Eigen::VectorXd& ya,
                      const Eigen::VectorXd& yb) const {
        double worst = 0.0;
        for (Eigen::Index i = 0; i < e.size(); ++i) {
            double scale = ctrl.abs_tol +
                           ctrl.rel_tol * std::max(std::abs(ya[i]), std::abs(yb[i]));
            worst = std::max(worst, std::abs(e[i]) / scale);
        }
        return worst;
    }

    void enforce_probability(double t_now) {
        double lo = y.minCoeff();
        if (lo < 0.0) {
            if (lo < ctrl.negativity_floor)
                throw Error(ErrorCode::IntegrationAbort,
                            "state left the probability simplex during integration", t_now);
            for (Eigen::Index i = 0; i < y.size(); ++i)
                if (y[i] < 0.0) y[i] = 0.0;
        }
        double mass = y.sum();
        max_mass_defect = std::max(max_mass_defect, std::abs(mass - 1.0));
        if (std::abs(mass - 1.0) > 1e-9)
            throw Error(ErrorCode::IntegrationAbort,
                        "probability mass drifted beyond tolerance", t_now);
        y /= mass;
    }

    /// Advances to exactly t_target.
    void advance_to(double t_target) {
        while (t < t_target) {
            double step = std::min({h, ctrl.h_max, t_target - t});
            if (!have_k1) {
                try {
                    f(y, k1);
                } catch (const Error& e) {
                    if (e.code() == ErrorCode::RetrySeriesDivergence)
                        throw Error(ErrorCode::IntegrationAbort,
                                    "rate evaluation failed during integration", t);
                    throw;
                }
                have_k1 = true;
            }
            try {
                ytmp = y + step * (a21 * k1);
                f(ytmp, k2);
                ytmp = y + step * (a31 * k1 + a32 * k2);
                f(ytmp, k3);
                ytmp = y + step * (a41 * k1 + a42 * k2 + a43 * k3);
                f(ytmp, k4);
                ytmp = y + step * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4);
                f(ytmp, k5);
                ytmp = y + step * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5);
                f(ytmp, k6);
                y5 = y + step * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
                f(y5, k7);
            } catch (const Error& e) {
                if (e.code() == ErrorCode::RetrySeriesDivergence)
                    throw Error(ErrorCode::IntegrationAbort,
                                "rate evaluation failed during integration", t);
                throw;
            }
            err = step * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
            double norm = error_norm(err, y, y5);
            if (norm <= 1.0) {
                t += step;
                y = y5;
                k1 = k7; // first-same-as-last
                ++accepted;
                enforce_probability(t);
                double grow = 0.9 * std::pow(std::max(norm, 1e-10), -0.2);
                h = step * std::clamp(grow, 0.2, 5.0);
            } else {
                ++rejected;
                have_k1 = true; // k1 still valid at unchanged (t, y)
                double shrink = 0.9 * std::pow(norm, -0.2);
                h = step * std::clamp(shrink, 0.1, 0.9);
                if (h < ctrl.h_min)
                    throw Error(ErrorCode::IntegrationAbort,
                                "step size underflow during integration", t);
            }
        }
    }
};

} // namespace

double derivative_norm(const MeanFieldVector& y, const ModelParams& p,
                       std::optional<std::int64_t> N, AssemblyMode mode) {
    BlockTridiagonalGenerator V = assemble(y, p, N, mode);
    Eigen::VectorXd dy;
    V.apply_left(y.data(), dy);
    return dy.lpNorm<Eigen::Infinity>();
}

Trajectory integrate(const MeanFieldVector& g, const ModelParams& p,
                     std::optional<std::int64_t> N, AssemblyMode mode, double t_end,
                     const StepControl& ctrl, int n_outputs) {
    p.validate();
    if (t_end <= 0.0) throw Error(ErrorCode::InvalidArgument, "t_end must be positive");
    if (n_outputs < 2) throw Error(ErrorCode::InvalidArgument, "need at least two output points");
    if (std::abs(g.sum() - 1.0) > 1e-9 || g.min() < 0.0)
        throw Error(ErrorCode::InvalidArgument, "initial state must be a probability vector");

    Trajectory traj;
    traj.mode = mode;
    traj.n = N;

    ClampStats stats;
    Integrator integ(Derivative(p, N, mode, &stats), ctrl, g.data());

    MeanFieldVector state = g;
    traj.times.push_back(0.0);
    traj.states.push_back(state);
    for (int i = 1; i < n_outputs; ++i) {
        double target = t_end * static_cast<double>(i) / (n_outputs - 1);
        integ.advance_to(target);
        state.data() = integ.y;
        traj.times.push_back(target);
        traj.states.push_back(state);
    }
    traj.clamp_events = stats.clamped;
    traj.max_mass_defect = integ.max_mass_defect;
    traj.steps_accepted = integ.accepted;
    traj.steps_rejected = integ.rejected;
    return traj;
}

MeanFieldVector steady_state_by_integration(const ModelParams& p,
                                            std::optional<std::int64_t> N, AssemblyMode mode,
                                            const MeanFieldVector& g,
                                            const SteadyStateOptions& opts) {
    p.validate();
    ClampStats stats;
    // The derivative norm bottoms out near the integrator's local error, so
    // the step tolerances must sit well below the requested stopping norm.
    StepControl ctrl = opts.ctrl;
    ctrl.rel_tol = std::min(ctrl.rel_tol, 0.02 * opts.tol);
    ctrl.abs_tol = std::min(ctrl.abs_tol, 1e-3 * opts.tol);
    Integrator integ(Derivative(p, N, mode, &stats), ctrl, g.data());

    MeanFieldVector state = g;
    double window = opts.check_dt;
    double dnorm = derivative_norm(state, p, N, mode);
    while (dnorm >= opts.tol) {
        if (integ.t >= opts.t_max)
            throw Error(ErrorCode::NoConvergence,
                        "steady state not reached by t_max; derivative norm " +
                            std::to_string(dnorm),
                        dnorm);
        double target = std::min(integ.t + window, opts.t_max);
        integ.advance_to(target);
        state.data() = integ.y;
        dnorm = derivative_norm(state, p, N, mode);
        window = std::min(window * 2.0, 500.0);
    }
    return state;
}

} // namespace bsmf
