#include "bsmf/qbd.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace bsmf {

namespace {

Eigen::MatrixXd invert_or_throw(const Eigen::MatrixXd& A, int level) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A);
    if (!lu.isInvertible())
        throw Error(ErrorCode::FactorizationFailure,
                    "singular inner matrix at level " + std::to_string(level),
                    static_cast<double>(level));
    return lu.inverse();
}

} // namespace

RMeasure rg_factorize(const BlockTridiagonalGenerator& V) {
    RMeasure r;
    r.floor = V.floor;
    r.ceiling = V.ceiling;
    r.m = V.m;
    r.R.assign(V.num_levels(), Eigen::MatrixXd());

    // S_k is the local generator of the chain censored to levels >= k,
    // accumulated as R_k up_{k-1} + local_k.
    Eigen::MatrixXd S = V.local[0];
    for (int k = V.floor + 1; k <= V.ceiling; ++k) {
        const int o = V.offset(k);
        r.R[o] = -V.down[o] * invert_or_throw(S, k - 1);
        S = r.R[o] * V.up[o - 1] + V.local[o];
    }
    r.xi_censored = S;
    return r;
}

namespace {

double generator_scale(const BlockTridiagonalGenerator& V) {
    double scale = 0.0;
    for (const auto& b : V.local) scale = std::max(scale, b.cwiseAbs().maxCoeff());
    return scale;
}

double residual_of(const BlockTridiagonalGenerator& V, const Eigen::VectorXd& pi) {
    Eigen::VectorXd out;
    V.apply_left(pi, out);
    return out.lpNorm<Eigen::Infinity>();
}

/// Uniformized power iteration from the uniform vector. Slower than the
/// block elimination but defined for reducible frozen chains (clamped zero
/// rates, unreachable boundary levels), where the elimination path breaks.
MeanFieldVector stationary_by_uniformization(const BlockTridiagonalGenerator& V) {
    const Eigen::Index n = V.dim();
    const double scale = generator_scale(V);
    if (scale <= 0.0) {
        // V = 0: every vector is stationary; return the uniform one
        MeanFieldVector pi(V.num_levels(), V.m, V.floor);
        pi.data().setConstant(1.0 / static_cast<double>(n));
        return pi;
    }
    const double uni_rate = 1.05 * scale;
    // absolute target an order below the solver tolerances, floored at what
    // double precision supports for this rate scale
    const double tol = std::max(1e-11, 1e3 * std::numeric_limits<double>::epsilon() * scale);

    Eigen::VectorXd pi = Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n));
    Eigen::VectorXd flow;
    for (long iter = 0; iter < 4000000; ++iter) {
        V.apply_left(pi, flow);
        if ((iter & 63) == 0 && flow.lpNorm<Eigen::Infinity>() <= tol) break;
        pi += flow / uni_rate;
        for (Eigen::Index i = 0; i < n; ++i)
            if (pi[i] < 0.0) pi[i] = 0.0; // roundoff shaving at absorbing corners
        pi /= pi.sum();
    }
    if (residual_of(V, pi) > 10.0 * tol)
        throw Error(ErrorCode::DegenerateBoundary,
                    "power-iteration fallback did not reach a stationary vector");
    MeanFieldVector out(V.num_levels(), V.m, V.floor);
    out.data() = pi;
    return out;
}

MeanFieldVector solve_by_elimination(const BlockTridiagonalGenerator& V) {
    const int m = V.m;
    RMeasure r = rg_factorize(V);

    if (m > 1) {
        Eigen::FullPivLU<Eigen::MatrixXd> rank_lu(r.xi_censored);
        rank_lu.setThreshold(1e-9);
        if (rank_lu.rank() != m - 1)
            throw Error(ErrorCode::DegenerateBoundary,
                        "censored generator null space is not one-dimensional");
    }

    // pi_top Xi = 0 with the usual normalization trick: overwrite the last
    // column with ones and solve for the unit right-hand side.
    Eigen::MatrixXd A = r.xi_censored;
    A.col(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs[m - 1] = 1.0;
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A.transpose());
    if (!lu.isInvertible())
        throw Error(ErrorCode::DegenerateBoundary, "censored boundary system is singular");
    Eigen::VectorXd top = lu.solve(rhs);

    MeanFieldVector pi(V.num_levels(), m, V.floor);
    Eigen::RowVectorXd block = top.transpose();
    for (int j = 0; j < m; ++j) pi(V.ceiling, j) = block[j];
    for (int k = V.ceiling - 1; k >= V.floor; --k) {
        block = block * r.R[V.offset(k + 1)];
        for (int j = 0; j < m; ++j) pi(k, j) = block[j];
    }

    double total = pi.sum();
    if (!(total > 0.0) || !std::isfinite(total))
        throw Error(ErrorCode::DegenerateBoundary, "back-substituted vector is not normalizable");
    pi.data() /= total;

    // Rounding can leave harmless negative dust; anything larger means the
    // input was not a conservative generator.
    double floor_allowed = -1e-12;
    for (Eigen::Index i = 0; i < pi.data().size(); ++i) {
        if (pi.data()[i] < 0.0) {
            if (pi.data()[i] < floor_allowed)
                throw Error(ErrorCode::DegenerateBoundary,
                            "stationary vector has a negative component");
            pi.data()[i] = 0.0;
        }
    }
    pi.data() /= pi.sum();
    return pi;
}

} // namespace

MeanFieldVector linear_qbd_solve(const BlockTridiagonalGenerator& V) {
    const double scale = generator_scale(V);
    try {
        MeanFieldVector pi = solve_by_elimination(V);
        // Elimination through a numerically singular interior block can pass
        // silently; a residual gate reroutes such cases to the fallback.
        if (residual_of(V, pi.data()) <= 1e-9 * std::max(1.0, scale)) return pi;
    } catch (const Error& e) {
        if (e.code() != ErrorCode::FactorizationFailure &&
            e.code() != ErrorCode::DegenerateBoundary)
            throw;
    }
    return stationary_by_uniformization(V);
}

double fixed_point_residual(const MeanFieldVector& pi, const ModelParams& p, AssemblyMode mode) {
    BlockTridiagonalGenerator V = assemble(pi, p, std::nullopt, mode);
    Eigen::VectorXd out;
    V.apply_left(pi.data(), out);
    return out.lpNorm<Eigen::Infinity>();
}

FixedPoint solve_fixed_point(const ModelParams& p, AssemblyMode mode,
                             const FixedPointOptions& opts) {
    MeanFieldVector init = (opts.init == FixedPointOptions::Init::Uniform)
                               ? MeanFieldVector::uniform(p)
                               : MeanFieldVector::point_mass(p, p.C);
    return solve_fixed_point(p, mode, init, opts);
}

namespace {

// Rate table induced by an interaction-vector guess z: the generator depends
// on pi only through zeta, so the fixed-point search runs in R^m.
RateTable table_from_interaction(const Eigen::VectorXd& z, const ModelParams& p,
                                 ClampStats* stats) {
    RateTable t;
    t.floor = p.floor_level();
    t.ceiling = p.ceiling_level();
    t.m = p.env.m;
    t.xi = Eigen::MatrixXd::Zero(p.num_levels(), p.env.m);
    t.eta = Eigen::MatrixXd::Zero(p.num_levels(), p.env.m);
    for (int j = 0; j < p.env.m; ++j) {
        double zeta = z[j];
        if (zeta < 0.0) {
            if (stats && p.env.mu[j] > 0.0) ++stats->clamped;
            zeta = 0.0;
        }
        for (int k = t.floor; k <= t.ceiling - 1; ++k) {
            double rate = p.env.mu[j] * zeta;
            if (k >= p.K) rate *= p.beta;
            t.xi(p.offset(k), j) = rate;
        }
        for (int k = t.floor + 1; k <= t.ceiling; ++k)
            t.eta(p.offset(k), j) = (k >= 1) ? p.env.lambda[j] : p.env.lambda[j] * p.alpha;
    }
    return t;
}

} // namespace

FixedPoint solve_fixed_point(const ModelParams& p, AssemblyMode mode,
                             const MeanFieldVector& init, const FixedPointOptions& opts) {
    p.validate();
    if (!(opts.damping > 0.0 && opts.damping <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "damping must lie in (0,1]");
    if (mode == AssemblyMode::PaperLiteral && p.env.m == 1)
        throw Error(ErrorCode::FactorizationFailure,
                    "paper-literal blocks vanish identically for a single-state environment");

    const int m = p.env.m;
    ClampStats stats;

    // Solve the frozen chain at interaction vector z and report the induced
    // interaction vector zeta(pi(z)). Roots of g(z) - z are fixed points.
    auto eval = [&](const Eigen::VectorXd& z, MeanFieldVector* pi_out) {
        RateTable t = table_from_interaction(z, p, &stats);
        BlockTridiagonalGenerator V = assemble_from_rates(t, p.env.W, mode);
        MeanFieldVector pi = linear_qbd_solve(V);
        Eigen::VectorXd g(m);
        for (int j = 0; j < m; ++j) g[j] = interaction_scalar(pi, j, p);
        if (pi_out) *pi_out = std::move(pi);
        return g;
    };

    FixedPoint fp;
    fp.mode = mode;
    fp.pi = init;

    Eigen::VectorXd z(m);
    for (int j = 0; j < m; ++j) z[j] = interaction_scalar(init, j, p);

    MeanFieldVector pi_cur = init;
    Eigen::VectorXd g = eval(z, &pi_cur);
    Eigen::VectorXd F = g - z;
    double fnorm = F.lpNorm<Eigen::Infinity>();

    MeanFieldVector best = pi_cur;
    double best_residual = fixed_point_residual(pi_cur, p, mode);

    // Safeguarded Newton on the reduced map: finite-difference Jacobian,
    // backtracking on ||g(z) - z||, damped substitution step when the Newton
    // direction is unusable. Plain damped substitution on the full vector
    // limit-cycles near critical load, which is why the search runs in the
    // reduced variable.
    for (int iter = 1; iter <= opts.max_iter && !fp.converged; ++iter) {
        fp.iterations = iter;

        Eigen::VectorXd dz;
        bool newton_ok = false;
        {
            Eigen::MatrixXd J(m, m);
            for (int j = 0; j < m; ++j) {
                double h = 1e-6 * std::max(1.0, std::abs(z[j]));
                Eigen::VectorXd zp = z;
                zp[j] += h;
                Eigen::VectorXd gp = eval(zp, nullptr);
                J.col(j) = ((gp - zp) - F) / h;
            }
            Eigen::FullPivLU<Eigen::MatrixXd> lu(J);
            if (lu.isInvertible()) {
                dz = lu.solve(-F);
                newton_ok = dz.allFinite();
            }
        }
        if (!newton_ok) dz = opts.damping * F; // substitution direction

        double scale = 1.0;
        MeanFieldVector pi_try = pi_cur;
        for (int back = 0; back < 40; ++back) {
            Eigen::VectorXd z_try = z + scale * dz;
            Eigen::VectorXd g_try = eval(z_try, &pi_try);
            Eigen::VectorXd F_try = g_try - z_try;
            double fnorm_try = F_try.lpNorm<Eigen::Infinity>();
            if (fnorm_try <= fnorm * (1.0 - 0.1 * scale) || fnorm_try <= 1e-14 ||
                scale <= 1e-6) {
                z = z_try;
                g = g_try;
                F = F_try;
                fnorm = fnorm_try;
                break;
            }
            scale *= 0.5;
        }

        fp.last_step = pi_try.linf_distance(pi_cur);
        pi_cur = pi_try;
        fp.pi = pi_cur;

        double resid = fixed_point_residual(pi_cur, p, mode);
        if (resid < best_residual) {
            best_residual = resid;
            best = pi_cur;
        }
        if (resid <= opts.tol && fp.last_step < std::max(opts.tol, 1e-12)) {
            fp.converged = true;
        }
    }

    if (!fp.converged) {
        fp.pi = best; // best iterate by residual, flagged non-converged
    }
    fp.residual = fixed_point_residual(fp.pi, p, mode);
    fp.clamp_events = stats.clamped;
    return fp;
}

} // namespace bsmf
