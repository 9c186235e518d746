#include "bsmf/env.hpp"

#include <algorithm>
#include <cmath>

namespace bsmf {

namespace {

constexpr double kDayHours = 24.0;
constexpr double kPartitionTol = 1e-9;

} // namespace

RateProfile RateProfile::constant(double rate) {
    RateProfile p;
    p.kind = Kind::Step;
    p.points = {{0.0, rate}};
    p.validate();
    return p;
}

RateProfile RateProfile::step(std::vector<std::pair<double, double>> pts) {
    RateProfile p;
    p.kind = Kind::Step;
    p.points = std::move(pts);
    p.validate();
    return p;
}

RateProfile RateProfile::linear(std::vector<std::pair<double, double>> pts) {
    RateProfile p;
    p.kind = Kind::Linear;
    p.points = std::move(pts);
    p.validate();
    return p;
}

void RateProfile::validate() const {
    if (points.empty())
        throw Error(ErrorCode::InvalidArgument, "rate profile needs at least one breakpoint");
    double prev = -1.0;
    for (const auto& [t, r] : points) {
        if (t < 0.0 || t >= kDayHours)
            throw Error(ErrorCode::InvalidArgument, "profile breakpoint outside [0,24)");
        if (t <= prev)
            throw Error(ErrorCode::InvalidArgument, "profile breakpoints must be strictly increasing");
        if (r < 0.0)
            throw Error(ErrorCode::InvalidArgument, "profile rates must be nonnegative");
        prev = t;
    }
}

double RateProfile::eval(double t) const {
    t = std::fmod(t, kDayHours);
    if (t < 0.0) t += kDayHours;
    // Last breakpoint at or before t; before the first breakpoint the profile
    // wraps around from the end of the day.
    auto it = std::upper_bound(points.begin(), points.end(), t,
                               [](double v, const auto& pt) { return v < pt.first; });
    if (kind == Kind::Step) {
        if (it == points.begin()) return points.back().second;
        return std::prev(it)->second;
    }
    // Linear: interpolate between enclosing breakpoints, wrapping across 24h.
    double t0, r0, t1, r1;
    if (it == points.begin()) {
        t0 = points.back().first - kDayHours;
        r0 = points.back().second;
        t1 = points.front().first;
        r1 = points.front().second;
    } else if (it == points.end()) {
        t0 = points.back().first;
        r0 = points.back().second;
        t1 = points.front().first + kDayHours;
        r1 = points.front().second;
    } else {
        t0 = std::prev(it)->first;
        r0 = std::prev(it)->second;
        t1 = it->first;
        r1 = it->second;
    }
    if (t1 == t0) return r0;
    double w = (t - t0) / (t1 - t0);
    return r0 + w * (r1 - r0);
}

double RateProfile::integrate(double a, double b) const {
    if (a > b || a < 0.0 || b > kDayHours)
        throw Error(ErrorCode::InvalidArgument, "integration bounds must satisfy 0 <= a <= b <= 24");
    if (a == b) return 0.0;
    // Split [a,b] at every breakpoint; each piece is constant or linear, so
    // the midpoint rule is exact on it.
    std::vector<double> cuts{a};
    for (const auto& [t, r] : points) {
        (void)r;
        if (t > a && t < b) cuts.push_back(t);
    }
    cuts.push_back(b);
    std::sort(cuts.begin(), cuts.end());
    double total = 0.0;
    for (std::size_t i = 0; i + 1 < cuts.size(); ++i) {
        double lo = cuts[i], hi = cuts[i + 1];
        total += eval(0.5 * (lo + hi)) * (hi - lo);
    }
    return total;
}

double DaySegmentation::duration(int i) const {
    double d = 0.0;
    for (const auto& iv : segments.at(i)) d += iv.length();
    return d;
}

std::vector<double> DaySegmentation::durations() const {
    std::vector<double> out(segments.size());
    for (int i = 0; i < size(); ++i) out[i] = duration(i);
    return out;
}

void DaySegmentation::validate() const {
    if (segments.empty())
        throw Error(ErrorCode::InvalidSegmentation, "segmentation has no segments");
    std::vector<HourInterval> all;
    for (const auto& seg : segments) {
        if (seg.empty())
            throw Error(ErrorCode::InvalidSegmentation, "segment with no intervals");
        double d = 0.0;
        for (const auto& iv : seg) {
            if (!(iv.begin >= 0.0 && iv.end <= kDayHours && iv.begin < iv.end))
                throw Error(ErrorCode::InvalidSegmentation, "malformed interval in segmentation");
            d += iv.length();
            all.push_back(iv);
        }
        if (d <= 0.0)
            throw Error(ErrorCode::InvalidSegmentation, "zero-duration segment");
    }
    std::sort(all.begin(), all.end(),
              [](const HourInterval& x, const HourInterval& y) { return x.begin < y.begin; });
    double cursor = 0.0;
    for (const auto& iv : all) {
        if (iv.begin > cursor + kPartitionTol)
            throw Error(ErrorCode::InvalidSegmentation, "segmentation leaves a gap in [0,24)");
        if (iv.begin < cursor - kPartitionTol)
            throw Error(ErrorCode::InvalidSegmentation, "segmentation intervals overlap");
        cursor = iv.end;
    }
    if (std::abs(cursor - kDayHours) > kPartitionTol)
        throw Error(ErrorCode::InvalidSegmentation, "segmentation does not cover [0,24)");
}

DaySegmentation DaySegmentation::seven_part_day() {
    DaySegmentation s;
    s.segments = {
        {{0.0, 6.5}, {23.5, 24.0}}, // overnight
        {{6.5, 8.5}},               // morning peak
        {{8.5, 11.5}},
        {{11.5, 14.0}},             // midday peak
        {{14.0, 17.5}},
        {{17.5, 19.5}},             // evening peak
        {{19.5, 23.5}},
    };
    s.validate();
    return s;
}

EnvironmentSpec EnvironmentSpec::two_state(double w12, double w21,
                                           double lambda1, double lambda2,
                                           double mu1, double mu2) {
    EnvironmentSpec e;
    e.m = 2;
    e.W.resize(2, 2);
    e.W << -w12, w12, w21, -w21;
    e.theta = stationary_vector(e.W);
    e.lambda.resize(2);
    e.lambda << lambda1, lambda2;
    e.mu.resize(2);
    e.mu << mu1, mu2;
    e.validate();
    return e;
}

EnvironmentSpec EnvironmentSpec::single_state(double lambda, double mu) {
    EnvironmentSpec e;
    e.m = 1;
    e.W = Eigen::MatrixXd::Zero(1, 1);
    e.theta = Eigen::VectorXd::Ones(1);
    e.lambda = Eigen::VectorXd::Constant(1, lambda);
    e.mu = Eigen::VectorXd::Constant(1, mu);
    e.validate();
    return e;
}

void EnvironmentSpec::validate() const {
    if (m < 1) throw Error(ErrorCode::InvalidArgument, "environment needs m >= 1 states");
    if (W.rows() != m || W.cols() != m)
        throw Error(ErrorCode::InvalidArgument, "environment generator must be m x m");
    if (theta.size() != m || lambda.size() != m || mu.size() != m)
        throw Error(ErrorCode::InvalidArgument, "environment vectors must have length m");
    for (int i = 0; i < m; ++i) {
        double row = 0.0;
        for (int j = 0; j < m; ++j) {
            if (i != j && W(i, j) < 0.0)
                throw Error(ErrorCode::InvalidArgument, "negative off-diagonal in environment generator");
            row += W(i, j);
        }
        if (std::abs(row) > 1e-9)
            throw Error(ErrorCode::InvalidArgument, "environment generator row does not sum to zero");
        if (lambda[i] < 0.0 || mu[i] < 0.0)
            throw Error(ErrorCode::InvalidArgument, "negative environment rate");
    }
}

Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& W) {
    const int m = static_cast<int>(W.rows());
    if (W.cols() != m || m < 1)
        throw Error(ErrorCode::InvalidArgument, "generator must be square");
    if (m == 1) return Eigen::VectorXd::Ones(1);

    Eigen::FullPivLU<Eigen::MatrixXd> rank_check(W);
    rank_check.setThreshold(1e-10);
    if (rank_check.rank() != m - 1)
        throw Error(ErrorCode::NoUniqueStationaryVector,
                    "generator null space is not one-dimensional");

    // theta W = 0, theta e = 1: replace the last column of W with ones and
    // solve the transposed square system.
    Eigen::MatrixXd A = W;
    A.col(m - 1).setOnes();
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    rhs[m - 1] = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A.transpose());
    Eigen::VectorXd theta = lu.solve(rhs);
    // One step of iterative refinement keeps the residual at rounding level.
    Eigen::VectorXd resid = rhs - A.transpose() * theta;
    theta += lu.solve(resid);

    double scale = W.cwiseAbs().maxCoeff();
    if ((theta.transpose() * W).lpNorm<Eigen::Infinity>() > 1e-12 * std::max(1.0, scale))
        throw Error(ErrorCode::NoUniqueStationaryVector, "stationary residual too large");
    if (theta.minCoeff() <= 0.0)
        throw Error(ErrorCode::NoUniqueStationaryVector,
                    "stationary vector not strictly positive (reducible generator?)");
    theta /= theta.sum();
    return theta;
}

EnvironmentSpec build_cyclic_generator(const DaySegmentation& seg, double time_scale) {
    seg.validate();
    const int m = seg.size();
    if (m < 2)
        throw Error(ErrorCode::InvalidSegmentation, "cyclic construction needs m >= 2 segments");
    if (time_scale <= 0.0)
        throw Error(ErrorCode::InvalidArgument, "time scale must be positive");

    std::vector<double> dur = seg.durations();
    Eigen::VectorXd theta(m);
    for (int i = 0; i < m; ++i) theta[i] = dur[i] / kDayHours;

    // Sojourn rates from the duration ratios, with the last state's rate
    // pinned to 1: x_i = theta_m / theta_i.
    Eigen::MatrixXd W = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        double x = (theta[m - 1] / theta[i]) * time_scale;
        W(i, i) = -x;
        W(i, (i + 1) % m) = x;
    }

    EnvironmentSpec e;
    e.m = m;
    e.W = W;
    e.theta = stationary_vector(W);
    e.lambda = Eigen::VectorXd::Zero(m);
    e.mu = Eigen::VectorXd::Zero(m);
    e.validate();
    return e;
}

std::pair<Eigen::VectorXd, Eigen::VectorXd>
average_rates(const RateProfile& rent, const RateProfile& ret, const DaySegmentation& seg) {
    seg.validate();
    rent.validate();
    ret.validate();
    const int m = seg.size();
    Eigen::VectorXd lambda(m), mu(m);
    for (int i = 0; i < m; ++i) {
        double dur = seg.duration(i);
        double lam = 0.0, mur = 0.0;
        for (const auto& iv : seg.segments[i]) {
            lam += rent.integrate(iv.begin, iv.end);
            mur += ret.integrate(iv.begin, iv.end);
        }
        lambda[i] = lam / dur;
        mu[i] = mur / dur;
    }
    return {lambda, mu};
}

} // namespace bsmf
