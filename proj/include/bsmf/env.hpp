#pragma once

#include <Eigen/Dense>
#include <utility>
#include <vector>

#include "bsmf/errors.hpp"

namespace bsmf {

/// Daily rate profile on [0,24), piecewise over a breakpoint list so segment
/// integrals are exact. `Step` holds each value until the next breakpoint;
/// `Linear` interpolates between breakpoints (and wraps 24h -> first point).
struct RateProfile {
    enum class Kind { Step, Linear };

    Kind kind = Kind::Step;
    std::vector<std::pair<double, double>> points; // (hour, rate), sorted, hour in [0,24)

    static RateProfile constant(double rate);
    static RateProfile step(std::vector<std::pair<double, double>> pts);
    static RateProfile linear(std::vector<std::pair<double, double>> pts);

    void validate() const;

    /// Instantaneous rate at hour t (t taken mod 24).
    double eval(double t) const;

    /// Exact integral over [a,b] within one day, 0 <= a <= b <= 24.
    double integrate(double a, double b) const;
};

/// An interval within [0,24].
struct HourInterval {
    double begin = 0.0;
    double end = 0.0;
    double length() const { return end - begin; }
};

/// Ordered partition of the day into m segments; a segment may be a union of
/// intervals (e.g. an overnight segment [0,6.5) U [23.5,24)).
struct DaySegmentation {
    std::vector<std::vector<HourInterval>> segments;

    int size() const { return static_cast<int>(segments.size()); }
    double duration(int i) const;
    std::vector<double> durations() const;

    /// Checks segments are nonempty, intervals well-formed, and that the
    /// segments partition [0,24) up to a small tolerance.
    void validate() const;

    /// The bundled seven-segment day used by the example configurations:
    /// an overnight segment plus six daytime segments around three demand peaks
    /// (durations 7, 2, 3, 2.5, 3.5, 2, 4 hours).
    static DaySegmentation seven_part_day();
};

/// A finite-state Markovian environment: generator W with stationary vector
/// theta, plus the per-state customer arrival rate lambda and ride-completion
/// rate mu it selects.
struct EnvironmentSpec {
    int m = 0;
    Eigen::MatrixXd W;      // m x m, rows sum to 0
    Eigen::VectorXd theta;  // stationary probabilities
    Eigen::VectorXd lambda; // per-state arrival rate (per station)
    Eigen::VectorXd mu;     // per-state ride-completion rate

    static EnvironmentSpec two_state(double w12, double w21,
                                     double lambda1, double lambda2,
                                     double mu1, double mu2);
    /// Degenerate single-state environment (W = [0]).
    static EnvironmentSpec single_state(double lambda, double mu);

    void validate() const;
};

/// Stationary probability vector of an irreducible generator: theta W = 0,
/// theta e = 1, residual <= 1e-12. Throws NoUniqueStationaryVector when the
/// null space is not one-dimensional or the solution is not strictly positive.
Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& W);

/// Cyclic environment generator from a day segmentation: state i feeds state
/// i+1 (wrapping), theta_i proportional to segment duration, rate out of the
/// last state pinned to 1. `time_scale` multiplies W uniformly for callers
/// that want environment switching expressed in other units.
EnvironmentSpec build_cyclic_generator(const DaySegmentation& seg, double time_scale = 1.0);

/// Segment-averaged rates: lambda_i = (1/duration_i) * integral of `rent`
/// over segment i, and the same for `mu` with `ret`.
std::pair<Eigen::VectorXd, Eigen::VectorXd>
average_rates(const RateProfile& rent, const RateProfile& ret, const DaySegmentation& seg);

} // namespace bsmf
