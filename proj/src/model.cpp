#include "bsmf/model.hpp"

#include <cmath>

namespace bsmf {

void ModelParams::validate() const {
    env.validate();
    if (!(1 <= C && C <= K))
        throw Error(ErrorCode::InvalidArgument, "need 1 <= C <= K");
    if (L < 0) throw Error(ErrorCode::InvalidArgument, "need L >= 0");
    if (!(0.0 <= alpha && alpha <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "alpha must lie in [0,1]");
    if (!(0.0 <= beta && beta <= 1.0))
        throw Error(ErrorCode::InvalidArgument, "beta must lie in [0,1]");
}

MeanFieldVector MeanFieldVector::point_mass(const ModelParams& p, int level) {
    return point_mass(p, level, p.env.theta);
}

MeanFieldVector MeanFieldVector::point_mass(const ModelParams& p, int level,
                                            const Eigen::VectorXd& weights) {
    if (level < p.floor_level() || level > p.ceiling_level())
        throw Error(ErrorCode::InvalidArgument, "point mass level out of range");
    if (weights.size() != p.env.m || weights.minCoeff() < 0.0)
        throw Error(ErrorCode::InvalidArgument, "invalid environment weights");
    MeanFieldVector y = zero(p);
    double total = weights.sum();
    for (int j = 0; j < p.env.m; ++j) y(level, j) = weights[j] / total;
    return y;
}

MeanFieldVector MeanFieldVector::uniform(const ModelParams& p) {
    MeanFieldVector y = zero(p);
    y.data().setConstant(1.0 / static_cast<double>(p.dim()));
    return y;
}

Eigen::VectorXd MeanFieldVector::level_marginal() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(num_levels());
    for (int k = 0; k < num_levels(); ++k)
        for (int j = 0; j < m_; ++j) out[k] += data_[static_cast<Eigen::Index>(k) * m_ + j];
    return out;
}

Eigen::VectorXd MeanFieldVector::env_marginal() const {
    Eigen::VectorXd out = Eigen::VectorXd::Zero(m_);
    for (int k = 0; k < num_levels(); ++k)
        for (int j = 0; j < m_; ++j) out[j] += data_[static_cast<Eigen::Index>(k) * m_ + j];
    return out;
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    if (a.size() != b.size())
        throw Error(ErrorCode::InvalidArgument, "total variation needs equal-length vectors");
    return 0.5 * (a - b).lpNorm<1>();
}

} // namespace bsmf
