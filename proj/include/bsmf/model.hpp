#pragma once

#include <Eigen/Dense>

#include "bsmf/env.hpp"
#include "bsmf/errors.hpp"

namespace bsmf {

/// Complete model instance: a station with K parking places holding C bikes
/// initially, a waiting room of L places, waiting probabilities alpha
/// (renters) and beta (returners), under a Markovian environment.
///
/// Station levels k run over [-L, K+L]: negative levels count waiting
/// renters, [0,K] counts parked bikes, (K, K+L] counts K parked bikes plus
/// k-K returners waiting with their bikes.
struct ModelParams {
    int K = 0;
    int C = 0;
    int L = 0;
    double alpha = 0.0;
    double beta = 0.0;
    EnvironmentSpec env;

    int floor_level() const { return -L; }
    int ceiling_level() const { return K + L; }
    int num_levels() const { return K + 2 * L + 1; }
    int dim() const { return num_levels() * env.m; }
    int offset(int level) const { return level + L; }

    void validate() const;
};

/// Probability vector over (level, environment-state) pairs, stored level-major.
class MeanFieldVector {
  public:
    MeanFieldVector() = default;
    MeanFieldVector(int num_levels, int m, int floor_level)
        : m_(m), floor_(floor_level), data_(Eigen::VectorXd::Zero(
              static_cast<Eigen::Index>(num_levels) * m)) {}

    static MeanFieldVector zero(const ModelParams& p) {
        return MeanFieldVector(p.num_levels(), p.env.m, p.floor_level());
    }
    /// All mass at one level, split across environment states by `weights`
    /// (defaults to the environment's stationary vector).
    static MeanFieldVector point_mass(const ModelParams& p, int level);
    static MeanFieldVector point_mass(const ModelParams& p, int level,
                                      const Eigen::VectorXd& weights);
    static MeanFieldVector uniform(const ModelParams& p);

    int num_levels() const { return static_cast<int>(data_.size()) / m_; }
    int m() const { return m_; }
    int floor_level() const { return floor_; }
    int ceiling_level() const { return floor_ + num_levels() - 1; }

    double& operator()(int level, int j) { return data_[idx(level, j)]; }
    double operator()(int level, int j) const { return data_[idx(level, j)]; }

    Eigen::VectorXd& data() { return data_; }
    const Eigen::VectorXd& data() const { return data_; }

    double sum() const { return data_.sum(); }
    double min() const { return data_.minCoeff(); }

    /// sum_j y(k,j) for each level, ordered from the floor level up.
    Eigen::VectorXd level_marginal() const;
    /// sum_k y(k,j) for each environment state.
    Eigen::VectorXd env_marginal() const;

    double linf_distance(const MeanFieldVector& other) const {
        return (data_ - other.data_).lpNorm<Eigen::Infinity>();
    }

  private:
    Eigen::Index idx(int level, int j) const {
        return static_cast<Eigen::Index>(level - floor_) * m_ + j;
    }

    int m_ = 1;
    int floor_ = 0;
    Eigen::VectorXd data_;
};

/// Total-variation distance between two probability vectors of equal size.
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

} // namespace bsmf
