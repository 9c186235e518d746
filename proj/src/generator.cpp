#include "bsmf/generator.hpp"

#include <cmath>

namespace bsmf {

std::string to_string(AssemblyMode mode) {
    return mode == AssemblyMode::Standard ? "standard" : "paper-literal";
}

AssemblyMode assembly_mode_from_string(const std::string& name) {
    if (name == "standard") return AssemblyMode::Standard;
    if (name == "paper-literal") return AssemblyMode::PaperLiteral;
    throw Error(ErrorCode::InvalidArgument, "unknown assembly mode: " + name);
}

Eigen::MatrixXd BlockTridiagonalGenerator::dense() const {
    const Eigen::Index n = dim();
    Eigen::MatrixXd full = Eigen::MatrixXd::Zero(n, n);
    for (int k = 0; k < num_levels(); ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(k) * m;
        full.block(row, row, m, m) = local[k];
        if (k > 0) full.block(row, row - m, m, m) = down[k];
        if (k + 1 < num_levels()) full.block(row, row + m, m, m) = up[k];
    }
    return full;
}

void BlockTridiagonalGenerator::apply_left(const Eigen::VectorXd& y, Eigen::VectorXd& out) const {
    const Eigen::Index n = dim();
    if (y.size() != n)
        throw Error(ErrorCode::InvalidArgument, "vector length does not match generator");
    out.resize(n);
    out.setZero();
    for (int k = 0; k < num_levels(); ++k) {
        const Eigen::Index row = static_cast<Eigen::Index>(k) * m;
        auto yk = y.segment(row, m).transpose();
        out.segment(row, m).noalias() += (yk * local[k]).transpose();
        if (k > 0) out.segment(row - m, m).noalias() += (yk * down[k]).transpose();
        if (k + 1 < num_levels()) out.segment(row + m, m).noalias() += (yk * up[k]).transpose();
    }
}

namespace {

void resize_blocks(BlockTridiagonalGenerator& g, int floor, int ceiling, int m) {
    const int levels = ceiling - floor + 1;
    g.floor = floor;
    g.ceiling = ceiling;
    g.m = m;
    auto fit = [&](std::vector<Eigen::MatrixXd>& v) {
        v.resize(levels);
        for (auto& b : v) {
            if (b.rows() != m || b.cols() != m) b.resize(m, m);
            b.setZero();
        }
    };
    fit(g.down);
    fit(g.local);
    fit(g.up);
}

} // namespace

void assemble_from_rates_into(BlockTridiagonalGenerator& out, const RateTable& rates,
                              const Eigen::MatrixXd& W, AssemblyMode mode) {
    const int m = rates.m;
    if (W.rows() != m || W.cols() != m)
        throw Error(ErrorCode::InvalidArgument, "environment generator does not match rate table");
    resize_blocks(out, rates.floor, rates.ceiling, m);
    const int levels = out.num_levels();

    for (int o = 0; o < levels; ++o) {
        const bool has_up = o + 1 < levels;
        const bool has_down = o > 0;
        if (mode == AssemblyMode::Standard) {
            for (int i = 0; i < m; ++i) {
                double xi = has_up ? rates.xi(o, i) : 0.0;
                double eta = has_down ? rates.eta(o, i) : 0.0;
                if (has_up) out.up[o](i, i) = xi;
                if (has_down) out.down[o](i, i) = eta;
                for (int j = 0; j < m; ++j) out.local[o](i, j) = W(i, j);
                out.local[o](i, i) -= xi + eta;
            }
        } else {
            // Coupled block convention: queue rates multiply environment
            // switch rates, diagonal companions absorbed into the local block.
            for (int i = 0; i < m; ++i) {
                double xi = has_up ? rates.xi(o, i) : 0.0;
                double eta = has_down ? rates.eta(o, i) : 0.0;
                for (int j = 0; j < m; ++j) {
                    if (j == i) continue;
                    if (has_up) out.up[o](i, j) = xi * W(i, j);
                    if (has_down) out.down[o](i, j) = eta * W(i, j);
                }
                out.local[o](i, i) = (xi + eta) * W(i, i);
            }
        }
    }
}

BlockTridiagonalGenerator assemble_from_rates(const RateTable& rates,
                                              const Eigen::MatrixXd& W, AssemblyMode mode) {
    BlockTridiagonalGenerator g;
    assemble_from_rates_into(g, rates, W, mode);
    return g;
}

void assemble_into(BlockTridiagonalGenerator& out, const MeanFieldVector& y,
                   const ModelParams& p, std::optional<std::int64_t> N, AssemblyMode mode,
                   ClampStats* stats) {
    RateTable t = rate_table(y, p, N, stats);
    assemble_from_rates_into(out, t, p.env.W, mode);
}

BlockTridiagonalGenerator assemble(const MeanFieldVector& y, const ModelParams& p,
                                   std::optional<std::int64_t> N, AssemblyMode mode,
                                   ClampStats* stats) {
    BlockTridiagonalGenerator g;
    assemble_into(g, y, p, N, mode, stats);
    return g;
}

double row_sum_residual(const BlockTridiagonalGenerator& V) {
    double worst = 0.0;
    const int levels = V.num_levels();
    for (int o = 0; o < levels; ++o) {
        for (int i = 0; i < V.m; ++i) {
            double s = V.local[o].row(i).sum();
            if (o > 0) s += V.down[o].row(i).sum();
            if (o + 1 < levels) s += V.up[o].row(i).sum();
            worst = std::max(worst, std::abs(s));
        }
    }
    return worst;
}

double min_off_diagonal(const BlockTridiagonalGenerator& V) {
    double lo = 0.0;
    const int levels = V.num_levels();
    bool first = true;
    auto scan = [&](const Eigen::MatrixXd& block, bool skip_diag) {
        for (int i = 0; i < V.m; ++i)
            for (int j = 0; j < V.m; ++j) {
                if (skip_diag && i == j) continue;
                if (first || block(i, j) < lo) {
                    lo = block(i, j);
                    first = false;
                }
            }
    };
    for (int o = 0; o < levels; ++o) {
        scan(V.local[o], true);
        if (o > 0) scan(V.down[o], false);
        if (o + 1 < levels) scan(V.up[o], false);
    }
    return lo;
}

} // namespace bsmf
