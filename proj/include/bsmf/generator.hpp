#pragma once

#include <optional>
#include <string>
#include <vector>

#include "bsmf/rates.hpp"

namespace bsmf {

/// Two conventions for turning the level rates into blocks.
///
/// `Standard` follows the per-station transition rates: a level move keeps
/// the environment state (up = diag(xi_k), down = diag(eta_k)) and an
/// environment move keeps the level (local = W - diag(xi_k + eta_k)). The
/// assembled matrix is a conservative generator and is the default
/// everywhere.
///
/// `PaperLiteral` is the coupled block convention: level moves occur jointly
/// with environment switches (up entry (i,j) = xi_{k,i} w_{i,j} off the
/// diagonal, down entry (i,j) = eta_{k,i} w_{i,j}), with the diagonal
/// companions on the local blocks. Rows still sum to zero but off-diagonal
/// signs and units differ; it is kept for side-by-side comparison.
enum class AssemblyMode { Standard, PaperLiteral };

std::string to_string(AssemblyMode mode);
AssemblyMode assembly_mode_from_string(const std::string& name);

/// Level-indexed blocks of the QBD generator V: down[k] maps level k to k-1,
/// local[k] stays at k, up[k] maps k to k+1. Blocks are stored densely for
/// every level; down at the floor and up at the ceiling stay zero.
struct BlockTridiagonalGenerator {
    int floor = 0;
    int ceiling = 0;
    int m = 0;
    std::vector<Eigen::MatrixXd> down;
    std::vector<Eigen::MatrixXd> local;
    std::vector<Eigen::MatrixXd> up;

    int num_levels() const { return ceiling - floor + 1; }
    int offset(int level) const { return level - floor; }
    Eigen::Index dim() const { return static_cast<Eigen::Index>(num_levels()) * m; }

    /// Assembled dense matrix (levels stacked level-major).
    Eigen::MatrixXd dense() const;

    /// out = y * V for a row vector y of length dim().
    void apply_left(const Eigen::VectorXd& y, Eigen::VectorXd& out) const;
};

/// Assembles V at the mean field y. `N` empty selects the limiting rates.
BlockTridiagonalGenerator assemble(const MeanFieldVector& y, const ModelParams& p,
                                   std::optional<std::int64_t> N, AssemblyMode mode,
                                   ClampStats* stats = nullptr);

/// Assembly from an explicit (frozen) rate table.
BlockTridiagonalGenerator assemble_from_rates(const RateTable& rates,
                                              const Eigen::MatrixXd& W, AssemblyMode mode);

/// In-place variants reusing the block storage of `out` when shapes match.
void assemble_into(BlockTridiagonalGenerator& out, const MeanFieldVector& y,
                   const ModelParams& p, std::optional<std::int64_t> N, AssemblyMode mode,
                   ClampStats* stats = nullptr);
void assemble_from_rates_into(BlockTridiagonalGenerator& out, const RateTable& rates,
                              const Eigen::MatrixXd& W, AssemblyMode mode);

/// max_i |sum_j V(i,j)| over the assembled matrix; structural check.
double row_sum_residual(const BlockTridiagonalGenerator& V);

/// Smallest off-diagonal entry of the assembled matrix (>= 0 for a
/// conservative generator).
double min_off_diagonal(const BlockTridiagonalGenerator& V);

} // namespace bsmf
