#pragma once

// Differentiable versions of the belief calculus for the training tape.
// Mass matrices have one row per voxel and N+1 columns (composite last).

#include <cstdint>
#include <span>

#include "evfuse/autodiff.hpp"

namespace evfuse::autodiff {

/// Non-negative evidence (R x N) -> Dirichlet masses (R x N+1).
Var dirichlet_belief(Tape& t, Var evidence);

/// Raw two-source fusion of mass matrices, row by row.
Var ipaf_fuse(Tape& t, Var a, Var b);

/// Divides every row by its total. Throws TotalConflictError when a row
/// total is at most `conflict_epsilon`.
Var renormalize_rows(Tape& t, Var masses, double conflict_epsilon = 1e-12);

/// Pignistic probabilities (R x N) from masses (R x N+1).
Var pignistic(Tape& t, Var masses);

/// Row r taken from `first` where mask[r] != 0, else from `second`.
Var select_rows(Tape& t, Var first, Var second, std::span<const std::uint8_t> mask);

inline constexpr double kDiceSmoothing = 1e-5;
inline constexpr double kProbabilityFloor = 1e-7;

/// Soft Dice loss averaged over classes:
/// mean_k [1 - (2 sum p_k y_k + s) / (sum p_k + sum y_k + s)].
Var soft_dice(Tape& t, Var prob, std::span<const std::uint8_t> labels, double smoothing = kDiceSmoothing);

/// Per-voxel cross-entropy column (R x 1): -log(clamp(p_y, 1e-7, 1)).
Var cross_entropy_voxels(Tape& t, Var prob, std::span<const std::uint8_t> labels);

/// sum_r w_r x_r / R for a column `x`; the weights are constants.
Var weighted_mean(Tape& t, Var column, std::span<const double> weights);

}  // namespace evfuse::autodiff
