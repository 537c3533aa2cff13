#pragma once

#include "evfuse/evidence.hpp"

namespace evfuse {

struct FusionConfig {
  /// Rescale fused masses to total 1. When false the raw, possibly
  /// sub-unit masses are returned flagged unnormalized.
  bool renormalize_output = true;
  /// Raw totals at or below this are treated as total conflict.
  double conflict_epsilon = 1e-12;
};

/// Fuses two normalized assignments of the same voxel:
///   fused_n = a_n b_n + (a_n b_u + b_n a_u) / N,   fused_u = a_u b_u.
/// Conflicting singleton products are discarded, not redistributed.
///
/// Throws ShapeError on mismatched class counts and TotalConflictError when
/// renormalization is requested but the raw total is at most
/// `cfg.conflict_epsilon`.
BeliefAssignment ipaf_fuse(const BeliefAssignment& a, const BeliefAssignment& b,
                           const FusionConfig& cfg = {});

/// Voxel-wise ipaf_fuse of two volumes of identical shape.
BeliefVolume fuse_volumes(const BeliefVolume& original, const BeliefVolume& restored,
                          const FusionConfig& cfg = {});

}  // namespace evfuse
