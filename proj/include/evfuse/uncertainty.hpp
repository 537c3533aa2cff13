#pragma once

#include "evfuse/evidence.hpp"
#include "evfuse/tensor_io.hpp"

namespace evfuse {

/// Which distribution the entropy term is taken over.
enum class EntropyBasis {
  /// Singleton masses rescaled to sum to 1; keeps 0 <= U <= u log2 N.
  NormalizedSingletons,
  /// Raw singleton masses, as written in the uncertainty formula.
  RawSingletons,
};

/// Per-voxel uncertainty, shape (W, H, L), values finite and >= 0.
class UncertaintyVolume {
 public:
  explicit UncertaintyVolume(VoxelGrid values);

  const VoxelGrid& grid() const noexcept { return values_; }
  Extent3 extent() const noexcept { return values_.extent(); }
  std::size_t voxel_count() const noexcept { return values_.voxel_count(); }
  std::span<const float> data() const noexcept { return values_.data(); }

 private:
  VoxelGrid values_;
};

/// U = -u * sum_n d_n log2 d_n over a normalized (fused) assignment.
double fused_uncertainty(const BeliefAssignment& b,
                         EntropyBasis basis = EntropyBasis::NormalizedSingletons);

UncertaintyVolume uncertainty_volume(const BeliefVolume& v,
                                     EntropyBasis basis = EntropyBasis::NormalizedSingletons);

}  // namespace evfuse
