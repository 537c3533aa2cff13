#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "evfuse/tensor_io.hpp"

namespace evfuse {

/// Absolute tolerance on the total mass of a normalized assignment.
inline constexpr double kMassTolerance = 1e-5;

/// Basic probability assignment over N singleton classes plus the composite
/// set holding the uncertainty mass.
///
/// A `normalized` assignment carries total mass 1 (within kMassTolerance).
/// Fusion output before renormalization is `unnormalized` and may carry
/// total mass below 1.
class BeliefAssignment {
 public:
  static BeliefAssignment normalized(std::vector<double> singleton, double composite);
  static BeliefAssignment unnormalized(std::vector<double> singleton, double composite);

  static BeliefAssignment vacuous(std::size_t num_classes);
  static BeliefAssignment one_hot(std::size_t num_classes, std::size_t cls);

  std::size_t num_classes() const noexcept { return singleton_.size(); }
  std::span<const double> singleton() const noexcept { return singleton_; }
  double composite() const noexcept { return composite_; }
  bool is_normalized() const noexcept { return normalized_; }
  double total() const noexcept;

  /// Singletons followed by the composite mass.
  std::vector<double> masses() const;

  bool operator==(const BeliefAssignment&) const = default;

 private:
  BeliefAssignment(std::vector<double> singleton, double composite, bool normalized);

  std::vector<double> singleton_;
  double composite_;
  bool normalized_;
};

/// Per-voxel assignments stored as a (W, H, L, N+1) grid; the last channel
/// is the composite mass.
class BeliefVolume {
 public:
  /// Validates every voxel against the requested normalization state.
  BeliefVolume(VoxelGrid masses, bool normalized);

  /// Classifies the grid as normalized when every voxel sums to 1, and as
  /// unnormalized when every voxel sums to at most 1.
  static BeliefVolume from_grid(VoxelGrid masses);

  const VoxelGrid& grid() const noexcept { return masses_; }
  Extent3 extent() const noexcept { return masses_.extent(); }
  std::size_t num_classes() const noexcept { return masses_.channels() - 1; }
  std::size_t voxel_count() const noexcept { return masses_.voxel_count(); }
  bool is_normalized() const noexcept { return normalized_; }

  std::span<const float> voxel(std::size_t v) const { return masses_.voxel(v); }
  BeliefAssignment at(std::size_t v) const;

  bool operator==(const BeliefVolume&) const = default;

 private:
  VoxelGrid masses_;
  bool normalized_;
};

/// softplus evidence -> Dirichlet belief masses, per voxel of a (W,H,L,N)
/// logit grid. N must be at least 2.
BeliefVolume evidence_to_belief(const VoxelGrid& logits);

/// Pignistic probabilities of a normalized assignment.
std::vector<double> belief_to_probability(const BeliefAssignment& b);

/// (W,H,L,N) probability grid from a normalized volume.
VoxelGrid belief_to_probability(const BeliefVolume& v);

/// Divides every mass by the total. Throws TotalConflictError when the total
/// is at most 1e-12.
BeliefAssignment renormalize(const BeliefAssignment& b);
BeliefVolume renormalize(const BeliefVolume& v);

}  // namespace evfuse
