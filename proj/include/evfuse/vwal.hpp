#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "evfuse/tensor_io.hpp"
#include "evfuse/uncertainty.hpp"

namespace evfuse {

/// How voxels are ordered before ordinals are assigned.
///
/// AscendingUncertainty places the most uncertain voxel last (ordinal Z), so
/// its weight grows as training advances. DescendingUncertainty is the
/// literal sort direction of the weighting formula and reverses the
/// curriculum.
enum class RankOrder { AscendingUncertainty, DescendingUncertainty };

/// Voxel-wise asymptotic weighting schedule. `epoch` is 1-based.
struct WeightSchedule {
  double epsilon = 1.0;
  std::size_t epoch = 1;
  std::size_t total_epochs = 1;
  RankOrder order = RankOrder::AscendingUncertainty;

  /// Throws ContractError unless epsilon > 0 and 1 <= epoch <= total_epochs.
  void validate() const;

  /// zeta(h) = 2h/H - 1.
  double progress() const { return 2.0 * static_cast<double>(epoch) / static_cast<double>(total_epochs) - 1.0; }
};

/// Per-voxel 1-based ordinals; a permutation of 1..Z.
class RankMap {
 public:
  RankMap(Extent3 extent, std::vector<std::uint32_t> ranks);

  Extent3 extent() const noexcept { return extent_; }
  std::size_t voxel_count() const noexcept { return ranks_.size(); }
  std::span<const std::uint32_t> ranks() const noexcept { return ranks_; }
  std::uint32_t operator[](std::size_t v) const { return ranks_[v]; }

 private:
  Extent3 extent_;
  std::vector<std::uint32_t> ranks_;
};

/// Stable sort by uncertainty in the given order; ties keep linear index order.
RankMap rank_voxels(const UncertaintyVolume& u, RankOrder order);

/// phi = epsilon * sigmoid(zeta(h) * (2s/Z - 1)), for 1 <= s <= Z.
double dynamic_weight(const WeightSchedule& sched, std::size_t ordinal, std::size_t count);

/// phi for every voxel of `u`, using its ranks under `sched.order`.
VoxelGrid weight_volume(const UncertaintyVolume& u, const WeightSchedule& sched);

/// sum_z phi(h, s(z)) * loss_z / Z for one sample.
double weighted_loss(const VoxelGrid& per_voxel_loss, const UncertaintyVolume& u,
                     const WeightSchedule& sched);

/// Sum of the per-sample weighted losses of a group; ranks are per sample.
double weighted_loss(std::span<const VoxelGrid> per_voxel_losses,
                     std::span<const UncertaintyVolume> uncertainties, const WeightSchedule& sched);

}  // namespace evfuse
