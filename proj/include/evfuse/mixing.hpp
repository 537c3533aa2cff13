#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <utility>
#include <vector>

#include "evfuse/evidence.hpp"
#include "evfuse/tensor_io.hpp"

namespace evfuse {

struct Box3 {
  Extent3 origin{0, 0, 0};
  Extent3 size{0, 0, 0};

  bool operator==(const Box3&) const = default;
};

/// Binary mask that is 0 inside one axis-aligned box and 1 elsewhere.
class MixMask {
 public:
  MixMask(Extent3 extent, Box3 zero_region);

  /// Rebuilds a mask from stored 0/1 values. Throws ContractError unless the
  /// zeros form exactly one box.
  static MixMask from_values(Extent3 extent, std::span<const std::uint8_t> values);

  Extent3 extent() const noexcept { return extent_; }
  const Box3& zero_region() const noexcept { return zero_region_; }
  std::span<const std::uint8_t> values() const noexcept { return values_; }
  std::uint8_t operator[](std::size_t v) const { return values_[v]; }
  std::size_t voxel_count() const noexcept { return values_.size(); }
  std::size_t zero_count() const noexcept;

  bool operator==(const MixMask&) const = default;

 private:
  Extent3 extent_;
  Box3 zero_region_;
  std::vector<std::uint8_t> values_;
};

/// Box of `zero_size` placed uniformly at random among the valid origins,
/// driven by a 64-bit Mersenne Twister seeded with `seed`.
MixMask generate_mask(Extent3 extent, Extent3 zero_size, std::uint64_t seed);

struct MixedPair {
  VoxelGrid mixed_a;
  VoxelGrid mixed_b;
  MixMask mask;
  std::size_t source_a = 0;
  std::size_t source_b = 1;
};

/// mixed_a = a*m + b*(1-m), mixed_b = b*m + a*(1-m); the mask broadcasts over
/// channels of rank-4 grids.
MixedPair mix_pair(const VoxelGrid& a, const VoxelGrid& b, const MixMask& m, std::size_t source_a = 0,
                   std::size_t source_b = 1);

std::pair<LabelGrid, LabelGrid> mix_labels(const LabelGrid& a, const LabelGrid& b, const MixMask& m);

/// Sends every voxel of the two mixed-sample predictions back to the original
/// sample that contributed it.
std::pair<BeliefVolume, BeliefVolume> restore_predictions(const BeliefVolume& pred_mixed_a,
                                                          const BeliefVolume& pred_mixed_b, const MixMask& m);

MixMask load_mask(const std::filesystem::path& path);
void save_mask(const MixMask& m, const std::filesystem::path& path);

}  // namespace evfuse
