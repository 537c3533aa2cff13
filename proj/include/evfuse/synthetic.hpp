#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "evfuse/tensor_io.hpp"

namespace evfuse {

struct Sample {
  VoxelGrid volume;
  LabelGrid labels;
};

struct Ellipsoid {
  std::array<double, 3> center{};
  std::array<double, 3> radii{};
  double intensity = 1.0;
};

/// Labeled subset (A samples) and unlabeled subset (B samples).
struct SyntheticDataset {
  std::vector<Sample> labeled;
  std::vector<Sample> unlabeled;
};

inline constexpr Extent3 kSyntheticExtent{24, 24, 24};
inline constexpr double kBackgroundNoise = 0.1;

/// One volume: Gaussian background noise (sigma 0.1) plus a filled
/// ellipsoid. Voxel centres with sum(((p - c) / r)^2) <= 1 get label 1.
Sample render_ellipsoid(Extent3 extent, const Ellipsoid& shape, std::uint64_t noise_seed);

/// `count` volumes with random ellipsoids (radii in [3, 7], intensity
/// 1.0 +- 0.1, fully inside the volume), deterministic in `seed`.
std::vector<Sample> generate_samples(std::size_t count, std::uint64_t seed, Extent3 extent = kSyntheticExtent);

/// generate_samples split into the first `labeled_count` labeled samples and
/// the rest unlabeled. Throws ContractError when count < 2.
SyntheticDataset generate_synthetic(std::size_t count, std::uint64_t seed, std::size_t labeled_count,
                                    Extent3 extent = kSyntheticExtent);

}  // namespace evfuse
