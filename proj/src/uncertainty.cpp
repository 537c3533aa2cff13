#include "evfuse/uncertainty.hpp"

#include <algorithm>
#include <cstdint>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse {

UncertaintyVolume::UncertaintyVolume(VoxelGrid values) : values_(std::move(values)) {
  if (values_.rank() != 3) throw ShapeError("uncertainty volume must have shape (W, H, L)");
  const auto d = values_.data();
  if (std::any_of(d.begin(), d.end(), [](float x) { return x < 0.0f; })) {
    throw ContractError("uncertainty values must be >= 0");
  }
}

double fused_uncertainty(const BeliefAssignment& b, EntropyBasis basis) {
  if (!b.is_normalized()) throw ContractError("fused_uncertainty needs a normalized assignment");
  const auto m = b.masses();
  return kernel::entropy_uncertainty<double>(m, basis == EntropyBasis::NormalizedSingletons);
}

UncertaintyVolume uncertainty_volume(const BeliefVolume& v, EntropyBasis basis) {
  if (!v.is_normalized()) throw ContractError("uncertainty_volume needs a normalized volume");
  const bool renorm = basis == EntropyBasis::NormalizedSingletons;
  const Extent3 e = v.extent();
  const auto voxels = static_cast<std::int64_t>(v.voxel_count());
  std::vector<float> out(static_cast<std::size_t>(voxels));
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < voxels; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    out[idx] = static_cast<float>(kernel::entropy_uncertainty<float>(v.voxel(idx), renorm));
  }
  return UncertaintyVolume(VoxelGrid({e[0], e[1], e[2]}, std::move(out)));
}

}  // namespace evfuse
