#include "evfuse/fusion.hpp"

#include <cstdint>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse {

namespace {

void check_config(const FusionConfig& cfg) {
  if (!(cfg.conflict_epsilon > 0.0)) throw ContractError("conflict_epsilon must be positive");
}

}  // namespace

BeliefAssignment ipaf_fuse(const BeliefAssignment& a, const BeliefAssignment& b, const FusionConfig& cfg) {
  check_config(cfg);
  if (a.num_classes() != b.num_classes()) throw ShapeError("ipaf_fuse: class counts differ");
  if (!a.is_normalized() || !b.is_normalized()) throw ContractError("ipaf_fuse needs normalized inputs");

  const std::size_t n = a.num_classes();
  const auto am = a.masses();
  const auto bm = b.masses();
  std::vector<double> fused(n + 1);
  const double total = kernel::ipaf<double>(am, bm, fused);
  const double composite = fused[n];
  fused.pop_back();

  if (!cfg.renormalize_output) return BeliefAssignment::unnormalized(std::move(fused), composite);
  if (total <= cfg.conflict_epsilon) throw TotalConflictError("ipaf_fuse: sources are in total conflict");
  for (double& m : fused) m /= total;
  return BeliefAssignment::normalized(std::move(fused), composite / total);
}

BeliefVolume fuse_volumes(const BeliefVolume& original, const BeliefVolume& restored, const FusionConfig& cfg) {
  check_config(cfg);
  if (original.grid().shape() != restored.grid().shape()) throw ShapeError("fuse_volumes: shapes differ");
  if (!original.is_normalized() || !restored.is_normalized()) {
    throw ContractError("fuse_volumes needs normalized inputs");
  }
  const std::size_t k = original.num_classes() + 1;
  const auto voxels = static_cast<std::int64_t>(original.voxel_count());
  std::vector<float> out(static_cast<std::size_t>(voxels) * k);
  int conflict = 0;

#pragma omp parallel for schedule(static) reduction(max : conflict)
  for (std::int64_t i = 0; i < voxels; ++i) {
    const auto v = static_cast<std::size_t>(i);
    auto dst = std::span<float>(out).subspan(v * k, k);
    const float total = kernel::ipaf<float>(original.voxel(v), restored.voxel(v), dst);
    if (!cfg.renormalize_output) continue;
    if (!(static_cast<double>(total) > cfg.conflict_epsilon)) {
      conflict = 1;
      continue;
    }
    for (float& m : dst) m /= total;
  }
  if (conflict) throw TotalConflictError("fuse_volumes: a voxel is in total conflict");
  return BeliefVolume(VoxelGrid(original.grid().shape(), std::move(out)), cfg.renormalize_output);
}

}  // namespace evfuse
