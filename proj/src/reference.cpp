#include "evfuse/reference.hpp"

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse::reference {

namespace {

std::vector<float> select(std::span<const float> first, std::span<const float> second, const MixMask& m,
                          std::size_t channels) {
  std::vector<float> out(first.size());
  for (std::size_t v = 0; v < m.voxel_count(); ++v) {
    for (std::size_t c = 0; c < channels; ++c) {
      out[v * channels + c] = m[v] ? first[v * channels + c] : second[v * channels + c];
    }
  }
  return out;
}

}  // namespace

BeliefVolume evidence_to_belief(const VoxelGrid& logits) {
  if (logits.rank() != 4) throw ShapeError("logits must have shape (W, H, L, N)");
  const std::size_t n = logits.channels();
  if (n < 2) throw ContractError("evidence_to_belief needs N >= 2 classes");
  std::vector<float> out(logits.voxel_count() * (n + 1));
  std::vector<double> evidence(n);
  for (std::size_t v = 0; v < logits.voxel_count(); ++v) {
    const auto in = logits.voxel(v);
    for (std::size_t k = 0; k < n; ++k) evidence[k] = kernel::softplus(static_cast<double>(in[k]));
    kernel::dirichlet_masses<double, float>(evidence, std::span<float>(out).subspan(v * (n + 1), n + 1));
  }
  const Extent3 e = logits.extent();
  return BeliefVolume(VoxelGrid({e[0], e[1], e[2], n + 1}, std::move(out)), true);
}

BeliefVolume fuse_volumes(const BeliefVolume& original, const BeliefVolume& restored, const FusionConfig& cfg) {
  if (original.grid().shape() != restored.grid().shape()) throw ShapeError("fuse_volumes: shapes differ");
  const std::size_t k = original.num_classes() + 1;
  std::vector<float> out(original.voxel_count() * k);
  for (std::size_t v = 0; v < original.voxel_count(); ++v) {
    auto dst = std::span<float>(out).subspan(v * k, k);
    const float total = kernel::ipaf<float>(original.voxel(v), restored.voxel(v), dst);
    if (!cfg.renormalize_output) continue;
    if (!(static_cast<double>(total) > cfg.conflict_epsilon)) {
      throw TotalConflictError("fuse_volumes: a voxel is in total conflict");
    }
    for (float& m : dst) m /= total;
  }
  return BeliefVolume(VoxelGrid(original.grid().shape(), std::move(out)), cfg.renormalize_output);
}

UncertaintyVolume uncertainty_volume(const BeliefVolume& v, EntropyBasis basis) {
  std::vector<float> out(v.voxel_count());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = static_cast<float>(
        kernel::entropy_uncertainty<float>(v.voxel(i), basis == EntropyBasis::NormalizedSingletons));
  }
  const Extent3 e = v.extent();
  return UncertaintyVolume(VoxelGrid({e[0], e[1], e[2]}, std::move(out)));
}

MixedPair mix_pair(const VoxelGrid& a, const VoxelGrid& b, const MixMask& m) {
  if (a.shape() != b.shape() || a.extent() != m.extent()) throw ShapeError("mix_pair: shapes differ");
  return MixedPair{VoxelGrid(a.shape(), select(a.data(), b.data(), m, a.channels())),
                   VoxelGrid(a.shape(), select(b.data(), a.data(), m, a.channels())), m, 0, 1};
}

std::pair<BeliefVolume, BeliefVolume> restore_predictions(const BeliefVolume& pred_mixed_a,
                                                          const BeliefVolume& pred_mixed_b, const MixMask& m) {
  const auto& ga = pred_mixed_a.grid();
  const auto& gb = pred_mixed_b.grid();
  if (ga.shape() != gb.shape() || ga.extent() != m.extent()) throw ShapeError("restore_predictions: shapes differ");
  const bool normalized = pred_mixed_a.is_normalized();
  return {BeliefVolume(VoxelGrid(ga.shape(), select(ga.data(), gb.data(), m, ga.channels())), normalized),
          BeliefVolume(VoxelGrid(ga.shape(), select(gb.data(), ga.data(), m, ga.channels())), normalized)};
}

double weighted_loss(const VoxelGrid& per_voxel_loss, const UncertaintyVolume& u, const WeightSchedule& sched) {
  if (per_voxel_loss.rank() != 3 || per_voxel_loss.extent() != u.extent()) {
    throw ShapeError("weighted_loss: loss and uncertainty shapes differ");
  }
  const RankMap ranks = rank_voxels(u, sched.order);
  const std::size_t z = ranks.voxel_count();
  double total = 0.0;
  for (std::size_t v = 0; v < z; ++v) {
    total += dynamic_weight(sched, ranks[v], z) * static_cast<double>(per_voxel_loss[v]);
  }
  return total / static_cast<double>(z);
}

}  // namespace evfuse::reference
