#include "evfuse/vwal.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse {

void WeightSchedule::validate() const {
  if (!(epsilon > 0.0)) throw ContractError("weight schedule epsilon must be > 0");
  if (total_epochs < 1) throw ContractError("weight schedule needs at least one epoch");
  if (epoch < 1 || epoch > total_epochs) {
    throw ContractError("epoch " + std::to_string(epoch) + " outside [1, " + std::to_string(total_epochs) + "]");
  }
}

RankMap::RankMap(Extent3 extent, std::vector<std::uint32_t> ranks) : extent_(extent), ranks_(std::move(ranks)) {
  const std::size_t z = checked_element_count(extent_);
  if (ranks_.size() != z) throw ShapeError("rank map length does not match extent");
  std::vector<bool> seen(z, false);
  for (auto r : ranks_) {
    if (r < 1 || r > z || seen[r - 1]) throw ContractError("rank map is not a permutation of 1..Z");
    seen[r - 1] = true;
  }
}

RankMap rank_voxels(const UncertaintyVolume& u, RankOrder order) {
  const auto values = u.data();
  std::vector<std::uint32_t> idx(values.size());
  std::iota(idx.begin(), idx.end(), 0u);
  if (order == RankOrder::AscendingUncertainty) {
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] < values[b]; });
  } else {
    std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return values[a] > values[b]; });
  }
  std::vector<std::uint32_t> ranks(values.size());
  for (std::size_t pos = 0; pos < idx.size(); ++pos) ranks[idx[pos]] = static_cast<std::uint32_t>(pos + 1);
  return RankMap(u.extent(), std::move(ranks));
}

double dynamic_weight(const WeightSchedule& sched, std::size_t ordinal, std::size_t count) {
  sched.validate();
  if (ordinal < 1 || ordinal > count) {
    throw ContractError("ordinal " + std::to_string(ordinal) + " outside [1, " + std::to_string(count) + "]");
  }
  const double position = 2.0 * static_cast<double>(ordinal) / static_cast<double>(count) - 1.0;
  return sched.epsilon * kernel::sigmoid(sched.progress() * position);
}

VoxelGrid weight_volume(const UncertaintyVolume& u, const WeightSchedule& sched) {
  sched.validate();
  const RankMap ranks = rank_voxels(u, sched.order);
  const std::size_t z = ranks.voxel_count();
  const auto n = static_cast<std::int64_t>(z);
  std::vector<float> w(z);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::size_t>(i);
    w[v] = static_cast<float>(dynamic_weight(sched, ranks[v], z));
  }
  const Extent3 e = u.extent();
  return VoxelGrid({e[0], e[1], e[2]}, std::move(w));
}

double weighted_loss(const VoxelGrid& per_voxel_loss, const UncertaintyVolume& u, const WeightSchedule& sched) {
  if (per_voxel_loss.rank() != 3 || per_voxel_loss.extent() != u.extent()) {
    throw ShapeError("weighted_loss: loss and uncertainty shapes differ");
  }
  sched.validate();
  const RankMap ranks = rank_voxels(u, sched.order);
  const std::size_t z = ranks.voxel_count();
  const auto n = static_cast<std::int64_t>(z);
  std::vector<double> terms(z);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) {
    const auto v = static_cast<std::size_t>(i);
    terms[v] = dynamic_weight(sched, ranks[v], z) * static_cast<double>(per_voxel_loss[v]);
  }
  // Fixed-order sum keeps the result independent of the thread count.
  double total = 0.0;
  for (double t : terms) total += t;
  return total / static_cast<double>(z);
}

double weighted_loss(std::span<const VoxelGrid> per_voxel_losses, std::span<const UncertaintyVolume> uncertainties,
                     const WeightSchedule& sched) {
  if (per_voxel_losses.size() != uncertainties.size()) {
    throw ShapeError("weighted_loss: loss and uncertainty groups differ in size");
  }
  double total = 0.0;
  for (std::size_t k = 0; k < per_voxel_losses.size(); ++k) {
    total += weighted_loss(per_voxel_losses[k], uncertainties[k], sched);
  }
  return total;
}

}  // namespace evfuse
