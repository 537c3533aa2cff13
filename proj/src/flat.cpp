#include "evfuse/flat.hpp"

#include <functional>
#include <string>

#include "evfuse/errors.hpp"
#include "evfuse/fusion.hpp"
#include "evfuse/mixing.hpp"

namespace evfuse::flat {

namespace {

std::size_t product(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

void check_view(const View& v, const char* name) {
  if (v.shape.empty()) throw ShapeError(std::string(name) + ": empty shape");
  for (auto d : v.shape) {
    if (d == 0) throw ShapeError(std::string(name) + ": zero extent");
  }
  if (product(v.shape) != v.data.size()) throw ShapeError(std::string(name) + ": buffer size does not match shape");
}

// Splits a view of rank `base` or `base + 1` into per-sample grids.
std::vector<VoxelGrid> unbatch(const View& v, std::size_t base, const char* name) {
  check_view(v, name);
  if (v.shape.size() != base && v.shape.size() != base + 1) {
    throw ShapeError(std::string(name) + ": expected rank " + std::to_string(base) + " or " +
                     std::to_string(base + 1));
  }
  const bool batched = v.shape.size() == base + 1;
  const std::size_t count = batched ? v.shape[0] : 1;
  std::vector<std::size_t> item(v.shape.begin() + (batched ? 1 : 0), v.shape.end());
  const std::size_t stride = product(item);
  std::vector<VoxelGrid> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    auto chunk = v.data.subspan(i * stride, stride);
    out.emplace_back(item, std::vector<float>(chunk.begin(), chunk.end()));
  }
  return out;
}

Tensor rebatch(const View& like, std::size_t base, std::vector<VoxelGrid> items) {
  Tensor t;
  if (like.shape.size() == base + 1) t.shape.push_back(items.size());
  t.shape.insert(t.shape.end(), items.front().shape().begin(), items.front().shape().end());
  for (const auto& g : items) t.data.insert(t.data.end(), g.data().begin(), g.data().end());
  return t;
}

Tensor map_items(const View& v, std::size_t base, const char* name,
                 const std::function<VoxelGrid(const VoxelGrid&)>& f) {
  auto items = unbatch(v, base, name);
  std::vector<VoxelGrid> out;
  out.reserve(items.size());
  for (const auto& g : items) out.push_back(f(g));
  return rebatch(v, base, std::move(out));
}

MixMask to_mask(const ByteView& m) {
  if (m.shape.size() != 3) throw ShapeError("mask: expected rank 3");
  if (product(m.shape) != m.data.size()) throw ShapeError("mask: buffer size does not match shape");
  return MixMask::from_values({m.shape[0], m.shape[1], m.shape[2]}, m.data);
}

Tensor to_tensor(const VoxelGrid& g) { return Tensor{g.shape(), {g.data().begin(), g.data().end()}}; }

}  // namespace

Tensor evidence_to_belief(const View& logits) {
  return map_items(logits, 4, "logits", [](const VoxelGrid& g) { return evfuse::evidence_to_belief(g).grid(); });
}

Tensor fuse_volumes(const View& original, const View& restored, bool renormalize) {
  if (original.shape != restored.shape) throw ShapeError("fuse_volumes: operand shapes differ");
  auto a = unbatch(original, 4, "original");
  auto b = unbatch(restored, 4, "restored");
  FusionConfig cfg;
  cfg.renormalize_output = renormalize;
  std::vector<VoxelGrid> out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    out.push_back(evfuse::fuse_volumes(BeliefVolume(a[i], true), BeliefVolume(b[i], true), cfg).grid());
  }
  return rebatch(original, 4, std::move(out));
}

Tensor uncertainty_volume(const View& masses, EntropyBasis basis) {
  return map_items(masses, 4, "masses", [basis](const VoxelGrid& g) {
    return evfuse::uncertainty_volume(BeliefVolume(g, true), basis).grid();
  });
}

std::vector<std::uint32_t> rank_voxels(const View& uncertainty, RankOrder order) {
  std::vector<std::uint32_t> out;
  for (auto& g : unbatch(uncertainty, 3, "uncertainty")) {
    const auto ranks = evfuse::rank_voxels(UncertaintyVolume(std::move(g)), order);
    out.insert(out.end(), ranks.ranks().begin(), ranks.ranks().end());
  }
  return out;
}

double dynamic_weight(double epsilon, std::size_t epoch, std::size_t total_epochs, std::size_t ordinal,
                      std::size_t count) {
  return evfuse::dynamic_weight(WeightSchedule{epsilon, epoch, total_epochs}, ordinal, count);
}

double weighted_loss(const View& per_voxel_loss, const View& uncertainty, const WeightSchedule& sched) {
  if (per_voxel_loss.shape != uncertainty.shape) throw ShapeError("weighted_loss: operand shapes differ");
  auto losses = unbatch(per_voxel_loss, 3, "loss");
  std::vector<UncertaintyVolume> us;
  for (auto& g : unbatch(uncertainty, 3, "uncertainty")) us.emplace_back(std::move(g));
  return evfuse::weighted_loss(losses, us, sched);
}

std::pair<Tensor, Tensor> mix_pair(const View& a, const View& b, const ByteView& mask) {
  check_view(a, "a");
  check_view(b, "b");
  if (a.shape != b.shape) throw ShapeError("mix_pair: operand shapes differ");
  const VoxelGrid va(a.shape, {a.data.begin(), a.data.end()});
  const VoxelGrid vb(b.shape, {b.data.begin(), b.data.end()});
  const auto pair = evfuse::mix_pair(va, vb, to_mask(mask));
  return {to_tensor(pair.mixed_a), to_tensor(pair.mixed_b)};
}

std::pair<Tensor, Tensor> restore_predictions(const View& mixed_a, const View& mixed_b, const ByteView& mask) {
  check_view(mixed_a, "mixed_a");
  check_view(mixed_b, "mixed_b");
  if (mixed_a.shape.size() != 4) throw ShapeError("restore_predictions: expected rank 4");
  const auto va = BeliefVolume::from_grid(VoxelGrid(mixed_a.shape, {mixed_a.data.begin(), mixed_a.data.end()}));
  const auto vb = BeliefVolume::from_grid(VoxelGrid(mixed_b.shape, {mixed_b.data.begin(), mixed_b.data.end()}));
  const auto [ra, rb] = evfuse::restore_predictions(va, vb, to_mask(mask));
  return {to_tensor(ra.grid()), to_tensor(rb.grid())};
}

}  // namespace evfuse::flat
