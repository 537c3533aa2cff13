#include "evfuse/mixing.hpp"

#include <algorithm>
#include <random>

#include "evfuse/errors.hpp"
#include "evfuse/npy.hpp"

namespace evfuse {

namespace {

// Channel-broadcast select: out = m ? first : second, per voxel.
std::vector<float> select_by_mask(std::span<const float> first, std::span<const float> second,
                                  const MixMask& m, std::size_t channels) {
  const auto voxels = static_cast<std::int64_t>(m.voxel_count());
  std::vector<float> out(first.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < voxels; ++i) {
    const auto v = static_cast<std::size_t>(i);
    const auto& src = m[v] ? first : second;
    for (std::size_t c = 0; c < channels; ++c) out[v * channels + c] = src[v * channels + c];
  }
  return out;
}

void check_same(const VoxelGrid& a, const VoxelGrid& b, const MixMask& m) {
  if (a.shape() != b.shape()) throw ShapeError("mixing: operand shapes differ");
  if (a.extent() != m.extent()) throw ShapeError("mixing: mask extent differs from operands");
}

}  // namespace

MixMask::MixMask(Extent3 extent, Box3 zero_region) : extent_(extent), zero_region_(zero_region) {
  const std::size_t n = checked_element_count(extent_);
  for (int d = 0; d < 3; ++d) {
    if (zero_region_.origin[d] + zero_region_.size[d] > extent_[d]) {
      throw ContractError("mask zero region does not fit inside the volume");
    }
  }
  if (evfuse::voxel_count(zero_region_.size) == 0) zero_region_ = Box3{};
  values_.assign(n, 1);
  const auto& o = zero_region_.origin;
  const auto& s = zero_region_.size;
  for (std::size_t x = o[0]; x < o[0] + s[0]; ++x) {
    for (std::size_t y = o[1]; y < o[1] + s[1]; ++y) {
      for (std::size_t z = o[2]; z < o[2] + s[2]; ++z) {
        values_[(x * extent_[1] + y) * extent_[2] + z] = 0;
      }
    }
  }
}

MixMask MixMask::from_values(Extent3 extent, std::span<const std::uint8_t> values) {
  if (values.size() != checked_element_count(extent)) throw ShapeError("mask values do not match extent");
  Extent3 lo = extent;
  Extent3 hi{0, 0, 0};
  bool any = false;
  for (std::size_t x = 0; x < extent[0]; ++x) {
    for (std::size_t y = 0; y < extent[1]; ++y) {
      for (std::size_t z = 0; z < extent[2]; ++z) {
        const auto v = values[(x * extent[1] + y) * extent[2] + z];
        if (v > 1) throw ContractError("mask values must be 0 or 1");
        if (v != 0) continue;
        any = true;
        const Extent3 p{x, y, z};
        for (int d = 0; d < 3; ++d) {
          lo[d] = std::min(lo[d], p[d]);
          hi[d] = std::max(hi[d], p[d] + 1);
        }
      }
    }
  }
  Box3 box;
  if (any) box = Box3{lo, {hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]}};
  MixMask m(extent, box);
  if (!std::equal(values.begin(), values.end(), m.values_.begin())) {
    throw ContractError("mask zeros do not form a single box");
  }
  return m;
}

std::size_t MixMask::zero_count() const noexcept {
  return static_cast<std::size_t>(std::count(values_.begin(), values_.end(), std::uint8_t{0}));
}

MixMask generate_mask(Extent3 extent, Extent3 zero_size, std::uint64_t seed) {
  for (int d = 0; d < 3; ++d) {
    if (zero_size[d] > extent[d]) throw ContractError("mask zero region is larger than the volume");
  }
  std::mt19937_64 rng(seed);
  Box3 box{{0, 0, 0}, zero_size};
  for (int d = 0; d < 3; ++d) {
    const std::uint64_t placements = extent[d] - zero_size[d] + 1;
    box.origin[d] = static_cast<std::size_t>(rng() % placements);
  }
  return MixMask(extent, box);
}

MixedPair mix_pair(const VoxelGrid& a, const VoxelGrid& b, const MixMask& m, std::size_t source_a,
                   std::size_t source_b) {
  check_same(a, b, m);
  const std::size_t c = a.channels();
  return MixedPair{VoxelGrid(a.shape(), select_by_mask(a.data(), b.data(), m, c)),
                   VoxelGrid(a.shape(), select_by_mask(b.data(), a.data(), m, c)), m, source_a, source_b};
}

std::pair<LabelGrid, LabelGrid> mix_labels(const LabelGrid& a, const LabelGrid& b, const MixMask& m) {
  if (a.extent() != b.extent() || a.extent() != m.extent()) throw ShapeError("mix_labels: extents differ");
  if (a.num_classes() != b.num_classes()) throw ShapeError("mix_labels: class counts differ");
  std::vector<std::uint8_t> ma(a.voxel_count()), mb(a.voxel_count());
  for (std::size_t v = 0; v < ma.size(); ++v) {
    ma[v] = m[v] ? a[v] : b[v];
    mb[v] = m[v] ? b[v] : a[v];
  }
  return {LabelGrid(a.extent(), std::move(ma), a.num_classes()), LabelGrid(a.extent(), std::move(mb), a.num_classes())};
}

std::pair<BeliefVolume, BeliefVolume> restore_predictions(const BeliefVolume& pred_mixed_a,
                                                          const BeliefVolume& pred_mixed_b, const MixMask& m) {
  check_same(pred_mixed_a.grid(), pred_mixed_b.grid(), m);
  if (pred_mixed_a.is_normalized() != pred_mixed_b.is_normalized()) {
    throw ContractError("restore_predictions: operands differ in normalization state");
  }
  const bool normalized = pred_mixed_a.is_normalized();
  const auto& ga = pred_mixed_a.grid();
  const auto& gb = pred_mixed_b.grid();
  const std::size_t c = ga.channels();
  return {BeliefVolume(VoxelGrid(ga.shape(), select_by_mask(ga.data(), gb.data(), m, c)), normalized),
          BeliefVolume(VoxelGrid(ga.shape(), select_by_mask(gb.data(), ga.data(), m, c)), normalized)};
}

MixMask load_mask(const std::filesystem::path& path) {
  auto arr = npy::read_u8(path);
  if (arr.shape.size() != 3) throw UnsupportedEncodingError("mask file '" + path.string() + "' must have rank 3");
  return MixMask::from_values({arr.shape[0], arr.shape[1], arr.shape[2]}, arr.data);
}

void save_mask(const MixMask& m, const std::filesystem::path& path) {
  const Extent3 e = m.extent();
  npy::write_u8(path, e, m.values());
}

}  // namespace evfuse
