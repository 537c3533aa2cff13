#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace evfuse {

/// Spatial extent (W, H, L) of a volume.
using Extent3 = std::array<std::size_t, 3>;

inline std::size_t voxel_count(const Extent3& e) { return e[0] * e[1] * e[2]; }

/// Dense float32 volume of shape (W, H, L) or (W, H, L, K), row-major.
///
/// Immutable after construction. Every constructor validates the shape
/// (rank 3 or 4, positive extents, element count representable in 32 bits)
/// and rejects non-finite values with a DomainError.
class VoxelGrid {
 public:
  VoxelGrid(std::vector<std::size_t> shape, std::vector<float> data);

  static VoxelGrid filled(std::vector<std::size_t> shape, float value);
  static VoxelGrid zeros(std::vector<std::size_t> shape) { return filled(std::move(shape), 0.0f); }

  const std::vector<std::size_t>& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  Extent3 extent() const noexcept { return {shape_[0], shape_[1], shape_[2]}; }
  std::size_t channels() const noexcept { return shape_.size() == 4 ? shape_[3] : 1; }
  std::size_t voxel_count() const noexcept { return shape_[0] * shape_[1] * shape_[2]; }
  std::size_t size() const noexcept { return data_.size(); }

  std::span<const float> data() const noexcept { return data_; }
  float operator[](std::size_t i) const { return data_[i]; }
  float at(std::size_t x, std::size_t y, std::size_t z, std::size_t c = 0) const {
    return data_[((x * shape_[1] + y) * shape_[2] + z) * channels() + c];
  }

  /// Channels of one voxel, addressed by linear voxel index.
  std::span<const float> voxel(std::size_t v) const {
    return std::span<const float>(data_).subspan(v * channels(), channels());
  }

  bool operator==(const VoxelGrid&) const = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<float> data_;
};

/// Integer class map of shape (W, H, L); every value is below `num_classes`.
class LabelGrid {
 public:
  LabelGrid(Extent3 extent, std::vector<std::uint8_t> data, std::size_t num_classes);

  Extent3 extent() const noexcept { return extent_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t voxel_count() const noexcept { return data_.size(); }
  std::span<const std::uint8_t> data() const noexcept { return data_; }
  std::uint8_t operator[](std::size_t i) const { return data_[i]; }

  bool operator==(const LabelGrid&) const = default;

 private:
  Extent3 extent_;
  std::vector<std::uint8_t> data_;
  std::size_t num_classes_;
};

/// Validates a rank-3/4 shape and returns its element count. Throws
/// ShapeError on zero extents, bad rank or counts beyond 32 bits.
std::size_t checked_element_count(std::span<const std::size_t> shape);

VoxelGrid load_tensor(const std::filesystem::path& path);
void save_tensor(const VoxelGrid& grid, const std::filesystem::path& path);

LabelGrid load_labels(const std::filesystem::path& path, std::size_t num_classes);
void save_labels(const LabelGrid& labels, const std::filesystem::path& path);

}  // namespace evfuse
