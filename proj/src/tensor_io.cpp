#include "evfuse/tensor_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>

#include "evfuse/errors.hpp"
#include "evfuse/npy.hpp"

namespace evfuse {

namespace {

std::string shape_str(std::span<const std::size_t> shape) {
  std::string s = "(";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + ")";
}

}  // namespace

std::size_t checked_element_count(std::span<const std::size_t> shape) {
  if (shape.size() != 3 && shape.size() != 4) {
    throw ShapeError("volume rank must be 3 or 4, got shape " + shape_str(shape));
  }
  constexpr std::uint64_t kMax = std::numeric_limits<std::uint32_t>::max();
  std::uint64_t n = 1;
  for (auto d : shape) {
    if (d == 0) throw ShapeError("volume extents must be positive, got " + shape_str(shape));
    if (d > kMax || n * d > kMax) {
      throw ShapeError("element count of " + shape_str(shape) + " exceeds 32 bits");
    }
    n *= d;
  }
  return static_cast<std::size_t>(n);
}

VoxelGrid::VoxelGrid(std::vector<std::size_t> shape, std::vector<float> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  const std::size_t n = checked_element_count(shape_);
  if (data_.size() != n) {
    throw ShapeError("data length " + std::to_string(data_.size()) + " does not match shape " +
                     shape_str(shape_));
  }
  const auto bad = std::find_if(data_.begin(), data_.end(), [](float v) { return !std::isfinite(v); });
  if (bad != data_.end()) {
    throw DomainError("non-finite value at element " + std::to_string(bad - data_.begin()));
  }
}

VoxelGrid VoxelGrid::filled(std::vector<std::size_t> shape, float value) {
  const std::size_t n = checked_element_count(shape);
  return VoxelGrid(std::move(shape), std::vector<float>(n, value));
}

LabelGrid::LabelGrid(Extent3 extent, std::vector<std::uint8_t> data, std::size_t num_classes)
    : extent_(extent), data_(std::move(data)), num_classes_(num_classes) {
  const std::size_t n = checked_element_count(extent_);
  if (data_.size() != n) throw ShapeError("label data length does not match extent");
  if (num_classes_ < 1 || num_classes_ > 256) throw ContractError("label class count must be in [1, 256]");
  for (auto v : data_) {
    if (v >= num_classes_) {
      throw ContractError("label value " + std::to_string(v) + " is not below class count " +
                          std::to_string(num_classes_));
    }
  }
}

VoxelGrid load_tensor(const std::filesystem::path& path) {
  auto arr = npy::read_f32(path);
  if (arr.shape.size() != 3 && arr.shape.size() != 4) {
    throw UnsupportedEncodingError("tensor file '" + path.string() + "' has rank " +
                                   std::to_string(arr.shape.size()) + ", expected 3 or 4");
  }
  return VoxelGrid(std::move(arr.shape), std::move(arr.data));
}

void save_tensor(const VoxelGrid& grid, const std::filesystem::path& path) {
  npy::write_f32(path, grid.shape(), grid.data());
}

LabelGrid load_labels(const std::filesystem::path& path, std::size_t num_classes) {
  auto arr = npy::read_u8(path);
  if (arr.shape.size() != 3) {
    throw UnsupportedEncodingError("label file '" + path.string() + "' must have rank 3");
  }
  return LabelGrid({arr.shape[0], arr.shape[1], arr.shape[2]}, std::move(arr.data), num_classes);
}

void save_labels(const LabelGrid& labels, const std::filesystem::path& path) {
  const auto e = labels.extent();
  npy::write_u8(path, e, labels.data());
}

}  // namespace evfuse
