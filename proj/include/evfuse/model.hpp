#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "evfuse/autodiff.hpp"
#include "evfuse/tensor_io.hpp"

namespace evfuse {

/// Per-voxel input features: own intensity, the six face neighbours
/// (clamped at the border) and the coordinates scaled to [-1, 1].
inline constexpr std::size_t kFeatureCount = 10;

/// (Z x 10) feature matrix of a rank-3 volume, rows in linear voxel order.
autodiff::Matrix voxel_features(const VoxelGrid& volume);

/// Per-voxel evidence network: dense(10->16, tanh) -> dense(16->16, tanh)
/// -> dense(16->N) logits. Parameters live in one flat vector, laid out as
/// W1, b1, W2, b2, W3, b3 with row-major (in x out) weights.
class ToyModel {
 public:
  static constexpr std::size_t kHidden = 16;
  static constexpr std::size_t kLayers = 3;

  /// Uniform Glorot initialisation from a seeded 64-bit Mersenne Twister.
  ToyModel(std::size_t num_classes, std::uint64_t seed);
  ToyModel(std::size_t num_classes, std::vector<double> parameters);

  std::size_t num_classes() const noexcept { return num_classes_; }
  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<const double> parameters() const noexcept { return params_; }
  std::span<double> parameters() noexcept { return params_; }

  struct LayerShape {
    std::size_t in = 0;
    std::size_t out = 0;
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
  };
  std::array<LayerShape, kLayers> layers() const;

  /// Parameter leaves of one tape, in layer order (W1, b1, W2, b2, W3, b3).
  struct Bound {
    std::array<autodiff::Var, 2 * kLayers> vars;
  };
  /// Records the parameters on `t`; `trainable` selects parameter() leaves
  /// over constant() leaves.
  Bound bind(autodiff::Tape& t, bool trainable) const;

  /// Logits (Z x N) for a feature matrix node.
  autodiff::Var logits(autodiff::Tape& t, const Bound& bound, autodiff::Var features) const;

  /// Dirichlet masses (Z x N+1) for a feature matrix node.
  autodiff::Var belief(autodiff::Tape& t, const Bound& bound, autodiff::Var features) const;

  /// Gradient of the last backward() w.r.t. the bound parameters, flattened
  /// in parameter order.
  std::vector<double> gradient(const autodiff::Tape& t, const Bound& bound) const;

  /// Forward pass without gradient tracking.
  autodiff::Matrix predict_belief(const VoxelGrid& volume) const;

  bool operator==(const ToyModel&) const = default;

 private:
  std::size_t num_classes_;
  std::vector<double> params_;
};

/// Writes `<dir>/layer{1,2,3}_{weight,bias}.npy` as float32 arrays.
void save_model(const ToyModel& model, const std::filesystem::path& dir);
ToyModel load_model(const std::filesystem::path& dir);

}  // namespace evfuse
