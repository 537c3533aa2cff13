#include "evfuse/metrics.hpp"

#include <cmath>

#include "evfuse/belief_ops.hpp"
#include "evfuse/errors.hpp"

namespace evfuse {

namespace {

autodiff::Matrix probability_matrix(const VoxelGrid& prob, const LabelGrid& labels) {
  if (prob.rank() != 4 || prob.extent() != labels.extent()) {
    throw ShapeError("probability grid and labels differ in shape");
  }
  if (prob.channels() != labels.num_classes()) throw ShapeError("probability channels differ from class count");
  autodiff::Matrix m(prob.voxel_count(), prob.channels());
  for (std::size_t v = 0; v < prob.voxel_count(); ++v) {
    double total = 0.0;
    const auto p = prob.voxel(v);
    for (std::size_t k = 0; k < p.size(); ++k) {
      m(v, k) = p[k];
      total += p[k];
    }
    if (std::abs(total - 1.0) > 1e-4) throw ContractError("probabilities of a voxel do not sum to 1");
  }
  return m;
}

}  // namespace

double dice_loss(const VoxelGrid& prob, const LabelGrid& labels) {
  autodiff::Tape t;
  const auto p = t.constant(probability_matrix(prob, labels));
  return t.value(autodiff::soft_dice(t, p, labels.data())).scalar();
}

double ce_loss(const VoxelGrid& prob, const LabelGrid& labels) {
  autodiff::Tape t;
  const auto p = t.constant(probability_matrix(prob, labels));
  return t.value(autodiff::mean(t, autodiff::cross_entropy_voxels(t, p, labels.data()))).scalar();
}

OverlapMetrics overlap(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth) {
  if (predicted.size() != truth.size()) throw ShapeError("overlap: mask sizes differ");
  std::size_t both = 0, p = 0, g = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const bool a = predicted[i] != 0;
    const bool b = truth[i] != 0;
    p += a;
    g += b;
    both += a && b;
  }
  if (p + g == 0) return {1.0, 1.0};
  const double inter = static_cast<double>(both);
  return {2.0 * inter / static_cast<double>(p + g), inter / static_cast<double>(p + g - both)};
}

}  // namespace evfuse
