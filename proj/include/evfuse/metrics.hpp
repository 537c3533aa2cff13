#pragma once

#include <cstdint>
#include <span>

#include "evfuse/tensor_io.hpp"

namespace evfuse {

/// Soft Dice loss of a (W,H,L,N) probability grid against one-hot labels,
/// averaged over classes, smoothing 1e-5.
double dice_loss(const VoxelGrid& prob, const LabelGrid& labels);

/// Mean over voxels of -log p_label, probabilities clamped to [1e-7, 1].
double ce_loss(const VoxelGrid& prob, const LabelGrid& labels);

struct OverlapMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
};

/// Dice 2|P&G|/(|P|+|G|) and Jaccard |P&G|/|P|G| of two binary masks (any
/// nonzero value is foreground). Two empty masks score 1.
OverlapMetrics overlap(std::span<const std::uint8_t> predicted, std::span<const std::uint8_t> truth);

}  // namespace evfuse
