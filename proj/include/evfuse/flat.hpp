#pragma once

// Stateless kernels over contiguous row-major float32 buffers, for foreign
// callers (language bindings). Each call validates shape and size before any
// computation and never writes to its inputs. A leading batch dimension is
// accepted wherever noted and is looped natively.

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "evfuse/uncertainty.hpp"
#include "evfuse/vwal.hpp"

namespace evfuse::flat {

struct View {
  std::span<const float> data;
  std::vector<std::size_t> shape;
};

struct ByteView {
  std::span<const std::uint8_t> data;
  std::vector<std::size_t> shape;
};

struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<float> data;
};

/// (W,H,L,N) or (B,W,H,L,N) logits -> belief masses of the same shape.
Tensor evidence_to_belief(const View& logits);

/// (W,H,L,N+1) or batched; inputs must be normalized.
Tensor fuse_volumes(const View& original, const View& restored, bool renormalize = true);

/// (W,H,L,N+1) -> (W,H,L), or batched (B,...) -> (B,W,H,L).
Tensor uncertainty_volume(const View& masses, EntropyBasis basis = EntropyBasis::NormalizedSingletons);

/// (W,H,L) -> 1-based ordinals in linear voxel order; batched ranks per sample.
std::vector<std::uint32_t> rank_voxels(const View& uncertainty, RankOrder order);

double dynamic_weight(double epsilon, std::size_t epoch, std::size_t total_epochs, std::size_t ordinal,
                      std::size_t count);

/// Per-voxel loss and uncertainty of identical (W,H,L) or (B,W,H,L) shape. A
/// batch returns the group sum of per-sample weighted losses.
double weighted_loss(const View& per_voxel_loss, const View& uncertainty, const WeightSchedule& sched);

/// Volumes (W,H,L) or (W,H,L,C); mask (W,H,L) of 0/1 forming one zero box.
std::pair<Tensor, Tensor> mix_pair(const View& a, const View& b, const ByteView& mask);

/// Inverse of `mix_pair` for belief volumes (W,H,L,N+1).
std::pair<Tensor, Tensor> restore_predictions(const View& mixed_a, const View& mixed_b, const ByteView& mask);

}  // namespace evfuse::flat
