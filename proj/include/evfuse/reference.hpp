#pragma once

// Single-threaded versions of the OpenMP volume kernels. They run the same
// per-voxel formulas in plain loops and exist so tests and benchmarks can
// compare the parallel paths against them.

#include <utility>

#include "evfuse/evidence.hpp"
#include "evfuse/fusion.hpp"
#include "evfuse/mixing.hpp"
#include "evfuse/uncertainty.hpp"
#include "evfuse/vwal.hpp"

namespace evfuse::reference {

BeliefVolume evidence_to_belief(const VoxelGrid& logits);
BeliefVolume fuse_volumes(const BeliefVolume& original, const BeliefVolume& restored, const FusionConfig& cfg = {});
UncertaintyVolume uncertainty_volume(const BeliefVolume& v,
                                     EntropyBasis basis = EntropyBasis::NormalizedSingletons);
MixedPair mix_pair(const VoxelGrid& a, const VoxelGrid& b, const MixMask& m);
std::pair<BeliefVolume, BeliefVolume> restore_predictions(const BeliefVolume& pred_mixed_a,
                                                          const BeliefVolume& pred_mixed_b, const MixMask& m);
double weighted_loss(const VoxelGrid& per_voxel_loss, const UncertaintyVolume& u, const WeightSchedule& sched);

}  // namespace evfuse::reference
