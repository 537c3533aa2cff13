#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "evfuse/autodiff.hpp"
#include "evfuse/mixing.hpp"
#include "evfuse/model.hpp"
#include "evfuse/synthetic.hpp"
#include "evfuse/uncertainty.hpp"
#include "evfuse/vwal.hpp"

namespace evfuse {

struct TrainConfig {
  double lambda1 = 0.8;  // pre-training weighted term
  double lambda2 = 0.8;  // self-training weighted term, labeled part
  double lambda3 = 0.4;  // self-training weighted term, unlabeled part
  double ema_decay = 0.99;
  double learning_rate = 0.05;
  std::size_t pretrain_epochs = 40;
  std::size_t self_train_epochs = 6;
  /// Labeled samples per pre-training step; sample i is mixed with i+1.
  std::size_t labeled_batch = 2;
  /// Labeled/unlabeled pairs per self-training step.
  std::size_t unlabeled_batch = 2;
  std::uint64_t seed = 1;
  double epsilon = 1.0;
  RankOrder rank_order = RankOrder::AscendingUncertainty;
  Extent3 mask_zero_size{16, 16, 16};
  EntropyBasis entropy_basis = EntropyBasis::NormalizedSingletons;

  /// Throws ContractError on negative lambdas, decay outside [0, 1],
  /// non-positive learning rate or epsilon, or empty batches.
  void validate() const;
};

/// Scalar terms of one objective evaluation. Pre-training fills only the
/// labeled terms.
struct StepLosses {
  double objective = 0.0;
  double labeled = 0.0;
  double labeled_weighted = 0.0;
  double unlabeled = 0.0;
  double unlabeled_weighted = 0.0;
};

enum class Stage { Pretrain, SelfTrain };

struct EpochRecord {
  Stage stage = Stage::Pretrain;
  std::size_t epoch = 0;
  StepLosses mean;  // averaged over the epoch's steps
};

using EpochCallback = std::function<void(const EpochRecord&)>;

enum class Group { Labeled, Unlabeled };

/// A set of volumes exchanged under one mask. Entry j is mixed as
/// V_j * m + V_partner[j] * (1 - m); `partner` is a permutation.
struct MixedBatch {
  struct Entry {
    VoxelGrid volume;
    std::vector<std::uint8_t> targets;  // labels or pseudo-labels
    Group group = Group::Labeled;
  };
  std::vector<Entry> entries;
  std::vector<std::size_t> partner;
  MixMask mask;
  std::vector<autodiff::Matrix> original_features;
  std::vector<autodiff::Matrix> mixed_features;
};

/// Labeled batch for pre-training; entry i is paired with i+1 mod size.
MixedBatch make_pretrain_batch(std::span<const Sample* const> labeled, const MixMask& mask);

/// Self-training batch of labeled/unlabeled pairs, interleaved as
/// [l0, u0, l1, u1, ...] with each pair exchanging regions.
MixedBatch make_self_train_batch(std::span<const Sample* const> labeled,
                                 std::span<const VoxelGrid* const> unlabeled,
                                 std::span<const std::vector<std::uint8_t>> pseudo_labels, const MixMask& mask);

struct ObjectiveSettings {
  double lambda_labeled = 0.8;
  double lambda_unlabeled = 0.4;
  WeightSchedule schedule;
  EntropyBasis entropy_basis = EntropyBasis::NormalizedSingletons;
};

/// Which scalar to differentiate.
enum class LossTerm { Objective, Labeled, LabeledWeighted, Unlabeled, UnlabeledWeighted };

/// Per-entry voxel weights. They are constants of the objective: computed
/// from the forward pass when not supplied, never differentiated.
using VoxelWeights = std::vector<std::vector<double>>;

struct ObjectiveResult {
  StepLosses losses;
  std::vector<double> gradient;  // empty unless requested
  VoxelWeights weights;
  /// Fused (renormalized) masses per entry, rows in voxel order.
  std::vector<autodiff::Matrix> fused;
  std::vector<autodiff::Matrix> original;
};

/// Forward (and optionally backward) of the objective on one batch:
/// supervised Dice + CE on fused and on original predictions per group, plus
/// the rank-weighted per-voxel CE of the fused predictions.
ObjectiveResult evaluate_objective(const ToyModel& model, const MixedBatch& batch, const ObjectiveSettings& settings,
                                   const VoxelWeights* frozen_weights = nullptr, LossTerm root = LossTerm::Objective,
                                   bool with_gradient = true);

/// Model initialised from the config seed.
ToyModel initial_model(const TrainConfig& cfg, std::size_t num_classes = 2);

ToyModel pretrain(std::span<const Sample> labeled, const TrainConfig& cfg, const EpochCallback& on_epoch = {});
ToyModel pretrain(const ToyModel& init, std::span<const Sample> labeled, const TrainConfig& cfg,
                  const EpochCallback& on_epoch = {});

struct TeacherStudent {
  ToyModel student;
  ToyModel teacher;
};

TeacherStudent self_train(const ToyModel& init, const SyntheticDataset& dataset, const TrainConfig& cfg,
                          const EpochCallback& on_epoch = {});

/// Throws TrainingError when a loss or parameter is NaN or infinite.
void check_finite(const StepLosses& losses, std::span<const double> params, Stage stage, std::size_t epoch,
                  std::size_t step);

/// teacher <- alpha * teacher + (1 - alpha) * student, elementwise.
void ema_update(std::span<double> teacher, std::span<const double> student, double alpha);

/// Hard argmax of the pignistic probabilities, per voxel.
std::vector<std::uint8_t> predict_labels(const ToyModel& model, const VoxelGrid& volume);

struct EvalMetrics {
  double dice = 0.0;
  double jaccard = 0.0;
};

/// Mean Dice and Jaccard of the argmax foreground (class != 0).
EvalMetrics evaluate(const ToyModel& model, std::span<const Sample> samples);

struct GradCheckResult {
  double max_relative_error = 0.0;
  double max_absolute_error = 0.0;
  std::size_t worst_index = 0;
};

/// Compares `analytic` against central differences of `f` around `theta`.
/// Relative error per entry is |a - n| / max(|a|, |n|, floor).
GradCheckResult compare_with_finite_differences(std::span<const double> theta, std::span<const double> analytic,
                                                const std::function<double(std::span<const double>)>& f,
                                                double step = 1e-3, double floor = 1e-4);

/// Tape gradient of one objective term versus central differences (step
/// 1e-3) over every model parameter. Voxel weights are frozen at `model`.
GradCheckResult grad_check(const ToyModel& model, const MixedBatch& batch, const ObjectiveSettings& settings,
                           LossTerm term, double step = 1e-3);

/// Full desk-scale experiment on synthetic data.
struct ToyRunConfig {
  TrainConfig train;
  std::size_t labeled = 4;
  std::size_t unlabeled = 36;
  std::size_t test = 10;
  std::size_t volume_size = 24;
};

struct ToyRunResult {
  ToyModel pretrained;
  ToyModel student;
  ToyModel teacher;
  EvalMetrics pretrain_metrics;
  EvalMetrics student_metrics;
  EvalMetrics teacher_metrics;
  std::vector<EpochRecord> history;
};

ToyRunResult run_toy(const ToyRunConfig& cfg, const EpochCallback& on_epoch = {});

/// Parses line-oriented `key=value` text; '#' starts a comment. Unknown
/// keys or malformed values raise ContractError.
ToyRunConfig parse_toy_config(const std::string& text, ToyRunConfig base = {});

std::string to_string(Stage stage);

}  // namespace evfuse
