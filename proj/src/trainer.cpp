#include "evfuse/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "evfuse/belief_ops.hpp"
#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"
#include "evfuse/metrics.hpp"

namespace evfuse {

using autodiff::Matrix;
using autodiff::Tape;
using autodiff::Var;

namespace {

// Separates the training stream from the initialisation stream.
constexpr std::uint64_t kTrainStream = 0x9E3779B97F4A7C15ull;
constexpr std::uint64_t kSelfTrainStream = 0xC2B2AE3D27D4EB4Full;
constexpr std::uint64_t kTestStream = 0x165667B19E3779F9ull;

std::vector<std::size_t> permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::size_t> p(n);
  for (std::size_t i = 0; i < n; ++i) p[i] = i;
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng() % i]);
  return p;
}

Matrix features_of(const VoxelGrid& v) { return voxel_features(v); }

void finish_batch(MixedBatch& b) {
  const std::size_t k = b.entries.size();
  std::vector<bool> seen(k, false);
  for (auto p : b.partner) {
    if (p >= k || seen[p]) throw ContractError("mixed batch partners must form a permutation");
    seen[p] = true;
  }
  for (std::size_t j = 0; j < k; ++j) {
    if (b.entries[j].volume.extent() != b.mask.extent()) throw ShapeError("batch volume extent differs from mask");
  }
  b.original_features.clear();
  b.mixed_features.clear();
  for (std::size_t j = 0; j < k; ++j) {
    const auto& self = b.entries[j].volume;
    const auto& other = b.entries[b.partner[j]].volume;
    b.original_features.push_back(features_of(self));
    b.mixed_features.push_back(features_of(mix_pair(self, other, b.mask).mixed_a));
  }
}

std::vector<double> voxel_weights(const Matrix& fused, Extent3 extent, const ObjectiveSettings& s) {
  std::vector<float> u(fused.rows);
  for (std::size_t r = 0; r < fused.rows; ++r) {
    u[r] = static_cast<float>(kernel::entropy_uncertainty<double>(
        fused.row(r), s.entropy_basis == EntropyBasis::NormalizedSingletons));
  }
  const UncertaintyVolume uv(VoxelGrid({extent[0], extent[1], extent[2]}, std::move(u)));
  const VoxelGrid w = weight_volume(uv, s.schedule);
  return std::vector<double>(w.data().begin(), w.data().end());
}


void accumulate(StepLosses& acc, const StepLosses& l) {
  acc.objective += l.objective;
  acc.labeled += l.labeled;
  acc.labeled_weighted += l.labeled_weighted;
  acc.unlabeled += l.unlabeled;
  acc.unlabeled_weighted += l.unlabeled_weighted;
}

StepLosses averaged(StepLosses acc, std::size_t steps) {
  const double inv = steps ? 1.0 / static_cast<double>(steps) : 0.0;
  acc.objective *= inv;
  acc.labeled *= inv;
  acc.labeled_weighted *= inv;
  acc.unlabeled *= inv;
  acc.unlabeled_weighted *= inv;
  return acc;
}

void gradient_step(ToyModel& model, std::span<const double> grad, double lr) {
  auto p = model.parameters();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * grad[i];
}

std::uint8_t argmax_pignistic(std::span<const double> masses) {
  const std::size_t n = masses.size() - 1;
  std::size_t best = 0;
  for (std::size_t k = 1; k < n; ++k) {
    if (masses[k] > masses[best]) best = k;
  }
  // The composite share is equal for every class, so the singleton argmax is
  // the pignistic argmax.
  return static_cast<std::uint8_t>(best);
}

}  // namespace

void TrainConfig::validate() const {
  if (lambda1 < 0.0 || lambda2 < 0.0 || lambda3 < 0.0) throw ContractError("lambdas must be >= 0");
  if (!(ema_decay >= 0.0 && ema_decay <= 1.0)) throw ContractError("ema_decay must lie in [0, 1]");
  if (!(learning_rate > 0.0)) throw ContractError("learning_rate must be > 0");
  if (!(epsilon > 0.0)) throw ContractError("epsilon must be > 0");
  if (labeled_batch < 1 || unlabeled_batch < 1) throw ContractError("batch sizes must be >= 1");
}

std::string to_string(Stage stage) { return stage == Stage::Pretrain ? "pretrain" : "self_train"; }

MixedBatch make_pretrain_batch(std::span<const Sample* const> labeled, const MixMask& mask) {
  if (labeled.empty()) throw ContractError("pre-training batch is empty");
  MixedBatch b{{}, {}, mask, {}, {}};
  const std::size_t k = labeled.size();
  for (std::size_t i = 0; i < k; ++i) {
    const Sample& s = *labeled[i];
    b.entries.push_back({s.volume, std::vector<std::uint8_t>(s.labels.data().begin(), s.labels.data().end()),
                         Group::Labeled});
    b.partner.push_back((i + 1) % k);
  }
  finish_batch(b);
  return b;
}

MixedBatch make_self_train_batch(std::span<const Sample* const> labeled, std::span<const VoxelGrid* const> unlabeled,
                                 std::span<const std::vector<std::uint8_t>> pseudo_labels, const MixMask& mask) {
  if (labeled.empty() || labeled.size() != unlabeled.size() || unlabeled.size() != pseudo_labels.size()) {
    throw ContractError("self-training batch needs equal, non-zero labeled and unlabeled counts");
  }
  MixedBatch b{{}, {}, mask, {}, {}};
  for (std::size_t i = 0; i < labeled.size(); ++i) {
    const Sample& s = *labeled[i];
    b.entries.push_back({s.volume, std::vector<std::uint8_t>(s.labels.data().begin(), s.labels.data().end()),
                         Group::Labeled});
    b.entries.push_back({*unlabeled[i], pseudo_labels[i], Group::Unlabeled});
    b.partner.push_back(2 * i + 1);
    b.partner.push_back(2 * i);
  }
  finish_batch(b);
  return b;
}

ObjectiveResult evaluate_objective(const ToyModel& model, const MixedBatch& batch, const ObjectiveSettings& settings,
                                   const VoxelWeights* frozen_weights, LossTerm root, bool with_gradient) {
  const std::size_t k = batch.entries.size();
  if (batch.partner.size() != k || batch.original_features.size() != k || batch.mixed_features.size() != k) {
    throw ContractError("mixed batch is incomplete");
  }
  if (frozen_weights && frozen_weights->size() != k) throw ShapeError("frozen weights do not match the batch");
  settings.schedule.validate();

  Tape t;
  const auto bound = model.bind(t, with_gradient);
  std::vector<Var> original(k), mixed(k);
  for (std::size_t j = 0; j < k; ++j) {
    original[j] = model.belief(t, bound, t.constant(batch.original_features[j]));
    mixed[j] = model.belief(t, bound, t.constant(batch.mixed_features[j]));
  }
  // Voxels of entry j outside the mask were carried by the mixed sample
  // whose partner is j.
  std::vector<std::size_t> carrier(k);
  for (std::size_t j = 0; j < k; ++j) carrier[batch.partner[j]] = j;

  const Var zero = t.constant(Matrix(1, 1, 0.0));
  Var labeled = zero, labeled_w = zero, unlabeled = zero, unlabeled_w = zero;
  ObjectiveResult result;
  result.weights.resize(k);
  const auto mask = batch.mask.values();

  for (std::size_t j = 0; j < k; ++j) {
    const auto& entry = batch.entries[j];
    const Var restored = autodiff::select_rows(t, mixed[j], mixed[carrier[j]], mask);
    const Var fused = autodiff::renormalize_rows(t, autodiff::ipaf_fuse(t, original[j], restored));
    const Var p_fused = autodiff::pignistic(t, fused);
    const Var p_orig = autodiff::pignistic(t, original[j]);
    const Var ce_fused = autodiff::cross_entropy_voxels(t, p_fused, entry.targets);

    Var supervised = autodiff::add(t, autodiff::soft_dice(t, p_fused, entry.targets),
                                   autodiff::mean(t, ce_fused));
    supervised = autodiff::add(t, supervised, autodiff::soft_dice(t, p_orig, entry.targets));
    supervised = autodiff::add(t, supervised, autodiff::mean(t, autodiff::cross_entropy_voxels(t, p_orig, entry.targets)));

    result.weights[j] = frozen_weights ? (*frozen_weights)[j]
                                       : voxel_weights(t.value(fused), entry.volume.extent(), settings);
    const Var weighted = autodiff::weighted_mean(t, ce_fused, result.weights[j]);

    if (entry.group == Group::Labeled) {
      labeled = autodiff::add(t, labeled, supervised);
      labeled_w = autodiff::add(t, labeled_w, weighted);
    } else {
      unlabeled = autodiff::add(t, unlabeled, supervised);
      unlabeled_w = autodiff::add(t, unlabeled_w, weighted);
    }
    result.fused.push_back(t.value(fused));
    result.original.push_back(t.value(original[j]));
  }

  Var objective = autodiff::add(t, labeled, unlabeled);
  objective = autodiff::add(t, objective, autodiff::scale(t, labeled_w, settings.lambda_labeled));
  objective = autodiff::add(t, objective, autodiff::scale(t, unlabeled_w, settings.lambda_unlabeled));

  result.losses = StepLosses{t.value(objective).scalar(), t.value(labeled).scalar(), t.value(labeled_w).scalar(),
                             t.value(unlabeled).scalar(), t.value(unlabeled_w).scalar()};
  if (with_gradient) {
    Var chosen = objective;
    switch (root) {
      case LossTerm::Objective: chosen = objective; break;
      case LossTerm::Labeled: chosen = labeled; break;
      case LossTerm::LabeledWeighted: chosen = labeled_w; break;
      case LossTerm::Unlabeled: chosen = unlabeled; break;
      case LossTerm::UnlabeledWeighted: chosen = unlabeled_w; break;
    }
    t.backward(chosen);
    result.gradient = t.requires_grad(chosen) ? model.gradient(t, bound)
                                              : std::vector<double>(model.parameter_count(), 0.0);
  }
  return result;
}

ToyModel initial_model(const TrainConfig& cfg, std::size_t num_classes) { return ToyModel(num_classes, cfg.seed); }

ToyModel pretrain(std::span<const Sample> labeled, const TrainConfig& cfg, const EpochCallback& on_epoch) {
  return pretrain(initial_model(cfg), labeled, cfg, on_epoch);
}

ToyModel pretrain(const ToyModel& init, std::span<const Sample> labeled, const TrainConfig& cfg,
                  const EpochCallback& on_epoch) {
  cfg.validate();
  if (labeled.size() < 2) throw ContractError("pre-training needs at least 2 labeled samples");
  ToyModel model = init;
  std::mt19937_64 rng(cfg.seed ^ kTrainStream);
  const std::size_t batch = std::min(cfg.labeled_batch, labeled.size());
  const std::size_t steps = (labeled.size() + batch - 1) / batch;
  const Extent3 extent = labeled.front().volume.extent();

  for (std::size_t h = 1; h <= cfg.pretrain_epochs; ++h) {
    const auto order = permutation(labeled.size(), rng);
    const ObjectiveSettings settings{cfg.lambda1, 0.0,
                                     WeightSchedule{cfg.epsilon, h, cfg.pretrain_epochs, cfg.rank_order},
                                     cfg.entropy_basis};
    StepLosses acc;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<const Sample*> members;
      for (std::size_t i = 0; i < batch; ++i) members.push_back(&labeled[order[(s * batch + i) % labeled.size()]]);
      const MixMask mask = generate_mask(extent, cfg.mask_zero_size, rng());
      const MixedBatch b = make_pretrain_batch(members, mask);
      const ObjectiveResult r = evaluate_objective(model, b, settings);
      gradient_step(model, r.gradient, cfg.learning_rate);
      check_finite(r.losses, model.parameters(), Stage::Pretrain, h, s);
      accumulate(acc, r.losses);
    }
    if (on_epoch) on_epoch(EpochRecord{Stage::Pretrain, h, averaged(acc, steps)});
  }
  return model;
}

void check_finite(const StepLosses& l, std::span<const double> params, Stage stage, std::size_t epoch,
                  std::size_t step) {
  bool ok = std::isfinite(l.objective);
  for (double p : params) ok = ok && std::isfinite(p);
  if (ok) return;
  std::ostringstream os;
  os << to_string(stage) << " diverged at epoch " << epoch << " step " << step << ": objective=" << l.objective
     << " labeled=" << l.labeled << " labeled_weighted=" << l.labeled_weighted << " unlabeled=" << l.unlabeled
     << " unlabeled_weighted=" << l.unlabeled_weighted;
  throw TrainingError(os.str());
}

void ema_update(std::span<double> teacher, std::span<const double> student, double alpha) {
  if (teacher.size() != student.size()) throw ShapeError("ema_update: parameter counts differ");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ContractError("ema decay must lie in [0, 1]");
  for (std::size_t i = 0; i < teacher.size(); ++i) teacher[i] = alpha * teacher[i] + (1.0 - alpha) * student[i];
}

std::vector<std::uint8_t> predict_labels(const ToyModel& model, const VoxelGrid& volume) {
  const Matrix m = model.predict_belief(volume);
  std::vector<std::uint8_t> out(m.rows);
  for (std::size_t r = 0; r < m.rows; ++r) out[r] = argmax_pignistic(m.row(r));
  return out;
}

TeacherStudent self_train(const ToyModel& init, const SyntheticDataset& dataset, const TrainConfig& cfg,
                          const EpochCallback& on_epoch) {
  cfg.validate();
  if (dataset.labeled.empty() || dataset.unlabeled.empty()) {
    throw ContractError("self-training needs labeled and unlabeled samples");
  }
  TeacherStudent ts{init, init};
  std::mt19937_64 rng(cfg.seed ^ kSelfTrainStream);
  const std::size_t pairs = cfg.unlabeled_batch;
  const std::size_t n_unlabeled = dataset.unlabeled.size();
  const std::size_t n_labeled = dataset.labeled.size();
  const std::size_t steps = (n_unlabeled + pairs - 1) / pairs;
  const Extent3 extent = dataset.labeled.front().volume.extent();

  for (std::size_t h = 1; h <= cfg.self_train_epochs; ++h) {
    const auto order_u = permutation(n_unlabeled, rng);
    const auto order_l = permutation(n_labeled, rng);
    const ObjectiveSettings settings{cfg.lambda2, cfg.lambda3,
                                     WeightSchedule{cfg.epsilon, h, cfg.self_train_epochs, cfg.rank_order},
                                     cfg.entropy_basis};
    StepLosses acc;
    for (std::size_t s = 0; s < steps; ++s) {
      std::vector<const Sample*> lab;
      std::vector<const VoxelGrid*> unl;
      std::vector<std::vector<std::uint8_t>> pseudo;
      for (std::size_t i = 0; i < pairs; ++i) {
        lab.push_back(&dataset.labeled[order_l[(s * pairs + i) % n_labeled]]);
        unl.push_back(&dataset.unlabeled[order_u[(s * pairs + i) % n_unlabeled]].volume);
        pseudo.push_back(predict_labels(ts.teacher, *unl.back()));
      }
      const MixMask mask = generate_mask(extent, cfg.mask_zero_size, rng());
      const MixedBatch b = make_self_train_batch(lab, unl, pseudo, mask);
      const ObjectiveResult r = evaluate_objective(ts.student, b, settings);
      gradient_step(ts.student, r.gradient, cfg.learning_rate);
      check_finite(r.losses, ts.student.parameters(), Stage::SelfTrain, h, s);
      ema_update(ts.teacher.parameters(), ts.student.parameters(), cfg.ema_decay);
      accumulate(acc, r.losses);
    }
    if (on_epoch) on_epoch(EpochRecord{Stage::SelfTrain, h, averaged(acc, steps)});
  }
  return ts;
}

EvalMetrics evaluate(const ToyModel& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ContractError("evaluate needs at least one sample");
  EvalMetrics m;
  for (const auto& s : samples) {
    const auto pred = predict_labels(model, s.volume);
    const auto o = overlap(pred, s.labels.data());
    m.dice += o.dice;
    m.jaccard += o.jaccard;
  }
  m.dice /= static_cast<double>(samples.size());
  m.jaccard /= static_cast<double>(samples.size());
  return m;
}

GradCheckResult compare_with_finite_differences(std::span<const double> theta, std::span<const double> analytic,
                                                const std::function<double(std::span<const double>)>& f,
                                                double step, double floor) {
  if (theta.size() != analytic.size()) throw ShapeError("gradient and parameter counts differ");
  GradCheckResult out;
  std::vector<double> probe(theta.begin(), theta.end());
  for (std::size_t i = 0; i < theta.size(); ++i) {
    probe[i] = theta[i] + step;
    const double up = f(probe);
    probe[i] = theta[i] - step;
    const double down = f(probe);
    probe[i] = theta[i];
    const double numeric = (up - down) / (2.0 * step);
    const double abs_err = std::abs(numeric - analytic[i]);
    const double rel_err = abs_err / std::max({std::abs(numeric), std::abs(analytic[i]), floor});
    out.max_absolute_error = std::max(out.max_absolute_error, abs_err);
    if (rel_err > out.max_relative_error) {
      out.max_relative_error = rel_err;
      out.worst_index = i;
    }
  }
  return out;
}

GradCheckResult grad_check(const ToyModel& model, const MixedBatch& batch, const ObjectiveSettings& settings,
                           LossTerm term, double step) {
  const ObjectiveResult base = evaluate_objective(model, batch, settings, nullptr, term, true);
  auto pick = [term](const StepLosses& l) {
    switch (term) {
      case LossTerm::Labeled: return l.labeled;
      case LossTerm::LabeledWeighted: return l.labeled_weighted;
      case LossTerm::Unlabeled: return l.unlabeled;
      case LossTerm::UnlabeledWeighted: return l.unlabeled_weighted;
      case LossTerm::Objective: break;
    }
    return l.objective;
  };
  auto f = [&](std::span<const double> theta) {
    const ToyModel probe(model.num_classes(), std::vector<double>(theta.begin(), theta.end()));
    return pick(evaluate_objective(probe, batch, settings, &base.weights, term, false).losses);
  };
  return compare_with_finite_differences(model.parameters(), base.gradient, f, step);
}

ToyRunResult run_toy(const ToyRunConfig& cfg, const EpochCallback& on_epoch) {
  cfg.train.validate();
  const Extent3 extent{cfg.volume_size, cfg.volume_size, cfg.volume_size};
  const SyntheticDataset data = generate_synthetic(cfg.labeled + cfg.unlabeled, cfg.train.seed, cfg.labeled, extent);
  const std::vector<Sample> test = generate_samples(cfg.test, cfg.train.seed ^ kTestStream, extent);

  std::vector<EpochRecord> history;
  auto record = [&](const EpochRecord& r) {
    history.push_back(r);
    if (on_epoch) on_epoch(r);
  };
  ToyModel pre = pretrain(data.labeled, cfg.train, record);
  TeacherStudent ts = self_train(pre, data, cfg.train, record);
  ToyRunResult out{pre, ts.student, ts.teacher, evaluate(pre, test), evaluate(ts.student, test),
                   evaluate(ts.teacher, test), std::move(history)};
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != v.size() || !std::isfinite(out)) throw ContractError("config: '" + key + "' expects a number");
  return out;
}

std::uint64_t parse_uint(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  unsigned long long out = 0;
  try {
    if (!v.empty() && v[0] != '-') out = std::stoull(v, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used == 0 || used != v.size()) throw ContractError("config: '" + key + "' expects a non-negative integer");
  return out;
}

Extent3 parse_extent(const std::string& key, const std::string& v) {
  Extent3 e{};
  std::stringstream ss(v);
  std::string part;
  std::size_t i = 0;
  while (std::getline(ss, part, ',')) {
    if (i >= 3) throw ContractError("config: '" + key + "' expects w,h,l");
    e[i++] = static_cast<std::size_t>(parse_uint(key, trim(part)));
  }
  if (i != 3) throw ContractError("config: '" + key + "' expects w,h,l");
  return e;
}

}  // namespace

ToyRunConfig parse_toy_config(const std::string& text, ToyRunConfig base) {
  ToyRunConfig c = std::move(base);
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ContractError("config line " + std::to_string(lineno) + ": expected key=value");
    const std::string key = trim(line.substr(0, eq));
    const std::string val = trim(line.substr(eq + 1));
    auto& t = c.train;
    if (key == "lambda1") t.lambda1 = parse_double(key, val);
    else if (key == "lambda2") t.lambda2 = parse_double(key, val);
    else if (key == "lambda3") t.lambda3 = parse_double(key, val);
    else if (key == "ema_decay") t.ema_decay = parse_double(key, val);
    else if (key == "lr" || key == "learning_rate") t.learning_rate = parse_double(key, val);
    else if (key == "pretrain_epochs") t.pretrain_epochs = parse_uint(key, val);
    else if (key == "self_train_epochs") t.self_train_epochs = parse_uint(key, val);
    else if (key == "labeled_batch") t.labeled_batch = parse_uint(key, val);
    else if (key == "unlabeled_batch") t.unlabeled_batch = parse_uint(key, val);
    else if (key == "seed") t.seed = parse_uint(key, val);
    else if (key == "epsilon") t.epsilon = parse_double(key, val);
    else if (key == "rank_order") {
      if (val == "ascending") t.rank_order = RankOrder::AscendingUncertainty;
      else if (val == "descending") t.rank_order = RankOrder::DescendingUncertainty;
      else throw ContractError("config: rank_order must be ascending or descending");
    } else if (key == "mask_zero_size") t.mask_zero_size = parse_extent(key, val);
    else if (key == "entropy") {
      if (val == "normalized") t.entropy_basis = EntropyBasis::NormalizedSingletons;
      else if (val == "raw") t.entropy_basis = EntropyBasis::RawSingletons;
      else throw ContractError("config: entropy must be normalized or raw");
    } else if (key == "labeled") c.labeled = parse_uint(key, val);
    else if (key == "unlabeled") c.unlabeled = parse_uint(key, val);
    else if (key == "test") c.test = parse_uint(key, val);
    else if (key == "volume_size") c.volume_size = parse_uint(key, val);
    else throw ContractError("config line " + std::to_string(lineno) + ": unknown key '" + key + "'");
  }
  c.train.validate();
  if (c.labeled < 2 || c.unlabeled < 1 || c.test < 1) {
    throw ContractError("config: need labeled >= 2, unlabeled >= 1 and test >= 1");
  }
  if (c.volume_size < 2) throw ContractError("config: volume_size must be >= 2");
  for (auto d : c.train.mask_zero_size) {
    if (d > c.volume_size) throw ContractError("config: mask_zero_size exceeds volume_size");
  }
  return c;
}

}  // namespace evfuse
