#include "evfuse/evidence.hpp"

#include <cmath>
#include <cstdint>
#include <string>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse {

namespace {

constexpr double kConflictFloor = 1e-12;

void check_masses(std::span<const double> singleton, double composite, bool normalized) {
  if (singleton.size() < 2) throw ContractError("belief assignment needs at least 2 classes");
  double total = composite;
  if (!(composite >= 0.0) || !std::isfinite(composite)) throw ContractError("composite mass must be finite and >= 0");
  for (double m : singleton) {
    if (!(m >= 0.0) || !std::isfinite(m)) throw ContractError("singleton masses must be finite and >= 0");
    total += m;
  }
  if (normalized && std::abs(total - 1.0) > kMassTolerance) {
    throw ContractError("normalized assignment has total mass " + std::to_string(total));
  }
  if (!normalized && total > 1.0 + kMassTolerance) {
    throw ContractError("assignment total mass " + std::to_string(total) + " exceeds 1");
  }
}

// 0 = fine, 1 = negative/invalid mass, 2 = total out of range.
int classify_voxel(std::span<const float> m, bool normalized) {
  double total = 0.0;
  for (float v : m) {
    if (!(v >= 0.0f)) return 1;
    total += v;
  }
  if (normalized) return std::abs(total - 1.0) <= kMassTolerance ? 0 : 2;
  return total <= 1.0 + kMassTolerance ? 0 : 2;
}

}  // namespace

BeliefAssignment::BeliefAssignment(std::vector<double> singleton, double composite, bool normalized)
    : singleton_(std::move(singleton)), composite_(composite), normalized_(normalized) {
  check_masses(singleton_, composite_, normalized_);
}

BeliefAssignment BeliefAssignment::normalized(std::vector<double> singleton, double composite) {
  return BeliefAssignment(std::move(singleton), composite, true);
}

BeliefAssignment BeliefAssignment::unnormalized(std::vector<double> singleton, double composite) {
  return BeliefAssignment(std::move(singleton), composite, false);
}

BeliefAssignment BeliefAssignment::vacuous(std::size_t num_classes) {
  return normalized(std::vector<double>(num_classes, 0.0), 1.0);
}

BeliefAssignment BeliefAssignment::one_hot(std::size_t num_classes, std::size_t cls) {
  if (cls >= num_classes) throw ContractError("one-hot class index out of range");
  std::vector<double> s(num_classes, 0.0);
  s[cls] = 1.0;
  return normalized(std::move(s), 0.0);
}

double BeliefAssignment::total() const noexcept {
  double t = composite_;
  for (double m : singleton_) t += m;
  return t;
}

std::vector<double> BeliefAssignment::masses() const {
  std::vector<double> m(singleton_);
  m.push_back(composite_);
  return m;
}

BeliefVolume::BeliefVolume(VoxelGrid masses, bool normalized)
    : masses_(std::move(masses)), normalized_(normalized) {
  if (masses_.rank() != 4 || masses_.channels() < 3) {
    throw ShapeError("belief volume must have shape (W, H, L, N+1) with N >= 2");
  }
  const auto n = static_cast<std::int64_t>(masses_.voxel_count());
  int worst = 0;
#pragma omp parallel for schedule(static) reduction(max : worst)
  for (std::int64_t v = 0; v < n; ++v) {
    const int c = classify_voxel(masses_.voxel(static_cast<std::size_t>(v)), normalized_);
    if (c > worst) worst = c;
  }
  if (worst == 1) throw ContractError("belief volume contains a negative mass");
  if (worst == 2) {
    throw ContractError(normalized_ ? "belief volume voxel does not sum to 1"
                                    : "belief volume voxel exceeds total mass 1");
  }
}

BeliefVolume BeliefVolume::from_grid(VoxelGrid masses) {
  try {
    return BeliefVolume(masses, true);
  } catch (const ContractError&) {
    return BeliefVolume(std::move(masses), false);
  }
}

BeliefAssignment BeliefVolume::at(std::size_t v) const {
  const auto m = voxel(v);
  const std::size_t n = num_classes();
  std::vector<double> s(m.begin(), m.begin() + static_cast<std::ptrdiff_t>(n));
  return normalized_ ? BeliefAssignment::normalized(std::move(s), m[n])
                     : BeliefAssignment::unnormalized(std::move(s), m[n]);
}

BeliefVolume evidence_to_belief(const VoxelGrid& logits) {
  if (logits.rank() != 4) throw ShapeError("logits must have shape (W, H, L, N)");
  const std::size_t n = logits.channels();
  if (n < 2) throw ContractError("evidence_to_belief needs N >= 2 classes");
  const Extent3 e = logits.extent();
  const auto voxels = static_cast<std::int64_t>(logits.voxel_count());
  std::vector<float> out(static_cast<std::size_t>(voxels) * (n + 1));

#pragma omp parallel
  {
    std::vector<double> evidence(n);
#pragma omp for schedule(static)
    for (std::int64_t v = 0; v < voxels; ++v) {
      const auto in = logits.voxel(static_cast<std::size_t>(v));
      for (std::size_t k = 0; k < n; ++k) evidence[k] = kernel::softplus(static_cast<double>(in[k]));
      kernel::dirichlet_masses<double, float>(
          evidence, std::span<float>(out).subspan(static_cast<std::size_t>(v) * (n + 1), n + 1));
    }
  }
  return BeliefVolume(VoxelGrid({e[0], e[1], e[2], n + 1}, std::move(out)), true);
}

std::vector<double> belief_to_probability(const BeliefAssignment& b) {
  if (!b.is_normalized()) throw ContractError("belief_to_probability needs a normalized assignment");
  const auto m = b.masses();
  std::vector<double> p(b.num_classes());
  kernel::pignistic<double, double>(m, p);
  return p;
}

VoxelGrid belief_to_probability(const BeliefVolume& v) {
  if (!v.is_normalized()) throw ContractError("belief_to_probability needs a normalized volume");
  const std::size_t n = v.num_classes();
  const Extent3 e = v.extent();
  const auto voxels = static_cast<std::int64_t>(v.voxel_count());
  std::vector<float> out(static_cast<std::size_t>(voxels) * n);
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < voxels; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    kernel::pignistic<float, float>(v.voxel(idx), std::span<float>(out).subspan(idx * n, n));
  }
  return VoxelGrid({e[0], e[1], e[2], n}, std::move(out));
}

BeliefAssignment renormalize(const BeliefAssignment& b) {
  const double total = b.total();
  if (total <= kConflictFloor) throw TotalConflictError("assignment carries no mass to renormalize");
  std::vector<double> s(b.singleton().begin(), b.singleton().end());
  for (double& m : s) m /= total;
  return BeliefAssignment::normalized(std::move(s), b.composite() / total);
}

BeliefVolume renormalize(const BeliefVolume& v) {
  const std::size_t k = v.num_classes() + 1;
  const Extent3 e = v.extent();
  const auto voxels = static_cast<std::int64_t>(v.voxel_count());
  std::vector<float> out(v.grid().data().begin(), v.grid().data().end());
  int conflict = 0;
#pragma omp parallel for schedule(static) reduction(max : conflict)
  for (std::int64_t i = 0; i < voxels; ++i) {
    auto m = std::span<float>(out).subspan(static_cast<std::size_t>(i) * k, k);
    double total = 0.0;
    for (float x : m) total += x;
    if (total <= kConflictFloor) {
      conflict = 1;
      continue;
    }
    for (float& x : m) x = static_cast<float>(x / total);
  }
  if (conflict) throw TotalConflictError("a voxel carries no mass to renormalize");
  return BeliefVolume(VoxelGrid({e[0], e[1], e[2], k}, std::move(out)), true);
}

}  // namespace evfuse
