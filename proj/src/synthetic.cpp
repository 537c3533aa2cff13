#include "evfuse/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "evfuse/errors.hpp"

namespace evfuse {

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double uniform(std::mt19937_64& rng, double lo, double hi) { return lo + (hi - lo) * unit_uniform(rng); }

// Box-Muller on the engine's raw output keeps draws identical across
// standard library implementations.
double standard_normal(std::mt19937_64& rng) {
  const double u1 = 1.0 - unit_uniform(rng);
  const double u2 = unit_uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

Sample render_ellipsoid(Extent3 extent, const Ellipsoid& shape, std::uint64_t noise_seed) {
  const std::size_t n = checked_element_count(extent);
  std::mt19937_64 rng(noise_seed);
  std::vector<float> volume(n);
  std::vector<std::uint8_t> labels(n);
  for (std::size_t x = 0; x < extent[0]; ++x) {
    for (std::size_t y = 0; y < extent[1]; ++y) {
      for (std::size_t z = 0; z < extent[2]; ++z) {
        const std::size_t v = (x * extent[1] + y) * extent[2] + z;
        const std::array<double, 3> p{static_cast<double>(x), static_cast<double>(y), static_cast<double>(z)};
        double r2 = 0.0;
        for (int d = 0; d < 3; ++d) {
          const double q = (p[d] - shape.center[d]) / shape.radii[d];
          r2 += q * q;
        }
        const bool inside = r2 <= 1.0;
        labels[v] = inside ? 1 : 0;
        volume[v] = static_cast<float>((inside ? shape.intensity : 0.0) + kBackgroundNoise * standard_normal(rng));
      }
    }
  }
  return Sample{VoxelGrid({extent[0], extent[1], extent[2]}, std::move(volume)),
                LabelGrid(extent, std::move(labels), 2)};
}

std::vector<Sample> generate_samples(std::size_t count, std::uint64_t seed, Extent3 extent) {
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Ellipsoid e;
    for (int d = 0; d < 3; ++d) {
      const double limit = std::max(1.0, std::min(7.0, (static_cast<double>(extent[d]) - 1.0) / 2.0));
      e.radii[d] = uniform(rng, std::min(3.0, limit), limit);
      e.center[d] = uniform(rng, e.radii[d], static_cast<double>(extent[d]) - 1.0 - e.radii[d]);
    }
    e.intensity = uniform(rng, 0.9, 1.1);
    out.push_back(render_ellipsoid(extent, e, rng()));
  }
  return out;
}

SyntheticDataset generate_synthetic(std::size_t count, std::uint64_t seed, std::size_t labeled_count,
                                    Extent3 extent) {
  if (count < 2) throw ContractError("generate_synthetic needs count >= 2");
  if (labeled_count > count) throw ContractError("labeled_count exceeds count");
  auto samples = generate_samples(count, seed, extent);
  SyntheticDataset ds;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    (i < labeled_count ? ds.labeled : ds.unlabeled).push_back(std::move(samples[i]));
  }
  return ds;
}

}  // namespace evfuse
