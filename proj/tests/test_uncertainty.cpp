#include <doctest.h>

#include <cmath>

#include "evfuse/errors.hpp"
#include "evfuse/reference.hpp"
#include "evfuse/uncertainty.hpp"
#include "helpers.hpp"

using namespace evfuse;

TEST_CASE("certain assignments carry no uncertainty") {
  CHECK(fused_uncertainty(BeliefAssignment::normalized({0.3, 0.7}, 0.0)) == 0.0);
  CHECK(fused_uncertainty(BeliefAssignment::normalized({0.6, 0.0, 0.0}, 0.4)) == 0.0);
  CHECK(fused_uncertainty(BeliefAssignment::one_hot(4, 2)) == 0.0);
}

TEST_CASE("uniform singletons give one bit times the composite") {
  const auto b = BeliefAssignment::normalized({0.35, 0.35}, 0.3);
  CHECK(fused_uncertainty(b) == doctest::Approx(0.3).epsilon(1e-12));
}

TEST_CASE("vacuous assignment has no singleton mass") {
  CHECK(fused_uncertainty(BeliefAssignment::vacuous(3)) == 0.0);
}

TEST_CASE("raw basis uses the singleton masses directly") {
  const auto b = BeliefAssignment::normalized({0.35, 0.35}, 0.3);
  const double raw = fused_uncertainty(b, EntropyBasis::RawSingletons);
  CHECK(raw == doctest::Approx(-0.3 * 2 * 0.35 * std::log2(0.35)));
  std::mt19937_64 rng(1);
  for (int i = 0; i < 200; ++i) {
    const auto m = oracle::random_assignment(rng, 3);
    const auto a = BeliefAssignment::normalized({m[0], m[1], m[2]}, m[3]);
    CHECK(fused_uncertainty(a, EntropyBasis::RawSingletons) == doctest::Approx(oracle::uncertainty(m, false)));
  }
}

TEST_CASE("bounds hold for random assignments") {
  std::mt19937_64 rng(2);
  for (int i = 0; i < 2000; ++i) {
    const std::size_t n = 2 + static_cast<std::size_t>(i % 5);
    const auto m = oracle::random_assignment(rng, n);
    const auto b = BeliefAssignment::normalized({m.begin(), m.end() - 1}, m.back());
    const double u = fused_uncertainty(b);
    CHECK(u >= 0.0);
    CHECK(u <= b.composite() * std::log2(static_cast<double>(n)) + 1e-12);
    CHECK(u == doctest::Approx(oracle::uncertainty(m)).epsilon(1e-12));
  }
}

TEST_CASE("unnormalized input is rejected") {
  CHECK_THROWS_AS(fused_uncertainty(BeliefAssignment::unnormalized({0.1, 0.1}, 0.1)), ContractError);
  const BeliefVolume un(VoxelGrid({1, 1, 1, 3}, {0.1f, 0.1f, 0.1f}), false);
  CHECK_THROWS_AS(uncertainty_volume(un), ContractError);
}

TEST_CASE("all-certain volume gives zeros") {
  std::vector<float> data;
  for (std::size_t v = 0; v < 27; ++v) {
    data.insert(data.end(), {0.5f, 0.25f, 0.25f, 0.0f});
  }
  const auto u = uncertainty_volume(BeliefVolume(VoxelGrid({3, 3, 3, 4}, data), true));
  for (float x : u.data()) CHECK(x == 0.0f);
}

TEST_CASE("uniform singletons with composite c give c log2 N everywhere") {
  const float c = 0.4f;
  std::vector<float> data;
  for (std::size_t v = 0; v < 8; ++v) data.insert(data.end(), {0.2f, 0.2f, 0.2f, c});
  const auto u = uncertainty_volume(BeliefVolume(VoxelGrid({2, 2, 2, 4}, data), true));
  for (float x : u.data()) CHECK(x == doctest::Approx(c * std::log2(3.0)).epsilon(1e-6));
}

TEST_CASE("random 8^3 volume matches the scalar oracle") {
  std::mt19937_64 rng(3);
  const auto b = testing::random_belief(rng, {8, 8, 8}, 3);
  for (auto basis : {EntropyBasis::NormalizedSingletons, EntropyBasis::RawSingletons}) {
    const auto u = uncertainty_volume(b, basis);
    CHECK(u.extent() == Extent3{8, 8, 8});
    for (std::size_t v = 0; v < u.voxel_count(); ++v) {
      const double want = oracle::uncertainty(testing::as_double(b.voxel(v)), basis == EntropyBasis::NormalizedSingletons);
      CHECK(std::abs(u.data()[v] - want) <= 1e-6);
    }
    CHECK(u.grid() == reference::uncertainty_volume(b, basis).grid());
  }
}

TEST_CASE("uncertainty volumes reject negative or badly shaped values") {
  CHECK_THROWS_AS(UncertaintyVolume(VoxelGrid({1, 1, 1}, {-0.1f})), ContractError);
  CHECK_THROWS_AS(UncertaintyVolume(VoxelGrid::zeros({1, 1, 1, 2})), ShapeError);
}
