#include <doctest.h>

#include <cmath>

#include "evfuse/errors.hpp"
#include "evfuse/reference.hpp"
#include "evfuse/vwal.hpp"
#include "helpers.hpp"

using namespace evfuse;

namespace {

UncertaintyVolume constant_u(Extent3 e, float value) {
  return UncertaintyVolume(VoxelGrid::filled({e[0], e[1], e[2]}, value));
}

UncertaintyVolume random_u(std::mt19937_64& rng, Extent3 e) {
  return UncertaintyVolume(testing::random_grid(rng, {e[0], e[1], e[2]}, 0.0, 1.5));
}

}  // namespace

TEST_CASE("all ties rank in linear index order") {
  for (auto order : {RankOrder::AscendingUncertainty, RankOrder::DescendingUncertainty}) {
    const auto r = rank_voxels(constant_u({2, 3, 4}, 0.5f), order);
    for (std::size_t v = 0; v < r.voxel_count(); ++v) CHECK(r[v] == v + 1);
  }
}

TEST_CASE("two-voxel ordering in both directions") {
  const UncertaintyVolume u(VoxelGrid({2, 1, 1}, {0.9f, 0.1f}));
  const auto desc = rank_voxels(u, RankOrder::DescendingUncertainty);
  CHECK(desc[0] == 1);
  CHECK(desc[1] == 2);
  const auto asc = rank_voxels(u, RankOrder::AscendingUncertainty);
  CHECK(asc[0] == 2);
  CHECK(asc[1] == 1);
}

TEST_CASE("ranks match a sort-based oracle") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 5; ++trial) {
    auto g = testing::random_grid(rng, {8, 8, 8}, 0.0, 1.0);
    // Quantize so ties occur.
    std::vector<float> q(g.data().begin(), g.data().end());
    for (auto& x : q) x = std::round(x * 20.0f) / 20.0f;
    const UncertaintyVolume u(VoxelGrid({8, 8, 8}, q));
    for (bool asc : {true, false}) {
      const auto r = rank_voxels(u, asc ? RankOrder::AscendingUncertainty : RankOrder::DescendingUncertainty);
      const auto want = oracle::ranks(testing::as_double(u.data()), asc);
      CHECK(std::equal(want.begin(), want.end(), r.ranks().begin()));
    }
  }
}

TEST_CASE("rank maps must be permutations") {
  CHECK_THROWS_AS(RankMap({1, 1, 2}, {1, 1}), ContractError);
  CHECK_THROWS_AS(RankMap({1, 1, 2}, {0, 1}), ContractError);
  CHECK_THROWS_AS(RankMap({1, 1, 2}, {1}), ShapeError);
  CHECK_NOTHROW(RankMap({1, 1, 2}, {2, 1}));
}

TEST_CASE("midpoint epoch gives half the ceiling") {
  for (double eps : {1.0, 0.3}) {
    const WeightSchedule s{eps, 5, 10};
    for (std::size_t ord = 1; ord <= 7; ++ord) CHECK(dynamic_weight(s, ord, 7) == doctest::Approx(eps / 2).epsilon(1e-12));
  }
}

TEST_CASE("final epoch extremes") {
  const WeightSchedule s{1.0, 10, 10};
  CHECK(dynamic_weight(s, 1000, 1000) == doctest::Approx(0.7311).epsilon(1e-4));
  CHECK(dynamic_weight(s, 1, 1000000) == doctest::Approx(0.2689).epsilon(1e-4));
}

TEST_CASE("weights follow the closed form") {
  for (std::size_t h = 1; h <= 6; ++h) {
    const WeightSchedule s{0.7, h, 6};
    for (std::size_t ord = 1; ord <= 9; ++ord) {
      CHECK(dynamic_weight(s, ord, 9) == doctest::Approx(oracle::weight(0.7, h, 6, ord, 9)).epsilon(1e-12));
    }
  }
}

TEST_CASE("weights stay inside (0, epsilon) and flip monotonicity at the midpoint") {
  const std::size_t z = 50;
  for (std::size_t h = 1; h <= 12; ++h) {
    const WeightSchedule s{2.0, h, 12};
    double prev = dynamic_weight(s, 1, z);
    for (std::size_t ord = 1; ord <= z; ++ord) {
      const double w = dynamic_weight(s, ord, z);
      CHECK(w > 0.0);
      CHECK(w < 2.0);
      if (ord > 1) {
        if (h < 6) CHECK(w < prev);
        if (h == 6) CHECK(w == prev);
        if (h > 6) CHECK(w > prev);
      }
      prev = w;
    }
  }
}

TEST_CASE("most uncertain voxel weight is non-decreasing over epochs by default") {
  std::mt19937_64 rng(2);
  const auto u = random_u(rng, {4, 4, 4});
  const auto it = std::max_element(u.data().begin(), u.data().end());
  const auto worst = static_cast<std::size_t>(it - u.data().begin());
  double prev = 0.0;
  for (std::size_t h = 1; h <= 20; ++h) {
    const auto w = weight_volume(u, WeightSchedule{1.0, h, 20});
    CHECK(w[worst] >= prev);
    prev = w[worst];
  }
}

TEST_CASE("schedule and ordinal validation") {
  CHECK_THROWS_AS(dynamic_weight(WeightSchedule{1.0, 0, 5}, 1, 4), ContractError);
  CHECK_THROWS_AS(dynamic_weight(WeightSchedule{1.0, 6, 5}, 1, 4), ContractError);
  CHECK_THROWS_AS(dynamic_weight(WeightSchedule{0.0, 1, 5}, 1, 4), ContractError);
  CHECK_THROWS_AS(dynamic_weight(WeightSchedule{1.0, 1, 5}, 0, 4), ContractError);
  CHECK_THROWS_AS(dynamic_weight(WeightSchedule{1.0, 1, 5}, 5, 4), ContractError);
}

TEST_CASE("weighted loss examples") {
  std::mt19937_64 rng(3);
  const auto u = random_u(rng, {3, 3, 3});
  CHECK(weighted_loss(VoxelGrid::zeros({3, 3, 3}), u, WeightSchedule{1.0, 2, 7}) == 0.0);
  CHECK(weighted_loss(VoxelGrid::filled({3, 3, 3}, 1.5f), u, WeightSchedule{0.8, 5, 10}) ==
        doctest::Approx(0.4 * 1.5).epsilon(1e-12));
  CHECK_THROWS_AS(weighted_loss(VoxelGrid::zeros({3, 3, 2}), u, WeightSchedule{}), ShapeError);
}

TEST_CASE("weighted loss matches the scalar oracle") {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    const auto u = random_u(rng, {4, 4, 4});
    const auto loss = testing::random_grid(rng, {4, 4, 4}, 0.0, 3.0);
    for (bool asc : {true, false}) {
      const WeightSchedule s{1.0, static_cast<std::size_t>(trial + 1), 10,
                             asc ? RankOrder::AscendingUncertainty : RankOrder::DescendingUncertainty};
      const double want = oracle::weighted_loss(testing::as_double(loss.data()), testing::as_double(u.data()), 1.0,
                                                trial + 1, 10, asc);
      CHECK(std::abs(weighted_loss(loss, u, s) - want) <= 1e-6);
      CHECK(weighted_loss(loss, u, s) == reference::weighted_loss(loss, u, s));
    }
  }
}

TEST_CASE("group loss sums per-sample weighted losses") {
  std::mt19937_64 rng(5);
  std::vector<VoxelGrid> losses;
  std::vector<UncertaintyVolume> us;
  double want = 0.0;
  const WeightSchedule s{1.0, 3, 4};
  for (int k = 0; k < 3; ++k) {
    losses.push_back(testing::random_grid(rng, {2, 3, 4}, 0.0, 1.0));
    us.push_back(random_u(rng, {2, 3, 4}));
    want += weighted_loss(losses.back(), us.back(), s);
  }
  CHECK(weighted_loss(losses, us, s) == want);
  CHECK_THROWS_AS(weighted_loss(std::span(losses).first(2), us, s), ShapeError);
}

TEST_CASE("weight volume uses per-voxel ranks") {
  const UncertaintyVolume u(VoxelGrid({1, 1, 3}, {0.5f, 0.1f, 0.9f}));
  const WeightSchedule s{1.0, 4, 4};
  const auto w = weight_volume(u, s);
  CHECK(w[1] == doctest::Approx(dynamic_weight(s, 1, 3)).epsilon(1e-6));
  CHECK(w[0] == doctest::Approx(dynamic_weight(s, 2, 3)).epsilon(1e-6));
  CHECK(w[2] == doctest::Approx(dynamic_weight(s, 3, 3)).epsilon(1e-6));
}
