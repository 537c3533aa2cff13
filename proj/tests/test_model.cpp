#include <doctest.h>

#include <cmath>

#include "evfuse/errors.hpp"
#include "evfuse/metrics.hpp"
#include "evfuse/model.hpp"
#include "evfuse/npy.hpp"
#include "evfuse/synthetic.hpp"
#include "helpers.hpp"

using namespace evfuse;

TEST_CASE("feature matrix layout") {
  const VoxelGrid v({2, 3, 4}, [] {
    std::vector<float> d(24);
    for (std::size_t i = 0; i < 24; ++i) d[i] = static_cast<float>(i);
    return d;
  }());
  const auto f = voxel_features(v);
  CHECK(f.rows == 24);
  CHECK(f.cols == kFeatureCount);
  // voxel (1, 1, 2) has linear index 18
  const auto r = f.row(18);
  CHECK(r[0] == 18.0);
  CHECK(r[1] == 6.0);   // x - 1
  CHECK(r[2] == 18.0);  // x + 1 clamped
  CHECK(r[3] == 14.0);  // y - 1
  CHECK(r[4] == 22.0);  // y + 1
  CHECK(r[5] == 17.0);  // z - 1
  CHECK(r[6] == 19.0);  // z + 1
  CHECK(r[7] == doctest::Approx(1.0));
  CHECK(r[8] == doctest::Approx(0.0));
  CHECK(r[9] == doctest::Approx(2.0 * 2 / 3 - 1));
}

TEST_CASE("model parameter layout and determinism") {
  const ToyModel a(2, 7);
  const ToyModel b(2, 7);
  const ToyModel c(2, 8);
  CHECK(a == b);
  CHECK_FALSE(a == c);
  CHECK(a.parameter_count() == 10 * 16 + 16 + 16 * 16 + 16 + 16 * 2 + 2);
  const auto layers = a.layers();
  CHECK(layers[2].in == 16);
  CHECK(layers[2].out == 2);
  CHECK(layers[1].weight_offset == 176);
  for (std::size_t k = 0; k < 3; ++k) {
    for (std::size_t i = 0; i < layers[k].out; ++i) CHECK(a.parameters()[layers[k].bias_offset + i] == 0.0);
  }
  CHECK_THROWS_AS(ToyModel(2, std::vector<double>(10)), ShapeError);
}

TEST_CASE("predicted beliefs are normalized masses") {
  std::mt19937_64 rng(1);
  const ToyModel m(3, 2);
  const auto v = testing::random_grid(rng, {3, 4, 5});
  const auto b = m.predict_belief(v);
  CHECK(b.rows == 60);
  CHECK(b.cols == 4);
  for (std::size_t r = 0; r < b.rows; ++r) {
    double s = 0.0;
    for (double x : b.row(r)) {
      CHECK(x > 0.0);
      s += x;
    }
    CHECK(s == doctest::Approx(1.0));
  }
}

TEST_CASE("model bundle round trip") {
  testing::TempDir dir("model");
  const ToyModel m(2, 3);
  save_model(m, dir.path());
  const auto back = load_model(dir.path());
  REQUIRE(back.parameter_count() == m.parameter_count());
  for (std::size_t i = 0; i < m.parameter_count(); ++i) {
    CHECK(back.parameters()[i] == static_cast<double>(static_cast<float>(m.parameters()[i])));
  }
  CHECK(npy::read_f32(dir / "layer1_weight.npy").shape == std::vector<std::size_t>{10, 16});
  CHECK_THROWS_AS(load_model(dir / "missing"), IoError);
}

TEST_CASE("overlap metrics") {
  const std::vector<std::uint8_t> truth{1, 1, 1, 1, 0, 0, 0, 0};
  const std::vector<std::uint8_t> half{1, 1, 0, 0, 0, 0, 0, 0};
  const auto m = overlap(half, truth);
  CHECK(m.dice == doctest::Approx(2.0 / 3));
  CHECK(m.jaccard == doctest::Approx(0.5));
  const auto same = overlap(truth, truth);
  CHECK(same.dice == 1.0);
  CHECK(same.jaccard == 1.0);
  const std::vector<std::uint8_t> empty(8, 0);
  CHECK(overlap(empty, empty).dice == 1.0);
  CHECK(overlap(empty, truth).dice == 0.0);
  CHECK_THROWS_AS(overlap(empty, std::vector<std::uint8_t>(3, 0)), ShapeError);
}

TEST_CASE("volume losses") {
  const LabelGrid labels({1, 2, 2}, {0, 1, 1, 0}, 2);
  std::vector<float> hot, miss;
  for (auto l : labels.data()) {
    hot.insert(hot.end(), {l == 0 ? 1.0f : 0.0f, l == 1 ? 1.0f : 0.0f});
    miss.insert(miss.end(), {l == 1 ? 1.0f : 0.0f, l == 0 ? 1.0f : 0.0f});
  }
  CHECK(dice_loss(VoxelGrid({1, 2, 2, 2}, hot), labels) <= 1e-4);
  CHECK(dice_loss(VoxelGrid({1, 2, 2, 2}, miss), labels) == doctest::Approx(1.0).epsilon(1e-5));
  const double s = 1e-5;
  CHECK(dice_loss(VoxelGrid::filled({1, 2, 2, 2}, 0.5f), labels) == doctest::Approx(1.0 - (2.0 + s) / (4.0 + s)));
  CHECK(ce_loss(VoxelGrid::filled({1, 2, 2, 2}, 0.5f), labels) == doctest::Approx(std::log(2.0)));
  CHECK_THROWS_AS(dice_loss(VoxelGrid::filled({1, 2, 2, 2}, 0.7f), labels), ContractError);
}

TEST_CASE("synthetic data is deterministic in the seed") {
  const auto a = generate_synthetic(6, 42, 2, {12, 12, 12});
  const auto b = generate_synthetic(6, 42, 2, {12, 12, 12});
  REQUIRE(a.labeled.size() == 2);
  REQUIRE(a.unlabeled.size() == 4);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(a.labeled[i].volume == b.labeled[i].volume);
    CHECK(a.labeled[i].labels == b.labeled[i].labels);
  }
  const auto c = generate_synthetic(6, 43, 2, {12, 12, 12});
  CHECK_FALSE(c.labeled[0].volume == a.labeled[0].volume);
  CHECK(generate_synthetic(2, 1, 1).labeled.size() + generate_synthetic(2, 1, 1).unlabeled.size() == 2);
  CHECK_THROWS_AS(generate_synthetic(1, 1, 1), ContractError);
  CHECK_THROWS_AS(generate_synthetic(4, 1, 5), ContractError);
}

TEST_CASE("ellipsoid voxel count is close to the continuous volume") {
  const Ellipsoid e{{11.5, 11.5, 11.5}, {4, 5, 6}, 1.0};
  const auto s = render_ellipsoid(kSyntheticExtent, e, 1);
  std::size_t count = 0;
  for (auto l : s.labels.data()) count += l;
  const double expected = 4.0 / 3.0 * std::acos(-1.0) * 4 * 5 * 6;
  CHECK(std::abs(static_cast<double>(count) - expected) <= 0.1 * expected);
}

TEST_CASE("foreground is brighter than background") {
  for (const auto& s : generate_samples(3, 5)) {
    double fg = 0.0, bg = 0.0;
    std::size_t nf = 0, nb = 0;
    for (std::size_t v = 0; v < s.labels.voxel_count(); ++v) {
      if (s.labels[v]) {
        fg += s.volume[v];
        ++nf;
      } else {
        bg += s.volume[v];
        ++nb;
      }
    }
    REQUIRE(nf > 0);
    CHECK(fg / nf > 0.8);
    CHECK(std::abs(bg / nb) < 0.05);
  }
}
