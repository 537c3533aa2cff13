#include <doctest.h>

#include "evfuse/errors.hpp"
#include "evfuse/flat.hpp"
#include "evfuse/fusion.hpp"
#include "evfuse/mixing.hpp"
#include "helpers.hpp"

using namespace evfuse;

namespace {

flat::View view(const VoxelGrid& g) { return {g.data(), g.shape()}; }

std::vector<float> stack(const std::vector<VoxelGrid>& items) {
  std::vector<float> out;
  for (const auto& g : items) out.insert(out.end(), g.data().begin(), g.data().end());
  return out;
}

}  // namespace

TEST_CASE("flat kernels match the library on single volumes") {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto logits = testing::random_grid(rng, {3, 4, 2, 3}, -5, 5);
    const auto copy = logits;
    const auto b = flat::evidence_to_belief(view(logits));
    CHECK(b.shape == std::vector<std::size_t>{3, 4, 2, 4});
    CHECK(std::equal(b.data.begin(), b.data.end(), evidence_to_belief(logits).grid().data().begin()));
    CHECK(logits == copy);

    const auto pa = testing::random_belief(rng, {3, 4, 2}, 2);
    const auto pb = testing::random_belief(rng, {3, 4, 2}, 2);
    const auto f = flat::fuse_volumes(view(pa.grid()), view(pb.grid()));
    CHECK(std::equal(f.data.begin(), f.data.end(), fuse_volumes(pa, pb).grid().data().begin()));

    const auto u = flat::uncertainty_volume(view(pa.grid()));
    const auto want_u = uncertainty_volume(pa);
    CHECK(u.shape == std::vector<std::size_t>{3, 4, 2});
    CHECK(std::equal(u.data.begin(), u.data.end(), want_u.data().begin()));

    const auto r = flat::rank_voxels(view(want_u.grid()), RankOrder::AscendingUncertainty);
    const auto want_r = rank_voxels(want_u, RankOrder::AscendingUncertainty);
    CHECK(std::equal(r.begin(), r.end(), want_r.ranks().begin()));

    const WeightSchedule s{1.0, 2, 5};
    const auto loss = testing::random_grid(rng, {3, 4, 2}, 0, 2);
    CHECK(flat::weighted_loss(view(loss), view(want_u.grid()), s) == weighted_loss(loss, want_u, s));
    CHECK(flat::dynamic_weight(1.0, 2, 5, 3, 7) == dynamic_weight(s, 3, 7));

    const auto m = generate_mask({3, 4, 2}, {2, 2, 1}, rng());
    const flat::ByteView mv{m.values(), {3, 4, 2}};
    const auto [ma, mb] = flat::mix_pair(view(pa.grid()), view(pb.grid()), mv);
    const auto lib = mix_pair(pa.grid(), pb.grid(), m);
    CHECK(std::equal(ma.data.begin(), ma.data.end(), lib.mixed_a.data().begin()));
    CHECK(std::equal(mb.data.begin(), mb.data.end(), lib.mixed_b.data().begin()));
    const auto [ra, rb] =
        flat::restore_predictions({ma.data, ma.shape}, {mb.data, mb.shape}, mv);
    CHECK(std::equal(ra.data.begin(), ra.data.end(), pa.grid().data().begin()));
    CHECK(std::equal(rb.data.begin(), rb.data.end(), pb.grid().data().begin()));
  }
}

TEST_CASE("flat kernels loop over a leading batch dimension") {
  std::mt19937_64 rng(2);
  std::vector<VoxelGrid> logits;
  for (int k = 0; k < 3; ++k) logits.push_back(testing::random_grid(rng, {2, 2, 3, 2}, -3, 3));
  const auto data = stack(logits);
  const auto b = flat::evidence_to_belief({data, {3, 2, 2, 3, 2}});
  CHECK(b.shape == std::vector<std::size_t>{3, 2, 2, 3, 3});
  std::vector<VoxelGrid> beliefs;
  for (const auto& l : logits) beliefs.push_back(evidence_to_belief(l).grid());
  CHECK(b.data == stack(beliefs));

  const auto u = flat::uncertainty_volume({b.data, b.shape});
  CHECK(u.shape == std::vector<std::size_t>{3, 2, 2, 3});
  std::vector<VoxelGrid> us;
  for (const auto& g : beliefs) us.push_back(uncertainty_volume(BeliefVolume(g, true)).grid());
  CHECK(u.data == stack(us));

  const auto f = flat::fuse_volumes({b.data, b.shape}, {b.data, b.shape}, false);
  CHECK(f.shape == b.shape);

  std::vector<VoxelGrid> losses;
  for (int k = 0; k < 3; ++k) losses.push_back(testing::random_grid(rng, {2, 2, 3}, 0, 1));
  const auto lv = stack(losses);
  const WeightSchedule s{1.0, 1, 3};
  std::vector<UncertaintyVolume> uv;
  for (const auto& g : us) uv.emplace_back(g);
  CHECK(flat::weighted_loss({lv, {3, 2, 2, 3}}, {u.data, u.shape}, s) == weighted_loss(losses, uv, s));
  CHECK(flat::rank_voxels({u.data, u.shape}, RankOrder::DescendingUncertainty).size() == 36);
}

TEST_CASE("flat boundary validation") {
  const std::vector<float> four(4, 0.0f);
  CHECK_THROWS_AS(flat::evidence_to_belief({four, {}}), ShapeError);
  CHECK_THROWS_AS(flat::evidence_to_belief({four, {1, 1, 1, 3}}), ShapeError);
  CHECK_THROWS_AS(flat::evidence_to_belief({four, {1, 1, 4}}), ShapeError);
  CHECK_THROWS_AS(flat::evidence_to_belief({four, {1, 1, 0, 4}}), ShapeError);
  CHECK_THROWS_AS(flat::fuse_volumes({four, {1, 1, 1, 4}}, {four, {1, 1, 4, 1}}), ShapeError);
  const std::vector<std::uint8_t> mask(3, 1);
  CHECK_THROWS_AS(flat::mix_pair({four, {1, 1, 4}}, {four, {1, 1, 4}}, {mask, {1, 1, 3}}), ShapeError);
  CHECK_THROWS_AS(flat::mix_pair({four, {1, 1, 4}}, {four, {1, 1, 4}}, {mask, {1, 1, 4}}), ShapeError);
}
