#include <doctest.h>

#include <cstring>
#include <fstream>
#include <iterator>

#include "evfuse/errors.hpp"
#include "evfuse/npy.hpp"
#include "evfuse/tensor_io.hpp"
#include "helpers.hpp"

using namespace evfuse;

namespace {

std::filesystem::path data_file(const std::string& name) { return std::filesystem::path(EVFUSE_TEST_DATA_DIR) / name; }

std::vector<char> slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void spit(const std::filesystem::path& p, const std::vector<char>& bytes) {
  std::ofstream out(p, std::ios::binary);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

}  // namespace

TEST_CASE("numpy file of shape (2,2,2) loads values in order") {
  const auto g = load_tensor(data_file("grid_2x2x2.npy"));
  CHECK(g.shape() == std::vector<std::size_t>{2, 2, 2});
  for (std::size_t i = 0; i < 8; ++i) CHECK(g[i] == static_cast<float>(i));
  CHECK(g.at(1, 0, 1) == 5.0f);
}

TEST_CASE("saving a numpy-written file reproduces its bytes") {
  testing::TempDir dir("io");
  for (const char* name : {"grid_2x2x2.npy", "belief_2x2x1x3.npy"}) {
    save_tensor(load_tensor(data_file(name)), dir / name);
    CHECK(slurp(dir / name) == slurp(data_file(name)));
  }
  const auto labels = load_labels(data_file("labels_2x3x4.npy"), 3);
  save_labels(labels, dir / "labels.npy");
  CHECK(slurp(dir / "labels.npy") == slurp(data_file("labels_2x3x4.npy")));
}

TEST_CASE("byte-exact round trip of a numpy-generated 1 MiB tensor") {
  const std::filesystem::path src = EVFUSE_NUMPY_FIXTURE;
  REQUIRE(std::filesystem::exists(src));
  testing::TempDir dir("big");
  const auto g = load_tensor(src);
  CHECK(g.size() * sizeof(float) == 1u << 20);
  save_tensor(g, dir / "copy.npy");
  CHECK(slurp(dir / "copy.npy") == slurp(src));
}

TEST_CASE("header layout matches numpy padding") {
  const std::size_t shape3[] = {2, 2, 2};
  const auto h = npy::encode_header(npy::Dtype::Float32, shape3);
  CHECK(h.size() == 128);
  CHECK(h.back() == '\n');
  CHECK(h.compare(0, 6, "\x93NUMPY") == 0);
  CHECK(h[6] == 1);
  CHECK(h[7] == 0);
  CHECK(h.find("{'descr': '<f4', 'fortran_order': False, 'shape': (2, 2, 2), }") == 10);

  // A one-element shape tuple needs the trailing comma.
  const std::size_t shape1[] = {5};
  const auto h1 = npy::encode_header(npy::Dtype::UInt8, shape1);
  CHECK(h1.find("'shape': (5,), }") != std::string::npos);
  CHECK(h1.find("'descr': '|u1'") != std::string::npos);
  CHECK(h1.size() % 64 == 0);
}

TEST_CASE("zero (4,4,4) grid writes 256 zero bytes after the header") {
  testing::TempDir dir("zero");
  save_tensor(VoxelGrid::zeros({4, 4, 4}), dir / "z.npy");
  const auto bytes = slurp(dir / "z.npy");
  REQUIRE(bytes.size() == 128 + 256);
  for (std::size_t i = 128; i < bytes.size(); ++i) CHECK(bytes[i] == 0);
}

TEST_CASE("round trip preserves shape and data") {
  std::mt19937_64 rng(3);
  testing::TempDir dir("rt");
  for (auto shape : {std::vector<std::size_t>{3, 4, 5}, std::vector<std::size_t>{2, 3, 4, 6}}) {
    const auto g = testing::random_grid(rng, shape, -100.0, 100.0);
    save_tensor(g, dir / "g.npy");
    CHECK(load_tensor(dir / "g.npy") == g);
  }
}

TEST_CASE("truncated payload is a corruption error") {
  testing::TempDir dir("trunc");
  auto bytes = slurp(data_file("grid_2x2x2.npy"));
  bytes.resize(bytes.size() - 4);
  spit(dir / "t.npy", bytes);
  CHECK_THROWS_AS(load_tensor(dir / "t.npy"), CorruptionError);
  bytes.resize(40);
  spit(dir / "h.npy", bytes);
  CHECK_THROWS_AS(load_tensor(dir / "h.npy"), FormatError);
}

TEST_CASE("trailing bytes after the payload are a corruption error") {
  testing::TempDir dir("extra");
  auto bytes = slurp(data_file("grid_2x2x2.npy"));
  bytes.push_back(0);
  spit(dir / "x.npy", bytes);
  CHECK_THROWS_AS(load_tensor(dir / "x.npy"), CorruptionError);
}

TEST_CASE("bad magic and unknown versions are format errors") {
  testing::TempDir dir("magic");
  auto bytes = slurp(data_file("grid_2x2x2.npy"));
  auto bad = bytes;
  bad[1] = 'X';
  spit(dir / "m.npy", bad);
  CHECK_THROWS_AS(load_tensor(dir / "m.npy"), FormatError);
  bad = bytes;
  bad[6] = 9;
  spit(dir / "v.npy", bad);
  CHECK_THROWS_AS(load_tensor(dir / "v.npy"), FormatError);
}

TEST_CASE("unsupported encodings are rejected") {
  CHECK_THROWS_AS(load_tensor(data_file("float64_2x2x2.npy")), UnsupportedEncodingError);
  CHECK_THROWS_AS(load_tensor(data_file("fortran_2x3x4.npy")), UnsupportedEncodingError);
  CHECK_THROWS_AS(load_tensor(data_file("labels_2x3x4.npy")), UnsupportedEncodingError);
  CHECK_THROWS_AS(load_labels(data_file("grid_2x2x2.npy"), 2), UnsupportedEncodingError);
}

TEST_CASE("missing and unwritable paths are io errors") {
  CHECK_THROWS_AS(load_tensor("/nonexistent/dir/x.npy"), IoError);
  CHECK_THROWS_AS(save_tensor(VoxelGrid::zeros({1, 1, 1}), "/nonexistent/dir/x.npy"), IoError);
}

TEST_CASE("grid validation") {
  CHECK_THROWS_AS(VoxelGrid({2, 2}, std::vector<float>(4)), ShapeError);
  CHECK_THROWS_AS(VoxelGrid({2, 2, 2, 2, 2}, std::vector<float>(32)), ShapeError);
  CHECK_THROWS_AS(VoxelGrid({2, 0, 2}, {}), ShapeError);
  CHECK_THROWS_AS(VoxelGrid({2, 2, 2}, std::vector<float>(7)), ShapeError);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 1}, {std::numeric_limits<float>::quiet_NaN()}), DomainError);
  CHECK_THROWS_AS(VoxelGrid({1, 1, 1}, {std::numeric_limits<float>::infinity()}), DomainError);
  const std::size_t huge[] = {1u << 16, 1u << 16, 2};
  CHECK_THROWS_AS(checked_element_count(huge), ShapeError);
  CHECK_THROWS_AS(LabelGrid({1, 1, 2}, {0, 2}, 2), ContractError);
  CHECK_THROWS_AS(load_labels(data_file("labels_2x3x4.npy"), 2), ContractError);
}

TEST_CASE("channel access on rank-4 grids") {
  const VoxelGrid g({1, 1, 2, 3}, {0, 1, 2, 3, 4, 5});
  CHECK(g.channels() == 3);
  CHECK(g.voxel_count() == 2);
  CHECK(g.voxel(1)[2] == 5.0f);
  CHECK(g.at(0, 0, 1, 1) == 4.0f);
}

TEST_CASE("decode_header accepts version 2 length fields") {
  const std::size_t shape[] = {2, 2, 2};
  std::string h = npy::encode_header(npy::Dtype::Float32, shape);
  // Rewrite as version 2.0 with a 4-byte length.
  const std::string dict = h.substr(10);
  std::string v2 = "\x93NUMPY";
  v2 += '\x02';
  v2 += '\x00';
  const auto len = static_cast<std::uint32_t>(dict.size());
  for (int i = 0; i < 4; ++i) v2 += static_cast<char>((len >> (8 * i)) & 0xFF);
  v2 += dict;
  std::vector<std::byte> bytes(v2.size());
  std::memcpy(bytes.data(), v2.data(), v2.size());
  std::size_t offset = 0;
  const auto header = npy::decode_header(bytes, offset);
  CHECK(offset == v2.size());
  CHECK(header.shape == std::vector<std::size_t>{2, 2, 2});
  CHECK(header.dtype == npy::Dtype::Float32);
}
