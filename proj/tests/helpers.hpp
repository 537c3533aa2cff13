#pragma once

#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "evfuse/evidence.hpp"
#include "evfuse/tensor_io.hpp"
#include "oracle.hpp"

namespace testing {

inline evfuse::BeliefVolume random_belief(std::mt19937_64& rng, evfuse::Extent3 e, std::size_t n) {
  std::vector<float> data;
  data.reserve(evfuse::voxel_count(e) * (n + 1));
  for (std::size_t v = 0; v < evfuse::voxel_count(e); ++v) {
    for (double m : oracle::random_assignment(rng, n)) data.push_back(static_cast<float>(m));
  }
  return evfuse::BeliefVolume(evfuse::VoxelGrid({e[0], e[1], e[2], n + 1}, std::move(data)), true);
}

inline evfuse::VoxelGrid random_grid(std::mt19937_64& rng, std::vector<std::size_t> shape, double lo = -1.0,
                                     double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  std::vector<float> data(n);
  for (auto& v : data) v = static_cast<float>(dist(rng));
  return evfuse::VoxelGrid(std::move(shape), std::move(data));
}

inline std::vector<double> as_double(std::span<const float> v) { return {v.begin(), v.end()}; }

// Fresh directory under the system temp path, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("evfuse_" + tag + "_" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
