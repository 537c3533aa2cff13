#include "evfuse/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "evfuse/belief_ops.hpp"
#include "evfuse/errors.hpp"
#include "evfuse/npy.hpp"

namespace evfuse {

using autodiff::Matrix;
using autodiff::Tape;
using autodiff::Var;

namespace {

double unit_uniform(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::size_t count_parameters(std::size_t num_classes) {
  const std::size_t h = ToyModel::kHidden;
  return (kFeatureCount * h + h) + (h * h + h) + (h * num_classes + num_classes);
}

double axis_coordinate(std::size_t i, std::size_t extent) {
  return extent > 1 ? 2.0 * static_cast<double>(i) / static_cast<double>(extent - 1) - 1.0 : 0.0;
}

}  // namespace

Matrix voxel_features(const VoxelGrid& volume) {
  if (volume.rank() != 3) throw ShapeError("voxel_features needs a rank-3 volume");
  const Extent3 e = volume.extent();
  Matrix f(volume.voxel_count(), kFeatureCount);
  const auto w = static_cast<std::int64_t>(e[0]);
#pragma omp parallel for schedule(static)
  for (std::int64_t xi = 0; xi < w; ++xi) {
    const auto x = static_cast<std::size_t>(xi);
    for (std::size_t y = 0; y < e[1]; ++y) {
      for (std::size_t z = 0; z < e[2]; ++z) {
        auto row = f.row((x * e[1] + y) * e[2] + z);
        row[0] = volume.at(x, y, z);
        row[1] = volume.at(x > 0 ? x - 1 : x, y, z);
        row[2] = volume.at(x + 1 < e[0] ? x + 1 : x, y, z);
        row[3] = volume.at(x, y > 0 ? y - 1 : y, z);
        row[4] = volume.at(x, y + 1 < e[1] ? y + 1 : y, z);
        row[5] = volume.at(x, y, z > 0 ? z - 1 : z);
        row[6] = volume.at(x, y, z + 1 < e[2] ? z + 1 : z);
        row[7] = axis_coordinate(x, e[0]);
        row[8] = axis_coordinate(y, e[1]);
        row[9] = axis_coordinate(z, e[2]);
      }
    }
  }
  return f;
}

ToyModel::ToyModel(std::size_t num_classes, std::uint64_t seed)
    : num_classes_(num_classes), params_(count_parameters(num_classes), 0.0) {
  if (num_classes < 2) throw ContractError("ToyModel needs at least 2 classes");
  std::mt19937_64 rng(seed);
  for (const auto& layer : layers()) {
    const double limit = std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (std::size_t i = 0; i < layer.in * layer.out; ++i) {
      params_[layer.weight_offset + i] = (2.0 * unit_uniform(rng) - 1.0) * limit;
    }
  }
}

ToyModel::ToyModel(std::size_t num_classes, std::vector<double> parameters)
    : num_classes_(num_classes), params_(std::move(parameters)) {
  if (num_classes < 2) throw ContractError("ToyModel needs at least 2 classes");
  if (params_.size() != count_parameters(num_classes)) {
    throw ShapeError("ToyModel expects " + std::to_string(count_parameters(num_classes)) + " parameters, got " +
                     std::to_string(params_.size()));
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw DomainError("ToyModel parameters must be finite");
  }
}

std::array<ToyModel::LayerShape, ToyModel::kLayers> ToyModel::layers() const {
  const std::array<std::size_t, kLayers + 1> widths = {kFeatureCount, kHidden, kHidden, num_classes_};
  std::array<LayerShape, kLayers> out{};
  std::size_t offset = 0;
  for (std::size_t l = 0; l < kLayers; ++l) {
    out[l].in = widths[l];
    out[l].out = widths[l + 1];
    out[l].weight_offset = offset;
    offset += widths[l] * widths[l + 1];
    out[l].bias_offset = offset;
    offset += widths[l + 1];
  }
  return out;
}

ToyModel::Bound ToyModel::bind(Tape& t, bool trainable) const {
  Bound b;
  const auto ls = layers();
  for (std::size_t l = 0; l < kLayers; ++l) {
    const auto& s = ls[l];
    Matrix w(s.in, s.out, std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(s.weight_offset),
                                              params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset)));
    Matrix bias(1, s.out, std::vector<double>(params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset),
                                              params_.begin() + static_cast<std::ptrdiff_t>(s.bias_offset + s.out)));
    b.vars[2 * l] = trainable ? t.parameter(std::move(w)) : t.constant(std::move(w));
    b.vars[2 * l + 1] = trainable ? t.parameter(std::move(bias)) : t.constant(std::move(bias));
  }
  return b;
}

Var ToyModel::logits(Tape& t, const Bound& bound, Var features) const {
  Var h = autodiff::tanh(t, autodiff::affine(t, features, bound.vars[0], bound.vars[1]));
  h = autodiff::tanh(t, autodiff::affine(t, h, bound.vars[2], bound.vars[3]));
  return autodiff::affine(t, h, bound.vars[4], bound.vars[5]);
}

Var ToyModel::belief(Tape& t, const Bound& bound, Var features) const {
  return autodiff::dirichlet_belief(t, autodiff::softplus(t, logits(t, bound, features)));
}

std::vector<double> ToyModel::gradient(const Tape& t, const Bound& bound) const {
  std::vector<double> g(params_.size(), 0.0);
  const auto ls = layers();
  for (std::size_t l = 0; l < kLayers; ++l) {
    const Matrix& gw = t.grad(bound.vars[2 * l]);
    const Matrix& gb = t.grad(bound.vars[2 * l + 1]);
    std::copy(gw.data.begin(), gw.data.end(), g.begin() + static_cast<std::ptrdiff_t>(ls[l].weight_offset));
    std::copy(gb.data.begin(), gb.data.end(), g.begin() + static_cast<std::ptrdiff_t>(ls[l].bias_offset));
  }
  return g;
}

Matrix ToyModel::predict_belief(const VoxelGrid& volume) const {
  Tape t;
  const Bound b = bind(t, false);
  const Var x = t.constant(voxel_features(volume));
  return t.value(belief(t, b, x));
}

void save_model(const ToyModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create model directory '" + dir.string() + "': " + ec.message());
  const auto p = model.parameters();
  const auto ls = model.layers();
  for (std::size_t l = 0; l < ToyModel::kLayers; ++l) {
    const auto& s = ls[l];
    const std::vector<float> w(p.begin() + static_cast<std::ptrdiff_t>(s.weight_offset),
                               p.begin() + static_cast<std::ptrdiff_t>(s.bias_offset));
    const std::vector<float> b(p.begin() + static_cast<std::ptrdiff_t>(s.bias_offset),
                               p.begin() + static_cast<std::ptrdiff_t>(s.bias_offset + s.out));
    const std::string stem = "layer" + std::to_string(l + 1);
    const std::array<std::size_t, 2> wshape{s.in, s.out};
    const std::array<std::size_t, 1> bshape{s.out};
    npy::write_f32(dir / (stem + "_weight.npy"), wshape, w);
    npy::write_f32(dir / (stem + "_bias.npy"), bshape, b);
  }
}

ToyModel load_model(const std::filesystem::path& dir) {
  std::vector<double> params;
  std::size_t num_classes = 0;
  std::size_t expected_in = kFeatureCount;
  for (std::size_t l = 0; l < ToyModel::kLayers; ++l) {
    const std::string stem = "layer" + std::to_string(l + 1);
    const auto w = npy::read_f32(dir / (stem + "_weight.npy"));
    const auto b = npy::read_f32(dir / (stem + "_bias.npy"));
    if (w.shape.size() != 2 || b.shape.size() != 1 || w.shape[0] != expected_in || w.shape[1] != b.shape[0]) {
      throw FormatError("model bundle layer " + std::to_string(l + 1) + " has inconsistent shapes");
    }
    params.insert(params.end(), w.data.begin(), w.data.end());
    params.insert(params.end(), b.data.begin(), b.data.end());
    expected_in = w.shape[1];
    num_classes = w.shape[1];
  }
  return ToyModel(num_classes, std::move(params));
}

}  // namespace evfuse
