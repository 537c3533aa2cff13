#pragma once

#include <cstddef>
#include <functional>
#include <initializer_list>
#include <span>
#include <vector>

namespace evfuse::autodiff {

/// Row-major dense matrix of doubles. Per-voxel tensors use one row per
/// voxel and one column per channel.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Matrix(std::size_t r, std::size_t c, std::vector<double> values);

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  std::span<double> row(std::size_t r) { return std::span<double>(data).subspan(r * cols, cols); }
  std::span<const double> row(std::size_t r) const { return std::span<const double>(data).subspan(r * cols, cols); }
  double scalar() const { return data.at(0); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }
};

/// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Records one forward evaluation as a list of nodes and replays it in
/// reverse to accumulate gradients. Nodes are appended in topological order,
/// so backward is a single reverse sweep.
class Tape {
 public:
  /// Receives the tape and the output node; accumulates into input grads.
  using BackwardFn = std::function<void(Tape&, Var)>;

  /// Leaf that never receives a gradient.
  Var constant(Matrix value);
  /// Leaf whose gradient is accumulated by backward().
  Var parameter(Matrix value);
  /// Interior node. It tracks gradients if any input does.
  Var record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }

  /// Gradient of the last backward() root with respect to `v`; zeros if the
  /// node did not take part.
  const Matrix& grad(Var v) const;
  /// Mutable gradient buffer, for use inside BackwardFn implementations.
  Matrix& grad_buffer(Var v);

  /// Seeds d(root)/d(root) = 1 for a 1x1 root and sweeps backwards.
  void backward(Var root);

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    BackwardFn backward;
    bool requires_grad = false;
  };

  std::vector<Node> nodes_;
};

// Generic differentiable ops.

/// x * w + b, with x (R x F), w (F x O), b (1 x O).
Var affine(Tape& t, Var x, Var w, Var b);
Var matmul(Tape& t, Var x, Var w);
Var tanh(Tape& t, Var x);
Var softplus(Tape& t, Var x);
Var add(Tape& t, Var a, Var b);
Var sub(Tape& t, Var a, Var b);
Var mul(Tape& t, Var a, Var b);
Var scale(Tape& t, Var a, double k);
/// Sum of all entries, as a 1x1 node.
Var sum(Tape& t, Var a);
/// Mean of all entries, as a 1x1 node.
Var mean(Tape& t, Var a);

}  // namespace evfuse::autodiff
