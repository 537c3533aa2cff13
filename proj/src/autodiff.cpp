#include "evfuse/autodiff.hpp"

#include <cmath>
#include <cstdint>
#include <stdexcept>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse::autodiff {

Matrix::Matrix(std::size_t r, std::size_t c, std::vector<double> values)
    : rows(r), cols(c), data(std::move(values)) {
  if (data.size() != r * c) throw ShapeError("matrix data does not match its shape");
}

Var Tape::constant(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, false});
  return Var{nodes_.size() - 1};
}

Var Tape::parameter(Matrix value) {
  nodes_.push_back(Node{std::move(value), Matrix{}, nullptr, true});
  return Var{nodes_.size() - 1};
}

Var Tape::record(Matrix value, std::initializer_list<Var> inputs, BackwardFn backward) {
  bool tracked = false;
  for (Var in : inputs) tracked = tracked || nodes_.at(in.id).requires_grad;
  nodes_.push_back(Node{std::move(value), Matrix{}, tracked ? std::move(backward) : nullptr, tracked});
  return Var{nodes_.size() - 1};
}

const Matrix& Tape::grad(Var v) const { return nodes_.at(v.id).grad; }

Matrix& Tape::grad_buffer(Var v) {
  Node& n = nodes_.at(v.id);
  if (!n.grad.same_shape(n.value) || n.grad.data.size() != n.value.data.size()) {
    n.grad = Matrix(n.value.rows, n.value.cols);
  }
  return n.grad;
}

void Tape::backward(Var root) {
  const Matrix& r = nodes_.at(root.id).value;
  if (r.rows != 1 || r.cols != 1) throw ContractError("backward root must be a 1x1 node");
  for (auto& n : nodes_) {
    if (n.requires_grad) n.grad = Matrix(n.value.rows, n.value.cols);
  }
  if (!nodes_[root.id].requires_grad) return;
  nodes_[root.id].grad.data[0] = 1.0;
  for (std::size_t i = root.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.requires_grad && n.backward) n.backward(*this, Var{i});
  }
}

namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeError(what);
}

Matrix matmul_values(const Matrix& x, const Matrix& w) {
  Matrix y(x.rows, w.cols);
  const auto rows = static_cast<std::int64_t>(x.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t ri = 0; ri < rows; ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    double* out = &y.data[r * w.cols];
    for (std::size_t f = 0; f < x.cols; ++f) {
      const double xv = x.data[r * x.cols + f];
      const double* wrow = &w.data[f * w.cols];
      for (std::size_t o = 0; o < w.cols; ++o) out[o] += xv * wrow[o];
    }
  }
  return y;
}

// dX += dY * W^T and dW += X^T * dY. The dW loop is split over rows of W so
// each entry is summed by one thread in a fixed order.
void matmul_backward(Tape& t, Var x, Var w, const Matrix& gy) {
  const Matrix& xv = t.value(x);
  const Matrix& wv = t.value(w);
  if (t.requires_grad(x)) {
    Matrix& gx = t.grad_buffer(x);
    const auto rows = static_cast<std::int64_t>(xv.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t ri = 0; ri < rows; ++ri) {
      const auto r = static_cast<std::size_t>(ri);
      const double* g = &gy.data[r * gy.cols];
      for (std::size_t f = 0; f < xv.cols; ++f) {
        const double* wrow = &wv.data[f * wv.cols];
        double acc = 0.0;
        for (std::size_t o = 0; o < wv.cols; ++o) acc += g[o] * wrow[o];
        gx.data[r * xv.cols + f] += acc;
      }
    }
  }
  if (t.requires_grad(w)) {
    Matrix& gw = t.grad_buffer(w);
    const auto feats = static_cast<std::int64_t>(wv.rows);
#pragma omp parallel for schedule(static)
    for (std::int64_t fi = 0; fi < feats; ++fi) {
      const auto f = static_cast<std::size_t>(fi);
      double* out = &gw.data[f * wv.cols];
      for (std::size_t r = 0; r < xv.rows; ++r) {
        const double xval = xv.data[r * xv.cols + f];
        const double* g = &gy.data[r * gy.cols];
        for (std::size_t o = 0; o < wv.cols; ++o) out[o] += xval * g[o];
      }
    }
  }
}

template <class F, class D>
Var unary(Tape& t, Var x, F f, D df) {
  const Matrix& xv = t.value(x);
  Matrix y(xv.rows, xv.cols);
  const auto n = static_cast<std::int64_t>(xv.data.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) y.data[static_cast<std::size_t>(i)] = f(xv.data[static_cast<std::size_t>(i)]);
  return t.record(std::move(y), {x}, [x, df](Tape& tp, Var out) {
    const Matrix& xv = tp.value(x);
    const Matrix& yv = tp.value(out);
    const Matrix& gy = tp.grad(out);
    Matrix& gx = tp.grad_buffer(x);
    const auto n = static_cast<std::int64_t>(xv.data.size());
#pragma omp parallel for schedule(static)
    for (std::int64_t ii = 0; ii < n; ++ii) {
      const auto i = static_cast<std::size_t>(ii);
      gx.data[i] += gy.data[i] * df(xv.data[i], yv.data[i]);
    }
  });
}

}  // namespace

Var matmul(Tape& t, Var x, Var w) {
  require(t.value(x).cols == t.value(w).rows, "matmul: inner dimensions differ");
  Matrix y = matmul_values(t.value(x), t.value(w));
  return t.record(std::move(y), {x, w}, [x, w](Tape& tp, Var out) { matmul_backward(tp, x, w, tp.grad(out)); });
}

Var affine(Tape& t, Var x, Var w, Var b) {
  const Matrix& bv = t.value(b);
  require(t.value(x).cols == t.value(w).rows, "affine: inner dimensions differ");
  require(bv.rows == 1 && bv.cols == t.value(w).cols, "affine: bias must be 1 x out");
  Matrix y = matmul_values(t.value(x), t.value(w));
  for (std::size_t r = 0; r < y.rows; ++r) {
    for (std::size_t o = 0; o < y.cols; ++o) y.data[r * y.cols + o] += bv.data[o];
  }
  return t.record(std::move(y), {x, w, b}, [x, w, b](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    matmul_backward(tp, x, w, gy);
    if (tp.requires_grad(b)) {
      Matrix& gb = tp.grad_buffer(b);
      for (std::size_t r = 0; r < gy.rows; ++r) {
        for (std::size_t o = 0; o < gy.cols; ++o) gb.data[o] += gy.data[r * gy.cols + o];
      }
    }
  });
}

Var tanh(Tape& t, Var x) {
  return unary(
      t, x, [](double v) { return std::tanh(v); }, [](double, double y) { return 1.0 - y * y; });
}

Var softplus(Tape& t, Var x) {
  return unary(
      t, x, [](double v) { return kernel::softplus(v); }, [](double v, double) { return kernel::sigmoid(v); });
}

Var add(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "add: shapes differ");
  Matrix y = t.value(a);
  const Matrix& bv = t.value(b);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += bv.data[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    for (Var in : {a, b}) {
      if (!tp.requires_grad(in)) continue;
      Matrix& g = tp.grad_buffer(in);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
    }
  });
}

Var sub(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "sub: shapes differ");
  Matrix y = t.value(a);
  const Matrix& bv = t.value(b);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] -= bv.data[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    if (tp.requires_grad(a)) {
      Matrix& g = tp.grad_buffer(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i];
    }
    if (tp.requires_grad(b)) {
      Matrix& g = tp.grad_buffer(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] -= gy.data[i];
    }
  });
}

Var mul(Tape& t, Var a, Var b) {
  require(t.value(a).same_shape(t.value(b)), "mul: shapes differ");
  Matrix y = t.value(a);
  const Matrix& bv = t.value(b);
  for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] *= bv.data[i];
  return t.record(std::move(y), {a, b}, [a, b](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    const Matrix& av = tp.value(a);
    const Matrix& bv = tp.value(b);
    if (tp.requires_grad(a)) {
      Matrix& g = tp.grad_buffer(a);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * bv.data[i];
    }
    if (tp.requires_grad(b)) {
      Matrix& g = tp.grad_buffer(b);
      for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += gy.data[i] * av.data[i];
    }
  });
}

Var scale(Tape& t, Var a, double k) {
  Matrix y = t.value(a);
  for (double& v : y.data) v *= k;
  return t.record(std::move(y), {a}, [a, k](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    Matrix& g = tp.grad_buffer(a);
    for (std::size_t i = 0; i < g.data.size(); ++i) g.data[i] += k * gy.data[i];
  });
}

Var sum(Tape& t, Var a) {
  double s = 0.0;
  for (double v : t.value(a).data) s += v;
  return t.record(Matrix(1, 1, s), {a}, [a](Tape& tp, Var out) {
    const double g0 = tp.grad(out).scalar();
    Matrix& g = tp.grad_buffer(a);
    for (double& v : g.data) v += g0;
  });
}

Var mean(Tape& t, Var a) {
  const std::size_t n = t.value(a).data.size();
  if (n == 0) throw ShapeError("mean of an empty matrix");
  return scale(t, sum(t, a), 1.0 / static_cast<double>(n));
}

}  // namespace evfuse::autodiff
