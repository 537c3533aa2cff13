#include "evfuse/belief_ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>

#include "evfuse/errors.hpp"
#include "evfuse/kernels.hpp"

namespace evfuse::autodiff {

namespace {

std::int64_t row_count(const Matrix& m) { return static_cast<std::int64_t>(m.rows); }

void check_labels(const Matrix& prob, std::span<const std::uint8_t> labels) {
  if (labels.size() != prob.rows) throw ShapeError("label count does not match prediction rows");
  for (auto l : labels) {
    if (l >= prob.cols) throw ContractError("label value exceeds the class count");
  }
}

}  // namespace

Var dirichlet_belief(Tape& t, Var evidence) {
  const Matrix& ev = t.value(evidence);
  const std::size_t n = ev.cols;
  if (n < 2) throw ContractError("dirichlet_belief needs at least 2 classes");
  Matrix m(ev.rows, n + 1);
#pragma omp parallel for schedule(static)
  for (std::int64_t ri = 0; ri < row_count(ev); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    kernel::dirichlet_masses<double, double>(ev.row(r), m.row(r));
  }
  return t.record(std::move(m), {evidence}, [evidence, n](Tape& tp, Var out) {
    const Matrix& ev = tp.value(evidence);
    const Matrix& mv = tp.value(out);
    const Matrix& gm = tp.grad(out);
    Matrix& ge = tp.grad_buffer(evidence);
#pragma omp parallel for schedule(static)
    for (std::int64_t ri = 0; ri < row_count(ev); ++ri) {
      const auto r = static_cast<std::size_t>(ri);
      double strength = static_cast<double>(n);
      for (std::size_t k = 0; k < n; ++k) strength += ev(r, k);
      double dot = gm(r, n) * mv(r, n);
      for (std::size_t k = 0; k < n; ++k) dot += gm(r, k) * mv(r, k);
      for (std::size_t k = 0; k < n; ++k) ge(r, k) += (gm(r, k) - dot) / strength;
    }
  });
}

Var ipaf_fuse(Tape& t, Var a, Var b) {
  const Matrix& av = t.value(a);
  const Matrix& bv = t.value(b);
  if (!av.same_shape(bv)) throw ShapeError("ipaf_fuse: mass matrices differ in shape");
  if (av.cols < 3) throw ContractError("ipaf_fuse needs at least 2 classes");
  Matrix f(av.rows, av.cols);
#pragma omp parallel for schedule(static)
  for (std::int64_t ri = 0; ri < row_count(av); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    kernel::ipaf<double>(av.row(r), bv.row(r), f.row(r));
  }
  return t.record(std::move(f), {a, b}, [a, b](Tape& tp, Var out) {
    const Matrix& av = tp.value(a);
    const Matrix& bv = tp.value(b);
    const Matrix& gf = tp.grad(out);
    const std::size_t n = av.cols - 1;
    const double inv_n = 1.0 / static_cast<double>(n);
    // Gradient w.r.t. `x` given the other source `y`; the rule is symmetric.
    auto accumulate = [&](Var x, const Matrix& other) {
      if (!tp.requires_grad(x)) return;
      Matrix& gx = tp.grad_buffer(x);
#pragma omp parallel for schedule(static)
      for (std::int64_t ri = 0; ri < row_count(other); ++ri) {
        const auto r = static_cast<std::size_t>(ri);
        const double yu = other(r, n);
        double gu = gf(r, n) * yu;
        for (std::size_t k = 0; k < n; ++k) {
          gx(r, k) += gf(r, k) * (other(r, k) + inv_n * yu);
          gu += gf(r, k) * other(r, k) * inv_n;
        }
        gx(r, n) += gu;
      }
    };
    accumulate(a, bv);
    accumulate(b, av);
  });
}

Var renormalize_rows(Tape& t, Var masses, double conflict_epsilon) {
  const Matrix& mv = t.value(masses);
  Matrix y(mv.rows, mv.cols);
  int conflict = 0;
#pragma omp parallel for schedule(static) reduction(max : conflict)
  for (std::int64_t ri = 0; ri < row_count(mv); ++ri) {
    const auto r = static_cast<std::size_t>(ri);
    const double total = kernel::mass_total<double>(mv.row(r));
    if (!(total > conflict_epsilon)) {
      conflict = 1;
      continue;
    }
    for (std::size_t c = 0; c < mv.cols; ++c) y(r, c) = mv(r, c) / total;
  }
  if (conflict) throw TotalConflictError("renormalize_rows: a row is in total conflict");
  return t.record(std::move(y), {masses}, [masses](Tape& tp, Var out) {
    const Matrix& mv = tp.value(masses);
    const Matrix& yv = tp.value(out);
    const Matrix& gy = tp.grad(out);
    Matrix& gm = tp.grad_buffer(masses);
#pragma omp parallel for schedule(static)
    for (std::int64_t ri = 0; ri < row_count(mv); ++ri) {
      const auto r = static_cast<std::size_t>(ri);
      const double total = kernel::mass_total<double>(mv.row(r));
      double dot = 0.0;
      for (std::size_t c = 0; c < mv.cols; ++c) dot += gy(r, c) * yv(r, c);
      for (std::size_t c = 0; c < mv.cols; ++c) gm(r, c) += (gy(r, c) - dot) / total;
    }
  });
}

Var pignistic(Tape& t, Var masses) {
  const Matrix& mv = t.value(masses);
  if (mv.cols < 3) throw ContractError("pignistic needs at least 2 classes");
  const std::size_t n = mv.cols - 1;
  Matrix p(mv.rows, n);
  for (std::size_t r = 0; r < mv.rows; ++r) kernel::pignistic<double, double>(mv.row(r), p.row(r));
  return t.record(std::move(p), {masses}, [masses, n](Tape& tp, Var out) {
    const Matrix& gp = tp.grad(out);
    Matrix& gm = tp.grad_buffer(masses);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t r = 0; r < gp.rows; ++r) {
      double share = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        gm(r, k) += gp(r, k);
        share += gp(r, k);
      }
      gm(r, n) += share * inv_n;
    }
  });
}

Var select_rows(Tape& t, Var first, Var second, std::span<const std::uint8_t> mask) {
  const Matrix& fv = t.value(first);
  const Matrix& sv = t.value(second);
  if (!fv.same_shape(sv) || mask.size() != fv.rows) throw ShapeError("select_rows: shapes differ");
  Matrix y(fv.rows, fv.cols);
  for (std::size_t r = 0; r < fv.rows; ++r) {
    const auto src = mask[r] ? fv.row(r) : sv.row(r);
    std::copy(src.begin(), src.end(), y.row(r).begin());
  }
  std::vector<std::uint8_t> keep(mask.begin(), mask.end());
  return t.record(std::move(y), {first, second}, [first, second, keep = std::move(keep)](Tape& tp, Var out) {
    const Matrix& gy = tp.grad(out);
    Matrix* gf = tp.requires_grad(first) ? &tp.grad_buffer(first) : nullptr;
    Matrix* gs = tp.requires_grad(second) ? &tp.grad_buffer(second) : nullptr;
    for (std::size_t r = 0; r < gy.rows; ++r) {
      Matrix* dst = keep[r] ? gf : gs;
      if (!dst) continue;
      for (std::size_t c = 0; c < gy.cols; ++c) (*dst)(r, c) += gy(r, c);
    }
  });
}

Var soft_dice(Tape& t, Var prob, std::span<const std::uint8_t> labels, double smoothing) {
  const Matrix& pv = t.value(prob);
  check_labels(pv, labels);
  const std::size_t n = pv.cols;
  std::vector<double> inter(n, 0.0), psum(n, 0.0), ysum(n, 0.0);
  for (std::size_t r = 0; r < pv.rows; ++r) {
    for (std::size_t k = 0; k < n; ++k) psum[k] += pv(r, k);
    inter[labels[r]] += pv(r, labels[r]);
    ysum[labels[r]] += 1.0;
  }
  std::vector<double> num(n), den(n);
  double loss = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    num[k] = 2.0 * inter[k] + smoothing;
    den[k] = psum[k] + ysum[k] + smoothing;
    loss += 1.0 - num[k] / den[k];
  }
  loss /= static_cast<double>(n);
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  return t.record(Matrix(1, 1, loss), {prob},
                  [prob, lab = std::move(lab), num = std::move(num), den = std::move(den)](Tape& tp, Var out) {
                    const double g = tp.grad(out).scalar() / static_cast<double>(num.size());
                    Matrix& gp = tp.grad_buffer(prob);
                    for (std::size_t r = 0; r < gp.rows; ++r) {
                      for (std::size_t k = 0; k < gp.cols; ++k) {
                        const double y = lab[r] == k ? 1.0 : 0.0;
                        gp(r, k) -= g * (2.0 * y * den[k] - num[k]) / (den[k] * den[k]);
                      }
                    }
                  });
}

Var cross_entropy_voxels(Tape& t, Var prob, std::span<const std::uint8_t> labels) {
  const Matrix& pv = t.value(prob);
  check_labels(pv, labels);
  Matrix c(pv.rows, 1);
  for (std::size_t r = 0; r < pv.rows; ++r) {
    const double p = std::clamp(pv(r, labels[r]), kProbabilityFloor, 1.0);
    c(r, 0) = -std::log(p);
  }
  std::vector<std::uint8_t> lab(labels.begin(), labels.end());
  return t.record(std::move(c), {prob}, [prob, lab = std::move(lab)](Tape& tp, Var out) {
    const Matrix& pv = tp.value(prob);
    const Matrix& gc = tp.grad(out);
    Matrix& gp = tp.grad_buffer(prob);
    for (std::size_t r = 0; r < pv.rows; ++r) {
      const double p = pv(r, lab[r]);
      if (p > kProbabilityFloor && p < 1.0) gp(r, lab[r]) -= gc(r, 0) / p;
    }
  });
}

Var weighted_mean(Tape& t, Var column, std::span<const double> weights) {
  const Matrix& cv = t.value(column);
  if (cv.cols != 1 || weights.size() != cv.rows) throw ShapeError("weighted_mean: weights do not match column");
  const double inv = 1.0 / static_cast<double>(cv.rows);
  double total = 0.0;
  for (std::size_t r = 0; r < cv.rows; ++r) total += weights[r] * cv(r, 0);
  std::vector<double> w(weights.begin(), weights.end());
  return t.record(Matrix(1, 1, total * inv), {column}, [column, w = std::move(w), inv](Tape& tp, Var out) {
    const double g = tp.grad(out).scalar() * inv;
    Matrix& gc = tp.grad_buffer(column);
    for (std::size_t r = 0; r < w.size(); ++r) gc(r, 0) += g * w[r];
  });
}

}  // namespace evfuse::autodiff
