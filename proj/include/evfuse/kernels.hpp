#pragma once

// Per-voxel formulas shared by the parallel volume kernels, the serial
// reference kernels and the differentiable training ops. A mass vector has
// N singleton entries followed by one composite entry.

#include <cmath>
#include <cstddef>
#include <span>

namespace evfuse::kernel {

template <class T>
T softplus(T x) {
  return x > T(0) ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Dirichlet masses from non-negative evidence: b_n = e_n / S, u = N / S,
/// S = N + sum(e).
template <class In, class Out>
void dirichlet_masses(std::span<const In> evidence, std::span<Out> masses) {
  const std::size_t n = evidence.size();
  double strength = static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) strength += static_cast<double>(evidence[k]);
  for (std::size_t k = 0; k < n; ++k) masses[k] = static_cast<Out>(static_cast<double>(evidence[k]) / strength);
  masses[n] = static_cast<Out>(static_cast<double>(n) / strength);
}

/// Raw two-source fusion. Singleton-composite cross terms are scaled by
/// |C_n| / |C_N| = 1 / N; conflicting singleton pairs are dropped without
/// renormalization. Returns the raw total mass.
template <class T>
T ipaf(std::span<const T> a, std::span<const T> b, std::span<T> out) {
  const std::size_t n = a.size() - 1;
  const T au = a[n];
  const T bu = b[n];
  const T inv_n = T(1) / static_cast<T>(n);
  T total = T(0);
  for (std::size_t k = 0; k < n; ++k) {
    out[k] = a[k] * b[k] + inv_n * (a[k] * bu + b[k] * au);
    total += out[k];
  }
  out[n] = au * bu;
  return total + out[n];
}

template <class T>
T mass_total(std::span<const T> m) {
  T total = T(0);
  for (auto v : m) total += v;
  return total;
}

/// Pignistic probabilities: p_n = b_n + u / N.
template <class In, class Out>
void pignistic(std::span<const In> masses, std::span<Out> prob) {
  const std::size_t n = masses.size() - 1;
  const double share = static_cast<double>(masses[n]) / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) prob[k] = static_cast<Out>(static_cast<double>(masses[k]) + share);
}

/// Entropy-scaled uncertainty -u * sum(d_n log2 d_n). With `renormalize`
/// the singleton masses are first rescaled to a distribution; otherwise
/// the raw masses are used as d_n. Zero terms contribute nothing.
template <class T>
double entropy_uncertainty(std::span<const T> masses, bool renormalize) {
  const std::size_t n = masses.size() - 1;
  double singleton_total = 0.0;
  for (std::size_t k = 0; k < n; ++k) singleton_total += static_cast<double>(masses[k]);
  if (singleton_total <= 0.0) return 0.0;
  const double scale = renormalize ? 1.0 / singleton_total : 1.0;
  double h = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = static_cast<double>(masses[k]) * scale;
    if (d > 0.0) h -= d * std::log2(d);
  }
  const double u = static_cast<double>(masses[n]) * h;
  return u > 0.0 ? u : 0.0;
}

}  // namespace evfuse::kernel
