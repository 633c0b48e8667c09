#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "wfe/error.hpp"

namespace wfe {

using cplx = std::complex<double>;
using Amplitudes = std::vector<cplx>;

/// out = O in, overwriting out. Both spans have the dimension of the space.
using LinearAction = std::function<void(std::span<const cplx>, std::span<cplx>)>;

/// Hilbert space geometry shared by every state type: dimension and the
/// quadrature weight applied to every inner product (h^d for grids, 1 for spins).
struct StateSpace {
  std::size_t dim = 0;
  double measure = 1.0;
};

inline void require_same_size(std::span<const cplx> a, std::span<const cplx> b) {
  if (a.size() != b.size()) {
    throw ShapeError("amplitude vectors differ in length: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

/// sum conj(a_i) b_i, without measure weight.
inline cplx raw_dot(std::span<const cplx> a, std::span<const cplx> b) {
  require_same_size(a, b);
  cplx acc{0.0, 0.0};
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::conj(a[i]) * b[i];
  return acc;
}

inline cplx inner(const StateSpace& space, std::span<const cplx> a, std::span<const cplx> b) {
  return space.measure * raw_dot(a, b);
}

inline double squared_norm(const StateSpace& space, std::span<const cplx> a) {
  double acc = 0.0;
  for (const auto& z : a) acc += std::norm(z);
  return space.measure * acc;
}

inline double norm(const StateSpace& space, std::span<const cplx> a) {
  return std::sqrt(squared_norm(space, a));
}

/// y += alpha x
inline void axpy(cplx alpha, std::span<const cplx> x, std::span<cplx> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(cplx alpha, std::span<cplx> x) {
  for (auto& z : x) z *= alpha;
}

inline Amplitudes apply_op(const LinearAction& op, std::span<const cplx> in) {
  Amplitudes out(in.size());
  op(in, out);
  return out;
}

/// <a|O|a> with the space's measure.
inline cplx expectation(const StateSpace& space, const LinearAction& op, std::span<const cplx> a) {
  const auto oa = apply_op(op, a);
  return inner(space, a, oa);
}

inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
  require_same_size(a, b);
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

inline bool all_finite(std::span<const cplx> a) {
  return std::all_of(a.begin(), a.end(),
                     [](const cplx& z) { return std::isfinite(z.real()) && std::isfinite(z.imag()); });
}

/// Rescales in place so that the measured norm is one. Returns the old norm.
inline double normalize(const StateSpace& space, std::span<cplx> a) {
  const double n = norm(space, a);
  if (!(n > 0.0)) throw DomainError("cannot normalize a zero state");
  scale(1.0 / n, a);
  return n;
}

/// Largest |<v|O v>| direction estimate by power iteration on O^2 (O self-adjoint).
/// Used as a cheap spectral-radius bound, so a loose answer is acceptable.
inline double spectral_radius_estimate(const LinearAction& op, std::size_t dim, int iterations = 40) {
  if (dim == 0) return 0.0;
  Amplitudes v(dim), w(dim);
  for (std::size_t i = 0; i < dim; ++i) {
    // deterministic, non-symmetric start vector
    v[i] = cplx{1.0 + 0.37 * std::sin(1.3 * static_cast<double>(i)), 0.21 * std::cos(0.7 * static_cast<double>(i))};
  }
  StateSpace unit{dim, 1.0};
  normalize(unit, v);
  double lambda = 0.0;
  for (int it = 0; it < iterations; ++it) {
    op(v, w);
    lambda = norm(unit, w);
    if (lambda == 0.0) return 0.0;
    for (std::size_t i = 0; i < dim; ++i) v[i] = w[i] / lambda;
  }
  return lambda;
}

}  // namespace wfe
