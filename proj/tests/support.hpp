#pragma once

// Independent reference constructions for the unit and acceptance tests.
// Dense matrices here are assembled from Kronecker products or explicit
// enumeration, never from the library's own matrix-free actions.

#include <cmath>
#include <complex>
#include <random>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/KroneckerProduct>

#include "wfe/linalg.hpp"

namespace oracle {

using wfe::cplx;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

inline Mat pauli_x() {
  Mat m(2, 2);
  m << 0, 1, 1, 0;
  return m;
}
inline Mat spin_z() {
  Mat m(2, 2);
  m << 0.5, 0, 0, -0.5;  // row 0 = bit 0 = up
  return m;
}

/// op acting on `site` of an n-spin register; site 0 is the least significant bit.
inline Mat on_site(const Mat& op, int site, int n) {
  Mat out = Mat::Identity(1, 1);
  for (int s = n - 1; s >= 0; --s) {
    const Mat factor = s == site ? op : Mat::Identity(2, 2);
    Mat next = Eigen::kroneckerProduct(out, factor);
    out = next;
  }
  return out;
}

inline Mat total_sz(int n, int first = 0) {
  const long d = 1L << n;
  Mat a = Mat::Zero(d, d);
  for (int i = first; i < n; ++i) a += on_site(spin_z(), i, n);
  return a;
}

/// Full-space toy Hamiltonian: -(1/m) sum_i (sigma_x^i - 1) + dV/R^4 (S^2 - R^2)^2 + c s_1 S,
/// S summed over the apparatus spins 1..N-1.
inline Mat toy_hamiltonian(int n, double mass, double dv, double coupling) {
  const long d = 1L << n;
  const double r = (n - 1) / 2.0;
  Mat lap = Mat::Zero(d, d);
  for (int i = 0; i < n; ++i) lap += on_site(pauli_x(), i, n) - Mat::Identity(d, d);
  const Mat s = total_sz(n, 1);
  const Mat s2 = s * s;
  const Mat r2 = r * r * Mat::Identity(d, d);
  const Mat v = (dv / std::pow(r, 4)) * (s2 - r2) * (s2 - r2);
  return -(1.0 / mass) * lap + v + coupling * on_site(spin_z(), 0, n) * s;
}

/// Columns are the orthonormal symmetric basis |q> (x) |Dicke n>, ordered q*(M+1)+n.
inline Mat dicke_isometry(int n) {
  const long d = 1L << n;
  const int m = n - 1;
  Mat b = Mat::Zero(d, 2 * (m + 1));
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) {
      int count = 0;
      for (long c = 0; c < d; ++c) {
        int down = 0;
        for (int i = 1; i < n; ++i) down += (c >> i) & 1;
        if ((c & 1) == q && down == k) {
          b(c, q * (m + 1) + k) = 1.0;
          ++count;
        }
      }
      b.col(q * (m + 1) + k) /= std::sqrt(static_cast<double>(count));
    }
  }
  return b;
}

inline Vec to_vec(std::span<const cplx> a) {
  Vec v(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) v(i) = a[i];
  return v;
}
inline wfe::Amplitudes to_amps(const Vec& v) { return wfe::Amplitudes(v.data(), v.data() + v.size()); }

/// <A^2> - <A>^2 for a unit vector.
inline double variance(const Mat& a, const Vec& psi) {
  const cplx m1 = psi.dot(a * psi);
  const cplx m2 = psi.dot(a * (a * psi));
  return (m2 - m1 * m1).real();
}

inline wfe::Amplitudes random_state(std::size_t dim, std::mt19937_64& rng, double measure = 1.0) {
  std::normal_distribution<double> g;
  wfe::Amplitudes a(dim);
  double s = 0.0;
  for (auto& z : a) {
    z = {g(rng), g(rng)};
    s += std::norm(z);
  }
  const double scale = 1.0 / std::sqrt(s * measure);
  for (auto& z : a) z *= scale;
  return a;
}

inline double max_abs_diff(std::span<const cplx> a, std::span<const cplx> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

/// Composite Simpson rule on [a, b] with n (even) panels.
template <class F>
double simpson(F f, double a, double b, int n) {
  const double h = (b - a) / n;
  double s = f(a) + f(b);
  for (int i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f(a + i * h);
  return s * h / 3.0;
}

/// Least-squares slope of y against x.
inline double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// independent oracle: composite Simpson, not the library's Gauss-Kronrod
inline double simpson_m2_n1(double a) {
  auto w = [a](double t) { return std::exp(-a * (1.0 - t * t)); };
  const double num = simpson([&](double t) { return t * t * w(t); }, -1.0, 1.0, 2000);
  return num / simpson(w, -1.0, 1.0, 2000);
}

inline double simpson_m2_n2(double beta, double omega) {
  // p0 = u, p2 = (1 - u) v maps the unit square onto the simplex with Jacobian (1 - u)
  auto integrand = [&](bool moment) {
    return simpson(
        [&](double u) {
          return simpson(
              [&](double v) {
                const double p0 = u, p2 = (1.0 - u) * v;
                const double m = p0 - p2, d = p0 + p2 - m * m;
                const double w = std::exp(-2.0 * beta * (1.0 - m * m + (omega - 1.0) * d)) * (1.0 - u);
                return moment ? m * m * w : w;
              },
              0.0, 1.0, 800);
        },
        0.0, 1.0, 800);
  };
  return integrand(true) / integrand(false);
}

}  // namespace oracle
