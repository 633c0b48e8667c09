#pragma once

// Wavefunctions of one or two particles on a periodic grid in one or two
// dimensions, optionally carrying a spin-1/2 factor per particle.
//
// Layout: index = spatial_index * spin_count + spin_index. The spatial index is
// row-major over (particle 0 axis 0, particle 0 axis 1, particle 1 axis 0, ...),
// first pair most significant. The spin index is row-major over particles with
// bit value 0 = up (+1/2).

#include <array>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "wfe/error.hpp"
#include "wfe/linalg.hpp"

namespace wfe {

struct GridShape {
  int particles = 1;
  int dims = 1;
  int points = 64;
  double half_width = 8.0;
  int spin_levels = 1;

  void validate() const {
    if (particles < 1 || particles > 2) throw DomainError("grid states hold 1 or 2 particles");
    if (dims < 1 || dims > 2) throw DomainError("grid states are 1D or 2D");
    if (points < 4 || points % 2 != 0) throw DomainError("grid points per axis must be even and >= 4");
    if (!(half_width > 0.0)) throw DomainError("box half-width must be positive");
    if (spin_levels != 1 && spin_levels != 2) throw DomainError("spin_levels is 1 or 2");
  }

  double spacing() const { return 2.0 * half_width / points; }
  int coordinate_axes() const { return particles * dims; }
  std::size_t spatial_size() const {
    std::size_t n = 1;
    for (int i = 0; i < coordinate_axes(); ++i) n *= static_cast<std::size_t>(points);
    return n;
  }
  std::size_t spin_count() const { return spin_levels == 2 ? (particles == 2 ? 4u : 2u) : 1u; }
  std::size_t size() const { return spatial_size() * spin_count(); }
  double measure() const { return std::pow(spacing(), coordinate_axes()); }
  StateSpace space() const { return {size(), measure()}; }

  double coordinate(int j) const { return -half_width + j * spacing(); }

  std::size_t stride(int particle, int axis) const {
    std::size_t s = spin_count();
    for (int i = coordinate_axes() - 1; i > particle * dims + axis; --i) s *= static_cast<std::size_t>(points);
    return s;
  }
  int coordinate_index(std::size_t index, int particle, int axis) const {
    return static_cast<int>((index / stride(particle, axis)) % static_cast<std::size_t>(points));
  }
  double position(std::size_t index, int particle, int axis) const {
    return coordinate(coordinate_index(index, particle, axis));
  }
  /// 0 = up, 1 = down for the given particle; always 0 without spin.
  int spin_bit(std::size_t index, int particle) const {
    if (spin_levels == 1) return 0;
    const std::size_t s = index % spin_count();
    return static_cast<int>((s >> (particles - 1 - particle)) & 1u);
  }

  friend bool operator==(const GridShape&, const GridShape&) = default;
};

class GridState {
 public:
  GridState(GridShape shape, Amplitudes amplitudes, std::vector<std::string> warnings = {})
      : shape_(shape), amps_(std::move(amplitudes)), warnings_(std::move(warnings)) {
    shape_.validate();
    if (amps_.size() != shape_.size()) {
      throw ShapeError("grid amplitude vector has length " + std::to_string(amps_.size()) + ", shape needs " +
                       std::to_string(shape_.size()));
    }
  }

  const GridShape& shape() const { return shape_; }
  std::size_t dim() const { return amps_.size(); }
  StateSpace space() const { return shape_.space(); }
  std::span<const cplx> amplitudes() const { return amps_; }
  /// Construction-time diagnostics (e.g. overlapping momentum branches).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  GridShape shape_;
  Amplitudes amps_;
  std::vector<std::string> warnings_;
};

using Point = std::array<double, 2>;
/// Single-particle spatial wavefunction; the second coordinate is ignored in 1D.
using Orbital = std::function<cplx(const Point&)>;
using SpinFactor = std::array<cplx, 2>;

/// exp(-|x-c|^2/(4 sigma^2)) exp(i k.x): |orbital|^2 has variance sigma^2 per axis.
inline Orbital gaussian_orbital(Point center, double sigma, Point k = {0.0, 0.0}) {
  return [=](const Point& x) {
    const double dx = x[0] - center[0], dy = x[1] - center[1];
    const double phase = k[0] * x[0] + k[1] * x[1];
    return std::exp(-(dx * dx + dy * dy) / (4.0 * sigma * sigma)) * std::polar(1.0, phase);
  };
}

/// Characteristic function of [c - r/2, c + r/2) along the first axis.
inline Orbital box_orbital(double center, double width) {
  return [=](const Point& x) {
    const double d = x[0] - center;
    return (d >= -width / 2.0 && d < width / 2.0) ? cplx{1.0} : cplx{0.0};
  };
}

inline Orbital shifted(Orbital f, double shift) {
  return [f = std::move(f), shift](const Point& x) { return f({x[0] - shift, x[1]}); };
}

/// One product branch of a many-particle state.
struct ProductBranch {
  cplx coefficient{1.0};
  std::vector<Orbital> orbitals;  // one per particle
  std::vector<SpinFactor> spins;  // one per particle, ignored without spin
};

/// sum_b coeff_b prod_p orbital_{b,p}(x_p) spin_{b,p}(s_p); not normalized.
inline Amplitudes tabulate(const GridShape& shape, const std::vector<ProductBranch>& branches) {
  shape.validate();
  Amplitudes a(shape.size());
  for (const auto& b : branches) {
    if (static_cast<int>(b.orbitals.size()) != shape.particles) {
      throw ShapeError("branch needs one orbital per particle");
    }
    if (shape.spin_levels == 2 && static_cast<int>(b.spins.size()) != shape.particles) {
      throw ShapeError("branch needs one spin factor per particle");
    }
    // tabulate each orbital once on the single-particle grid
    const std::size_t single = shape.dims == 1 ? static_cast<std::size_t>(shape.points)
                                               : static_cast<std::size_t>(shape.points) * shape.points;
    std::vector<Amplitudes> tables(shape.particles, Amplitudes(single));
    for (int p = 0; p < shape.particles; ++p) {
      for (std::size_t s = 0; s < single; ++s) {
        Point x{0.0, 0.0};
        if (shape.dims == 1) {
          x[0] = shape.coordinate(static_cast<int>(s));
        } else {
          x[0] = shape.coordinate(static_cast<int>(s / shape.points));
          x[1] = shape.coordinate(static_cast<int>(s % shape.points));
        }
        tables[p][s] = b.orbitals[p](x);
      }
    }
    for (std::size_t i = 0; i < a.size(); ++i) {
      cplx v = b.coefficient;
      for (int p = 0; p < shape.particles; ++p) {
        std::size_t s = static_cast<std::size_t>(shape.coordinate_index(i, p, 0));
        if (shape.dims == 2) s = s * shape.points + shape.coordinate_index(i, p, 1);
        v *= tables[p][s];
        if (shape.spin_levels == 2) v *= b.spins[p][shape.spin_bit(i, p)];
      }
      a[i] += v;
    }
  }
  return a;
}

inline GridState build_grid_state(const GridShape& shape, const std::vector<ProductBranch>& branches) {
  auto a = tabulate(shape, branches);
  normalize(shape.space(), a);
  return {shape, std::move(a)};
}

/// Fraction of a single-particle orbital's mass in the outer tenth of the box
/// on any axis; a proxy for wrap-around across the periodic boundary.
inline double boundary_mass(const GridShape& shape, const Orbital& f) {
  GridShape one = shape;
  one.particles = 1;
  one.spin_levels = 1;
  auto a = tabulate(one, {{1.0, {f}, {}}});
  double total = 0.0, edge = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double w = std::norm(a[i]);
    total += w;
    bool outer = false;
    for (int ax = 0; ax < one.dims; ++ax) outer = outer || std::abs(one.position(i, 0, ax)) > 0.9 * one.half_width;
    if (outer) edge += w;
  }
  return total > 0.0 ? edge / total : 0.0;
}

struct BumpSpec {
  Orbital bump;       // centred at the origin
  double separation;  // R: branches sit at -R and +R along the first axis
};

inline constexpr double kBranchOverlapTolerance = 1e-12;

inline void require_separated(const GridShape& shape, const BumpSpec& spec) {
  const auto left = shifted(spec.bump, -spec.separation);
  const auto right = shifted(spec.bump, spec.separation);
  for (const auto& f : {left, right}) {
    const double tail = boundary_mass(shape, f);
    if (tail > kBranchOverlapTolerance) {
      throw DomainError("bump reaches the periodic boundary (edge mass " + format_short(tail) + ")");
    }
  }
  GridShape one = shape;
  one.particles = 1;
  one.spin_levels = 1;
  auto a = tabulate(one, {{1.0, {left}, {}}});
  auto b = tabulate(one, {{1.0, {right}, {}}});
  const double ov = std::abs(raw_dot(a, b)) / std::sqrt(std::real(raw_dot(a, a)) * std::real(raw_dot(b, b)));
  if (ov > kBranchOverlapTolerance) {
    throw DomainError("branches overlap (|<left|right>| = " + format_short(ov) + ")");
  }
}

/// prod_j (phi(x_j + R) + phi(x_j - R))/sqrt(2): many particles superposed,
/// no macroscopic dispersion.
inline GridState build_mqp_state(const GridShape& shape, const BumpSpec& spec) {
  require_separated(shape, spec);
  const auto left = shifted(spec.bump, -spec.separation);
  const auto right = shifted(spec.bump, spec.separation);
  Orbital two_bump = [left, right](const Point& x) { return (left(x) + right(x)) / std::sqrt(2.0); };
  ProductBranch b{1.0, std::vector<Orbital>(shape.particles, two_bump),
                  std::vector<SpinFactor>(shape.particles, SpinFactor{1.0, 0.0})};
  return build_grid_state(shape, {b});
}

/// alpha prod_j phi(x_j + R) + beta e^{i gamma} prod_j phi(x_j - R).
inline GridState build_cat_state(const GridShape& shape, const BumpSpec& spec, double alpha = 1.0 / std::sqrt(2.0),
                                 double beta = 1.0 / std::sqrt(2.0), double gamma = 0.0) {
  require_separated(shape, spec);
  const auto left = shifted(spec.bump, -spec.separation);
  const auto right = shifted(spec.bump, spec.separation);
  const std::vector<SpinFactor> up(shape.particles, SpinFactor{1.0, 0.0});
  return build_grid_state(shape, {{alpha, std::vector<Orbital>(shape.particles, left), up},
                                  {beta * std::polar(1.0, gamma), std::vector<Orbital>(shape.particles, right), up}});
}

/// alpha psi_q(p - p0)|+> + beta e^{i gamma} psi_q(p + p0)|->, built in position
/// space. psi_q has momentum variance q^2, i.e. position profile exp(-q^2 x^2).
inline GridState build_momentum_cat(const GridShape& shape, double q, double p0, double alpha, double beta,
                                    double gamma) {
  if (shape.particles != 1 || shape.dims != 1 || shape.spin_levels != 2) {
    throw ShapeError("momentum cat lives on a 1-particle 1D grid with spin");
  }
  if (std::abs(alpha * alpha + beta * beta - 1.0) > 1e-12) throw DomainError("need alpha^2 + beta^2 = 1");
  if (!(q > 0.0)) throw DomainError("momentum width q must be positive");
  const double sigma_x = 1.0 / (2.0 * q);
  std::vector<std::string> warnings;
  // overlap of the two momentum bumps: exp(-p0^2 / (2 q^2))
  const double overlap = std::exp(-p0 * p0 / (2.0 * q * q));
  if (overlap > 1e-10 && alpha != 0.0 && beta != 0.0) {
    warnings.push_back("momentum branches overlap: " + format_short(overlap));
  }
  const double k_max = std::numbers::pi / shape.spacing();
  if (std::abs(p0) + 8.0 * q > k_max) warnings.push_back("momentum bump close to the grid band edge");
  std::vector<ProductBranch> branches;
  if (alpha != 0.0) branches.push_back({alpha, {gaussian_orbital({0, 0}, sigma_x, {p0, 0})}, {SpinFactor{1.0, 0.0}}});
  if (beta != 0.0) {
    branches.push_back(
        {beta * std::polar(1.0, gamma), {gaussian_orbital({0, 0}, sigma_x, {-p0, 0})}, {SpinFactor{0.0, 1.0}}});
  }
  // each branch normalized separately so that spin probabilities are alpha^2, beta^2
  Amplitudes total(shape.size());
  for (auto& b : branches) {
    const cplx c = b.coefficient;
    b.coefficient = 1.0;
    auto a = tabulate(shape, {b});
    normalize(shape.space(), a);
    axpy(c, a, total);
  }
  normalize(shape.space(), total);
  return {shape, std::move(total), std::move(warnings)};
}

}  // namespace wfe
