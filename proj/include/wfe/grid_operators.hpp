#pragma once

// Matrix-free position, spectral momentum, angular momentum and spin actions
// on GridState amplitudes (hbar = 1).
//
// The spectral derivative is the periodic sinc-interpolant derivative for an
// even number of points, with the Nyquist mode dropped:
//   D_jl = (pi / L) * (-1)^(j-l) / (2 tan(pi (j-l) / G)),  D_jj = 0.
// D is real antisymmetric, so P = -i D is Hermitian.

#include <cmath>
#include <numbers>
#include <vector>

#include "wfe/grid_state.hpp"

namespace wfe {

class GridOperators {
 public:
  explicit GridOperators(const GridShape& shape) : shape_(shape) {
    shape_.validate();
    const int g = shape_.points;
    coords_.resize(g);
    for (int j = 0; j < g; ++j) coords_[j] = shape_.coordinate(j);
    deriv_.assign(static_cast<std::size_t>(g) * g, 0.0);
    const double k = std::numbers::pi / shape_.half_width;
    for (int j = 0; j < g; ++j) {
      for (int l = 0; l < g; ++l) {
        if (j == l) continue;
        const int d = j - l;
        const double sign = (d % 2 == 0) ? 1.0 : -1.0;
        deriv_[static_cast<std::size_t>(j) * g + l] = k * sign / (2.0 * std::tan(std::numbers::pi * d / g));
      }
    }
  }

  const GridShape& shape() const { return shape_; }
  StateSpace space() const { return shape_.space(); }
  const std::vector<double>& derivative_matrix() const { return deriv_; }

  void position(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    check(in, out, particle, axis);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = shape_.position(i, particle, axis) * in[i];
  }

  void derivative(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    check(in, out, particle, axis);
    const std::size_t g = static_cast<std::size_t>(shape_.points);
    const std::size_t s = shape_.stride(particle, axis);
    const std::size_t blocks = in.size() / (g * s);
    std::vector<cplx> line(g);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t inner = 0; inner < s; ++inner) {
        const std::size_t base = b * g * s + inner;
        for (std::size_t l = 0; l < g; ++l) line[l] = in[base + l * s];
        for (std::size_t j = 0; j < g; ++j) {
          cplx acc{0.0, 0.0};
          const double* row = &deriv_[j * g];
          for (std::size_t l = 0; l < g; ++l) acc += row[l] * line[l];
          out[base + j * s] = acc;
        }
      }
    }
  }

  /// P = -i d/dx along one axis of one particle.
  void momentum(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    derivative(in, out, particle, axis);
    for (auto& z : out) z *= cplx{0.0, -1.0};
  }

  /// L_z = X P_y - Y P_x for a 2D particle.
  void angular_momentum(std::span<const cplx> in, std::span<cplx> out, int particle) const {
    if (shape_.dims != 2) throw ShapeError("L_z needs a 2D grid");
    Amplitudes py(in.size()), px(in.size());
    momentum(in, py, particle, 1);
    momentum(in, px, particle, 0);
    for (std::size_t i = 0; i < in.size(); ++i) {
      out[i] = shape_.position(i, particle, 0) * py[i] - shape_.position(i, particle, 1) * px[i];
    }
  }

  void spin_z(std::span<const cplx> in, std::span<cplx> out, int particle) const {
    if (shape_.spin_levels != 2) throw ShapeError("S_z needs spin-1/2 particles");
    check(in, out, particle, 0);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (shape_.spin_bit(i, particle) ? -0.5 : 0.5) * in[i];
  }

  /// -(1/2m) sum over all particles and axes of d^2/dx^2, using D twice so the
  /// kinetic energy is exactly P^2/2m for the momentum operator above.
  void kinetic(std::span<const cplx> in, std::span<cplx> out, double mass) const {
    Amplitudes d1(in.size()), d2(in.size());
    std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
    for (int p = 0; p < shape_.particles; ++p) {
      for (int a = 0; a < shape_.dims; ++a) {
        derivative(in, d1, p, a);
        derivative(d1, d2, p, a);
        axpy(-1.0 / (2.0 * mass), d2, out);
      }
    }
  }

 private:
  void check(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    if (in.size() != shape_.size() || out.size() != shape_.size()) throw ShapeError("amplitudes do not match grid");
    if (particle < 0 || particle >= shape_.particles) throw ShapeError("no such particle");
    if (axis < 0 || axis >= shape_.dims) throw ShapeError("no such axis");
  }

  GridShape shape_;
  std::vector<double> coords_;
  std::vector<double> deriv_;
};

}  // namespace wfe
