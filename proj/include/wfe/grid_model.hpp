#pragma once

// Linear grid Hamiltonian: kinetic + sum_p v(x_p) + (k_pair / 2)|x_1 - x_2|^2.

#include <functional>
#include <memory>
#include <vector>

#include "wfe/grid_operators.hpp"
#include "wfe/model.hpp"
#include "wfe/operators.hpp"

namespace wfe {

struct GridHamiltonianSpec {
  double mass = 1.0;
  /// External single-particle potential; empty means none.
  std::function<double(const Point&)> potential;
  /// Harmonic pair coupling for two-particle grids.
  double pair_stiffness = 0.0;
};

inline LinearAction grid_hamiltonian(std::shared_ptr<const GridOperators> ops, const GridHamiltonianSpec& spec) {
  if (!(spec.mass > 0.0)) throw DomainError("mass must be positive");
  const auto& shape = ops->shape();
  if (spec.pair_stiffness != 0.0 && shape.particles != 2) throw ShapeError("pair coupling needs two particles");
  std::vector<double> diag(shape.size(), 0.0);
  for (std::size_t i = 0; i < diag.size(); ++i) {
    double v = 0.0;
    if (spec.potential) {
      for (int p = 0; p < shape.particles; ++p) {
        Point x{shape.position(i, p, 0), shape.dims == 2 ? shape.position(i, p, 1) : 0.0};
        v += spec.potential(x);
      }
    }
    if (spec.pair_stiffness != 0.0) {
      double d2 = 0.0;
      for (int a = 0; a < shape.dims; ++a) {
        const double d = shape.position(i, 0, a) - shape.position(i, 1, a);
        d2 += d * d;
      }
      v += 0.5 * spec.pair_stiffness * d2;
    }
    diag[i] = v;
  }
  auto d = std::make_shared<const std::vector<double>>(std::move(diag));
  const double mass = spec.mass;
  return [ops, d, mass](std::span<const cplx> in, std::span<cplx> out) {
    ops->kinetic(in, out, mass);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] += (*d)[i] * in[i];
  };
}

/// Model with the WFE family summed over every particle of the grid.
inline ModelSpec grid_model(std::shared_ptr<const GridOperators> ops, const GridHamiltonianSpec& spec, double w,
                            FamilyKind kind) {
  return {ops->space(), grid_hamiltonian(ops, spec), w,
          family_action(ops, OperatorFamily::particles(kind, ops->shape().particles))};
}

}  // namespace wfe
