#pragma once

// Energy functional E = E_QM + E_WFE with
//   E_QM  = <psi|H psi>
//   E_WFE = w (<psi|A^2 psi> - <psi|A psi>^2),   A = sum_i O_i.
// For normalized psi, E_WFE = w N_f^2 D with D the variance of A / N_f.
// All brackets are bare (not divided by the norm) so that the gradient
// below is exactly dE/dpsi* and the flow conserves the norm.

#include <random>
#include <string>

#include "wfe/linalg.hpp"
#include "wfe/operators.hpp"

namespace wfe {

struct ModelSpec {
  StateSpace space;
  LinearAction hamiltonian;
  double w = 0.0;
  FamilyAction family;
};

inline void validate(const ModelSpec& m) {
  if (!m.hamiltonian) throw ShapeError("model has no linear part");
  if (m.w < 0.0) throw DomainError("w must be non-negative");
  if (m.w > 0.0 && !m.family.apply) throw ShapeError("model with w > 0 needs an operator family");
}

inline void require_fits(const ModelSpec& m, std::span<const cplx> psi) {
  if (psi.size() != m.space.dim) {
    throw ShapeError("state has " + std::to_string(psi.size()) + " amplitudes, model expects " +
                     std::to_string(m.space.dim));
  }
}

struct EnergyParts {
  double qm = 0.0;
  double wfe = 0.0;
  double total() const { return qm + wfe; }
};

/// Bare first and second moments of A.
struct FamilyMoments {
  double mean = 0.0;
  double second = 0.0;
  double variance() const { return second - mean * mean; }
};

inline FamilyMoments family_moments(const StateSpace& space, const FamilyAction& family, std::span<const cplx> psi) {
  const auto a = apply_op(family.apply, psi);
  // <A^2> = <A psi|A psi> for self-adjoint A
  return {std::real(inner(space, psi, a)), squared_norm(space, a)};
}

inline EnergyParts energies(const ModelSpec& m, std::span<const cplx> psi) {
  require_fits(m, psi);
  EnergyParts e;
  e.qm = std::real(expectation(m.space, m.hamiltonian, psi));
  if (m.w > 0.0) e.wfe = m.w * family_moments(m.space, m.family, psi).variance();
  return e;
}

/// max |<a|H b> - <H a|b>| over a few random pairs, relative to |a||H b|.
template <class Rng>
double hermiticity_defect(const ModelSpec& m, Rng& rng, int pairs = 3) {
  std::normal_distribution<double> g;
  double worst = 0.0;
  for (int k = 0; k < pairs; ++k) {
    Amplitudes a(m.space.dim), b(m.space.dim);
    for (auto& z : a) z = {g(rng), g(rng)};
    for (auto& z : b) z = {g(rng), g(rng)};
    const auto ha = apply_op(m.hamiltonian, a);
    const auto hb = apply_op(m.hamiltonian, b);
    const double s = norm(m.space, a) * norm(m.space, hb) + 1e-300;
    worst = std::max(worst, std::abs(inner(m.space, a, hb) - inner(m.space, ha, b)) / s);
  }
  return worst;
}

}  // namespace wfe
