#pragma once

#include <algorithm>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "wfe/grid_operators.hpp"
#include "wfe/spin_state.hpp"

namespace wfe {

enum class FamilyKind { PositionX, MomentumPx, AngularMomentumLz, SpinZ, TotalJz };

inline std::string_view to_string(FamilyKind k) {
  switch (k) {
    case FamilyKind::PositionX: return "PositionX";
    case FamilyKind::MomentumPx: return "MomentumPx";
    case FamilyKind::AngularMomentumLz: return "AngularMomentumLz";
    case FamilyKind::SpinZ: return "SpinZ";
    case FamilyKind::TotalJz: return "TotalJz";
  }
  return "?";
}

inline FamilyKind family_kind_from_string(std::string_view s) {
  for (auto k : {FamilyKind::PositionX, FamilyKind::MomentumPx, FamilyKind::AngularMomentumLz, FamilyKind::SpinZ,
                 FamilyKind::TotalJz}) {
    if (to_string(k) == s) return k;
  }
  throw DomainError("unknown operator family '" + std::string(s) + "'");
}

/// The operators O_i summed in the dispersion functional: one kind, applied
/// at each listed site (spin index or particle index).
struct OperatorFamily {
  FamilyKind kind = FamilyKind::SpinZ;
  std::vector<int> sites;

  static OperatorFamily spins(int first, int last) {
    OperatorFamily f{FamilyKind::SpinZ, {}};
    for (int i = first; i <= last; ++i) f.sites.push_back(i);
    return f;
  }
  static OperatorFamily particles(FamilyKind kind, int count) {
    OperatorFamily f{kind, {}};
    for (int i = 0; i < count; ++i) f.sites.push_back(i);
    return f;
  }
  int size() const { return static_cast<int>(sites.size()); }
};

/// Sum_i O_i as an action, with the family size N_f.
struct FamilyAction {
  LinearAction apply;
  int sites = 0;
};

inline void require_sites(const OperatorFamily& f, int available, std::string_view what) {
  if (f.sites.empty()) throw ShapeError("operator family lists no sites");
  for (int s : f.sites) {
    if (s < 0 || s >= available) {
      throw ShapeError("family site " + std::to_string(s) + " does not exist in " + std::string(what));
    }
  }
  auto sorted = f.sites;
  std::sort(sorted.begin(), sorted.end());
  if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end()) throw ShapeError("family lists a site twice");
}

inline FamilyAction family_action(const SpinState& s, const OperatorFamily& f) {
  if (f.kind != FamilyKind::SpinZ) throw ShapeError("spin states only support the SpinZ family");
  require_sites(f, s.n_spins(), "the spin state");
  std::vector<double> diag(s.dim());
  for (std::uint64_t c = 0; c < diag.size(); ++c) {
    double v = 0.0;
    for (int i : f.sites) v += SpinState::spin_value(c, i);
    diag[c] = v;
  }
  auto d = std::make_shared<const std::vector<double>>(std::move(diag));
  return {[d](std::span<const cplx> in, std::span<cplx> out) {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = (*d)[i] * in[i];
          },
          f.size()};
}

/// On the reduced basis a SpinZ family must respect the apparatus permutation
/// symmetry: it may contain the qubit (site 0) and either all apparatus spins or none.
inline FamilyAction family_action(const SymmetricState& s, const OperatorFamily& f) {
  if (f.kind != FamilyKind::SpinZ) throw ShapeError("symmetric spin states only support the SpinZ family");
  require_sites(f, s.n_spins(), "the spin state");
  const int m = s.apparatus_size();
  const bool qubit = std::find(f.sites.begin(), f.sites.end(), 0) != f.sites.end();
  const int apparatus = f.size() - (qubit ? 1 : 0);
  if (apparatus != 0 && apparatus != m) {
    throw ShapeError("a partial apparatus family breaks the permutation symmetry of the reduced basis");
  }
  std::vector<double> diag(s.dim());
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) {
      double v = 0.0;
      if (qubit) v += SymmetricState::qubit_spin(q);
      if (apparatus == m) v += SymmetricState::apparatus_spin(k, m);
      diag[SymmetricState::index(q, k, m)] = v;
    }
  }
  auto d = std::make_shared<const std::vector<double>>(std::move(diag));
  return {[d](std::span<const cplx> in, std::span<cplx> out) {
            for (std::size_t i = 0; i < in.size(); ++i) out[i] = (*d)[i] * in[i];
          },
          f.size()};
}

/// Single-site operator O_site of the family on a grid.
inline LinearAction grid_site_operator(std::shared_ptr<const GridOperators> ops, FamilyKind kind, int site) {
  switch (kind) {
    case FamilyKind::PositionX:
      return [ops, site](std::span<const cplx> in, std::span<cplx> out) { ops->position(in, out, site, 0); };
    case FamilyKind::MomentumPx:
      return [ops, site](std::span<const cplx> in, std::span<cplx> out) { ops->momentum(in, out, site, 0); };
    case FamilyKind::AngularMomentumLz:
      return [ops, site](std::span<const cplx> in, std::span<cplx> out) { ops->angular_momentum(in, out, site); };
    case FamilyKind::SpinZ:
      return [ops, site](std::span<const cplx> in, std::span<cplx> out) { ops->spin_z(in, out, site); };
    case FamilyKind::TotalJz:
      return [ops, site](std::span<const cplx> in, std::span<cplx> out) {
        Amplitudes s(in.size());
        ops->angular_momentum(in, out, site);
        ops->spin_z(in, s, site);
        axpy(1.0, s, out);
      };
  }
  throw ShapeError("unknown family kind");
}

inline void require_compatible(const GridShape& shape, FamilyKind kind) {
  const bool spatial = kind != FamilyKind::SpinZ;
  const bool needs_2d = kind == FamilyKind::AngularMomentumLz || kind == FamilyKind::TotalJz;
  const bool needs_spin = kind == FamilyKind::SpinZ || kind == FamilyKind::TotalJz;
  if (needs_2d && shape.dims != 2) throw ShapeError(std::string(to_string(kind)) + " needs a 2D grid");
  if (needs_spin && shape.spin_levels != 2) throw ShapeError(std::string(to_string(kind)) + " needs spin-1/2 particles");
  (void)spatial;
}

inline FamilyAction family_action(std::shared_ptr<const GridOperators> ops, const OperatorFamily& f) {
  require_compatible(ops->shape(), f.kind);
  require_sites(f, ops->shape().particles, "the grid state");
  std::vector<LinearAction> terms;
  for (int s : f.sites) terms.push_back(grid_site_operator(ops, f.kind, s));
  return {[terms = std::move(terms)](std::span<const cplx> in, std::span<cplx> out) {
            std::fill(out.begin(), out.end(), cplx{0.0, 0.0});
            Amplitudes tmp(in.size());
            for (const auto& t : terms) {
              t(in, tmp);
              axpy(1.0, tmp, out);
            }
          },
          f.size()};
}

inline FamilyAction family_action(const GridState& s, const OperatorFamily& f) {
  return family_action(std::make_shared<const GridOperators>(s.shape()), f);
}

}  // namespace wfe
