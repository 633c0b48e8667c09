#pragma once

#include <bit>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "wfe/grid_operators.hpp"
#include "wfe/model.hpp"
#include "wfe/operators.hpp"
#include "wfe/spin_state.hpp"

namespace wfe {

/// Variance of A / N_f where A is the summed family.
inline double dispersion(const StateSpace& space, const FamilyAction& family, std::span<const cplx> psi) {
  const double nf = family.sites;
  return family_moments(space, family, psi).variance() / (nf * nf);
}

inline double dispersion(const SpinState& s, const OperatorFamily& f) {
  return dispersion(s.space(), family_action(s, f), s.amplitudes());
}
inline double dispersion(const SymmetricState& s, const OperatorFamily& f) {
  return dispersion(s.space(), family_action(s, f), s.amplitudes());
}
inline double dispersion(const GridState& s, const OperatorFamily& f) {
  return dispersion(s.space(), family_action(s, f), s.amplitudes());
}

enum class SpinValues { Half, One };

inline double spin_scale(SpinValues v) { return v == SpinValues::Half ? 1.0 : 2.0; }

/// Mean per-site spin expectation.
inline double magnetization(const SpinState& s, SpinValues v = SpinValues::Half) {
  const auto a = s.amplitudes();
  double acc = 0.0;
  for (std::uint64_t c = 0; c < a.size(); ++c) {
    const int down = std::popcount(c);
    acc += std::norm(a[c]) * 0.5 * (s.n_spins() - 2 * down);
  }
  return spin_scale(v) * acc / s.n_spins();
}

inline double magnetization(const SymmetricState& s, SpinValues v = SpinValues::Half) {
  const int m = s.apparatus_size();
  double acc = 0.0;
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) {
      acc += std::norm(s.at(q, k)) * (SymmetricState::qubit_spin(q) + SymmetricState::apparatus_spin(k, m));
    }
  }
  return spin_scale(v) * acc / s.n_spins();
}

inline double magnetization(const GridState& s, SpinValues v = SpinValues::Half) {
  const auto& shape = s.shape();
  if (shape.spin_levels != 2) throw ShapeError("magnetization needs a state with spin");
  const auto a = s.amplitudes();
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double sz = 0.0;
    for (int p = 0; p < shape.particles; ++p) sz += shape.spin_bit(i, p) ? -0.5 : 0.5;
    acc += std::norm(a[i]) * sz;
  }
  return spin_scale(v) * shape.measure() * acc / shape.particles;
}

/// Probability distribution of the readout S over n = 0..M.
inline std::vector<double> readout_distribution(const SymmetricState& s) {
  const int m = s.apparatus_size();
  std::vector<double> p(m + 1, 0.0);
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) p[k] += std::norm(s.at(q, k));
  }
  return p;
}

inline std::vector<double> readout_distribution(const SpinState& s) {
  const int m = s.n_spins() - 1;
  std::vector<double> p(m + 1, 0.0);
  const auto a = s.amplitudes();
  for (std::uint64_t c = 0; c < a.size(); ++c) p[std::popcount(c >> 1)] += std::norm(a[c]);
  return p;
}

inline double readout_mean(const std::vector<double>& dist) {
  const int m = static_cast<int>(dist.size()) - 1;
  double acc = 0.0;
  for (int k = 0; k <= m; ++k) acc += dist[k] * SymmetricState::apparatus_spin(k, m);
  return acc;
}

struct WellOccupation {
  double left = 0.0;
  double right = 0.0;
};

/// Mass with S < -split and S > split; the band |S| <= split is counted in neither.
inline WellOccupation well_occupations(const std::vector<double>& dist, double split) {
  const int m = static_cast<int>(dist.size()) - 1;
  const double r = m / 2.0;
  if (!(split > 0.0 && split < r)) {
    throw DomainError("split must lie in (0, R) with R = " + format_short(r));
  }
  WellOccupation w;
  for (int k = 0; k <= m; ++k) {
    const double s = SymmetricState::apparatus_spin(k, m);
    if (s > split) w.right += dist[k];
    if (s < -split) w.left += dist[k];
  }
  return w;
}

inline WellOccupation well_occupations(const SymmetricState& s, double split) {
  return well_occupations(readout_distribution(s), split);
}
inline WellOccupation well_occupations(const SymmetricState& s) {
  return well_occupations(s, s.readout_range() / 2.0);
}
inline WellOccupation well_occupations(const SpinState& s, double split) {
  return well_occupations(readout_distribution(s), split);
}

struct ComMomentum {
  std::vector<double> com;       // <(1/N) sum_i X_i> per axis
  std::vector<double> momentum;  // <sum_i P_i> per axis
};

inline ComMomentum com_and_momentum(const GridOperators& ops, std::span<const cplx> psi) {
  const auto& shape = ops.shape();
  ComMomentum r{std::vector<double>(shape.dims, 0.0), std::vector<double>(shape.dims, 0.0)};
  Amplitudes tmp(psi.size());
  for (int a = 0; a < shape.dims; ++a) {
    for (int p = 0; p < shape.particles; ++p) {
      ops.position(psi, tmp, p, a);
      r.com[a] += std::real(inner(ops.space(), psi, tmp)) / shape.particles;
      ops.momentum(psi, tmp, p, a);
      r.momentum[a] += std::real(inner(ops.space(), psi, tmp));
    }
  }
  return r;
}

inline ComMomentum com_and_momentum(const GridState& s) {
  return com_and_momentum(GridOperators(s.shape()), s.amplitudes());
}

/// |<v'(x)> - v'(<x>)| / max |v'| over the support of the particle's density.
/// Returns 0 when v' vanishes on the support.
inline double classical_force_gap(const GridState& s, const std::function<double(double)>& force_derivative,
                                  int particle = 0, int axis = 0) {
  const auto& shape = s.shape();
  if (particle < 0 || particle >= shape.particles || axis < 0 || axis >= shape.dims) {
    throw ShapeError("no such particle or axis");
  }
  const auto a = s.amplitudes();
  std::vector<double> density(shape.points, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) density[shape.coordinate_index(i, particle, axis)] += std::norm(a[i]);
  double total = 0.0, mean_x = 0.0, mean_f = 0.0, peak = 0.0;
  for (int j = 0; j < shape.points; ++j) {
    total += density[j];
    peak = std::max(peak, density[j]);
  }
  double scale = 0.0;
  for (int j = 0; j < shape.points; ++j) {
    const double x = shape.coordinate(j);
    const double f = force_derivative(x);
    mean_x += density[j] * x / total;
    mean_f += density[j] * f / total;
    if (density[j] > 1e-12 * peak) scale = std::max(scale, std::abs(f));
  }
  if (scale == 0.0) return 0.0;
  return std::abs(mean_f - force_derivative(mean_x)) / scale;
}

enum class MacroMode { Cat, Product };

/// Back-of-envelope WFE energy in joules (w in J/m^2, R in m):
/// cat branches separated by 2R cost w N^2 R^2, a product of N single-particle
/// superpositions of size R costs w N R^2.
inline double macro_estimate(double w, double n, double r, MacroMode mode = MacroMode::Cat) {
  if (!(w > 0.0) || !(n > 0.0) || !(r > 0.0)) throw DomainError("macro_estimate needs positive w, N, R");
  const double v = mode == MacroMode::Cat ? w * n * n * r * r : w * n * r * r;
  // trim product round-off so decimal inputs give decimal outputs
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.15g", v);
  return std::strtod(buf, nullptr);
}

/// One sample of a trajectory. Spin runs fill m, p_left, p_right and readout;
/// grid runs fill com and momentum.
struct ObservableReport {
  double t = 0.0;
  double norm = 0.0;
  double E_qm = 0.0;
  double E_wfe = 0.0;
  double E_total = 0.0;
  double m = 0.0;
  double D = 0.0;
  double p_left = 0.0;
  double p_right = 0.0;
  double readout = 0.0;  // <S>
  std::vector<double> com;
  std::vector<double> momentum;

  bool is_grid() const { return !com.empty(); }
};

inline std::vector<std::string> report_columns(const ObservableReport& r) {
  std::vector<std::string> c{"t", "norm", "E_qm", "E_wfe", "E_total"};
  if (r.is_grid()) {
    const char* axis[] = {"x", "y"};
    for (std::size_t a = 0; a < r.com.size(); ++a) c.push_back(std::string("com_") + axis[a]);
    c.push_back("D");
    for (std::size_t a = 0; a < r.momentum.size(); ++a) c.push_back(std::string("mom_") + axis[a]);
  } else {
    for (const char* k : {"m", "D", "p_left", "p_right", "S"}) c.push_back(k);
  }
  return c;
}

inline std::vector<double> report_values(const ObservableReport& r) {
  std::vector<double> v{r.t, r.norm, r.E_qm, r.E_wfe, r.E_total};
  if (r.is_grid()) {
    v.insert(v.end(), r.com.begin(), r.com.end());
    v.push_back(r.D);
    v.insert(v.end(), r.momentum.begin(), r.momentum.end());
  } else {
    v.insert(v.end(), {r.m, r.D, r.p_left, r.p_right, r.readout});
  }
  return v;
}

inline std::string csv_header(const ObservableReport& r) {
  std::string h;
  for (const auto& c : report_columns(r)) h += (h.empty() ? "" : ",") + c;
  return h + "\n";
}

inline std::string csv_row(const ObservableReport& r) {
  std::string s;
  for (double v : report_values(r)) s += (s.empty() ? "" : ",") + format_number(v);
  return s + "\n";
}

/// Maps (t, amplitudes) to a report; built by whoever knows the state type.
using Observer = std::function<ObservableReport(double, std::span<const cplx>)>;

inline void fill_energies(ObservableReport& r, const ModelSpec& model, std::span<const cplx> psi) {
  const auto e = energies(model, psi);
  r.norm = norm(model.space, psi);
  r.E_qm = e.qm;
  r.E_wfe = e.wfe;
  r.E_total = e.total();
  if (model.family.apply) r.D = dispersion(model.space, model.family, psi);
}

/// Observer for reduced spin states; `split` defaults to R/2.
inline Observer symmetric_observer(const ModelSpec& model, int n_spins, double split = -1.0) {
  if (split < 0.0) split = (n_spins - 1) / 4.0;
  return [model, n_spins, split](double t, std::span<const cplx> psi) {
    ObservableReport r;
    r.t = t;
    fill_energies(r, model, psi);
    SymmetricState s(n_spins, Amplitudes(psi.begin(), psi.end()));
    r.m = magnetization(s);
    const auto dist = readout_distribution(s);
    const auto w = well_occupations(dist, split);
    r.p_left = w.left;
    r.p_right = w.right;
    r.readout = readout_mean(dist);
    return r;
  };
}

inline Observer full_spin_observer(const ModelSpec& model, int n_spins, double split = -1.0) {
  if (split < 0.0) split = (n_spins - 1) / 4.0;
  return [model, n_spins, split](double t, std::span<const cplx> psi) {
    ObservableReport r;
    r.t = t;
    fill_energies(r, model, psi);
    SpinState s(n_spins, Amplitudes(psi.begin(), psi.end()));
    r.m = magnetization(s);
    const auto dist = readout_distribution(s);
    const auto w = well_occupations(dist, split);
    r.p_left = w.left;
    r.p_right = w.right;
    r.readout = readout_mean(dist);
    return r;
  };
}

inline Observer grid_observer(const ModelSpec& model, std::shared_ptr<const GridOperators> ops) {
  return [model, ops](double t, std::span<const cplx> psi) {
    ObservableReport r;
    r.t = t;
    fill_energies(r, model, psi);
    auto cm = com_and_momentum(*ops, psi);
    r.com = std::move(cm.com);
    r.momentum = std::move(cm.momentum);
    return r;
  };
}

}  // namespace wfe
