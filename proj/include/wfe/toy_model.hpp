#pragma once

// Qubit + apparatus measurement model:
//   H = -(1/m) Lap + V(S) + alpha_c s_1 S,   V(x) = (deltaV / R^4)(x^2 - R^2)^2,
// with S = sum of the apparatus spins, R = (N-1)/2 and Lap = sum_i (flip_i - 1).

#include <Eigen/Dense>
#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "wfe/dynamics.hpp"
#include "wfe/observables.hpp"
#include "wfe/parallel.hpp"
#include "wfe/spin_state.hpp"

namespace wfe {

struct ClassifyThresholds {
  double cat = 0.25;       // min(p_left, p_right) at or above: cat
  double dominant = 0.7;   // one side at or above: left / right
};

struct ToyParams {
  int N = 10;
  double mass = 8.0;
  double deltaV = 0.5;
  /// NaN selects -deltaV / R.
  double alpha_c = std::numeric_limits<double>::quiet_NaN();
  double w = 0.1;
  double center = 0.5;
  QubitAmplitudes qubit{};
  bool include_qubit_in_wfe = true;
  double rho = 1e-3;
  double T = 7.0;
  double dt = 0.01;
  /// Non-positive selects R/2.
  double split = 0.0;
  ClassifyThresholds thresholds{};

  double R() const { return (N - 1) / 2.0; }
  double coupling() const { return std::isnan(alpha_c) ? -deltaV / R() : alpha_c; }
  double well_split() const { return split > 0.0 ? split : R() / 2.0; }

  void validate() const {
    if (N < 2) throw DomainError("N must be at least 2 (qubit plus one apparatus spin)");
    if (!(mass > 0.0)) throw DomainError("mass must be positive");
    if (!(deltaV > 0.0)) throw DomainError("deltaV must be positive");
    if (w < 0.0) throw DomainError("w must be non-negative");
    if (rho < 0.0) throw DomainError("rho must be non-negative");
    if (center < 0.0 || center > R()) throw DomainError("center must lie in [0, R]");
    require_unit_qubit(qubit);
    if (!(well_split() < R())) throw DomainError("split must lie in (0, R)");
  }
};

inline double toy_potential(double s, const ToyParams& p) {
  const double r = p.R();
  const double d = s * s - r * r;
  return p.deltaV / (r * r * r * r) * d * d;
}

/// Reduced-basis Laplacian on 2(M+1) amplitudes.
inline void toy_laplacian(int n_spins, std::span<const cplx> in, std::span<cplx> out) {
  const int m = n_spins - 1;
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) {
      const auto i = SymmetricState::index(q, k, m);
      cplx v = in[SymmetricState::index(1 - q, k, m)] - in[i] - static_cast<double>(m) * in[i];
      if (k > 0) v += std::sqrt(static_cast<double>(k) * (m - k + 1)) * in[SymmetricState::index(q, k - 1, m)];
      if (k < m) v += std::sqrt(static_cast<double>(k + 1) * (m - k)) * in[SymmetricState::index(q, k + 1, m)];
      out[i] = v;
    }
  }
}

inline SymmetricState toy_laplacian(const SymmetricState& s) {
  Amplitudes out(s.dim());
  toy_laplacian(s.n_spins(), s.amplitudes(), out);
  return {s.n_spins(), std::move(out)};
}

/// Full-space Laplacian: each site contributes psi(flip_i s) - psi(s).
inline void toy_laplacian_full(int n_spins, std::span<const cplx> in, std::span<cplx> out) {
  for (std::uint64_t c = 0; c < in.size(); ++c) {
    cplx v = -static_cast<double>(n_spins) * in[c];
    for (int i = 0; i < n_spins; ++i) v += in[c ^ (std::uint64_t{1} << i)];
    out[c] = v;
  }
}

inline SpinState toy_laplacian(const SpinState& s) {
  Amplitudes out(s.dim());
  toy_laplacian_full(s.n_spins(), s.amplitudes(), out);
  return {s.n_spins(), std::move(out)};
}

/// Diagonal V(S) + alpha_c s_1 S on the reduced basis.
inline std::vector<double> toy_diagonal(const ToyParams& p) {
  const int m = p.N - 1;
  std::vector<double> d(2 * static_cast<std::size_t>(p.N));
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) {
      const double s = SymmetricState::apparatus_spin(k, m);
      d[SymmetricState::index(q, k, m)] = toy_potential(s, p) + p.coupling() * SymmetricState::qubit_spin(q) * s;
    }
  }
  return d;
}

inline LinearAction toy_hamiltonian(const ToyParams& p) {
  p.validate();
  auto diag = std::make_shared<const std::vector<double>>(toy_diagonal(p));
  const int n = p.N;
  const double kin = -1.0 / p.mass;
  return [diag, n, kin](std::span<const cplx> in, std::span<cplx> out) {
    toy_laplacian(n, in, out);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = kin * out[i] + (*diag)[i] * in[i];
  };
}

inline LinearAction toy_hamiltonian_full(const ToyParams& p) {
  p.validate();
  if (p.N > kMaxFullSpins) throw DomainError("full-space toy model limited to N <= 24");
  const int n = p.N;
  std::vector<double> diag(std::size_t{1} << n);
  for (std::uint64_t c = 0; c < diag.size(); ++c) {
    const int q = static_cast<int>(c & 1u);
    const double s = SymmetricState::apparatus_spin(std::popcount(c >> 1), n - 1);
    diag[c] = toy_potential(s, p) + p.coupling() * SymmetricState::qubit_spin(q) * s;
  }
  auto d = std::make_shared<const std::vector<double>>(std::move(diag));
  const double kin = -1.0 / p.mass;
  return [d, n, kin](std::span<const cplx> in, std::span<cplx> out) {
    toy_laplacian_full(n, in, out);
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = kin * out[i] + (*d)[i] * in[i];
  };
}

inline SymmetricState toy_hamiltonian_apply(const SymmetricState& s, const ToyParams& p) {
  if (s.n_spins() != p.N) throw ShapeError("state and parameters disagree on N");
  return {s.n_spins(), apply_op(toy_hamiltonian(p), s.amplitudes())};
}

inline SpinState toy_hamiltonian_apply(const SpinState& s, const ToyParams& p) {
  if (s.n_spins() != p.N) throw ShapeError("state and parameters disagree on N");
  return {s.n_spins(), apply_op(toy_hamiltonian_full(p), s.amplitudes())};
}

inline OperatorFamily toy_family(const ToyParams& p) {
  return OperatorFamily::spins(p.include_qubit_in_wfe ? 0 : 1, p.N - 1);
}

inline ModelSpec toy_model(const ToyParams& p) {
  p.validate();
  const int n = p.N;
  SymmetricState probe(n, Amplitudes(2 * static_cast<std::size_t>(n)));
  return {probe.space(), toy_hamiltonian(p), p.w, family_action(probe, toy_family(p))};
}

inline ModelSpec toy_model_full(const ToyParams& p) {
  p.validate();
  const int n = p.N;
  SpinState probe(n, Amplitudes(std::size_t{1} << n));
  return {probe.space(), toy_hamiltonian_full(p), p.w, family_action(probe, toy_family(p))};
}

inline Eigen::MatrixXd toy_dense_hamiltonian(const ToyParams& p) {
  const auto h = toy_hamiltonian(p);
  const auto dim = 2 * static_cast<std::size_t>(p.N);
  Eigen::MatrixXd dense(dim, dim);
  Amplitudes e(dim), col(dim);
  for (std::size_t j = 0; j < dim; ++j) {
    std::fill(e.begin(), e.end(), cplx{});
    e[j] = 1.0;
    h(e, col);
    for (std::size_t i = 0; i < dim; ++i) dense(i, j) = col[i].real();
  }
  return dense;
}

/// Lowest eigenvalue of H_QM. The reduced sector contains the ground state
/// because the Laplacian term is minimized by symmetric states.
inline double toy_ground_energy(const ToyParams& p) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(toy_dense_hamiltonian(p), Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

enum class Outcome { Cat, Left, Right, Undecided };

inline std::string_view to_string(Outcome o) {
  switch (o) {
    case Outcome::Cat: return "cat";
    case Outcome::Left: return "left";
    case Outcome::Right: return "right";
    case Outcome::Undecided: return "undecided";
  }
  return "?";
}

inline Outcome classify(double p_left, double p_right, const ClassifyThresholds& th = {}) {
  if (std::min(p_left, p_right) >= th.cat) return Outcome::Cat;
  if (p_left >= th.dominant) return Outcome::Left;
  if (p_right >= th.dominant) return Outcome::Right;
  return Outcome::Undecided;
}

inline SymmetricState toy_initial_state(const ToyParams& p, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return build_initial_toy(p.N, p.qubit, {p.center, p.rho}, rng);
}

struct MeasurementResult {
  TrajectoryRecord trajectory;
  Outcome outcome = Outcome::Undecided;
  double E_min = 0.0;
  double max_E_wfe = 0.0;
};

inline MeasurementResult run_measurement(const ToyParams& p, std::uint64_t seed, int record_every = 10,
                                         IntegratorOptions opt = {}) {
  p.validate();
  const auto model = toy_model(p);
  const auto psi0 = toy_initial_state(p, seed);
  MeasurementResult r;
  r.trajectory = evolve(psi0.amplitudes(), model, p.T, p.dt, symmetric_observer(model, p.N, p.well_split()),
                        record_every, opt);
  const auto& last = r.trajectory.reports.back();
  r.outcome = classify(last.p_left, last.p_right, p.thresholds);
  r.E_min = toy_ground_energy(p);
  for (const auto& rep : r.trajectory.reports) r.max_E_wfe = std::max(r.max_E_wfe, rep.E_wfe);
  return r;
}

struct SweepSpec {
  std::vector<int> N_list{6, 8, 10, 12, 14};
  std::vector<double> w_list{0.0, 0.05, 0.1, 0.2};
  int trials = 4;
  std::uint64_t seed = 1;
  ToyParams base{};
};

struct SweepCell {
  int N = 0;
  double w = 0.0;
  int trials = 0;
  double cat_fraction = 0.0;
  double left_fraction = 0.0;
  double right_fraction = 0.0;
  double undecided_fraction = 0.0;
  double mean_E_wfe_max = 0.0;
};

struct SweepSummaryRow {
  double w = 0.0;
  /// NaN when every N in the list still forms cats.
  double N_c = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
  std::vector<SweepCell> cells;  // w-major, then N
  std::vector<SweepSummaryRow> summary;
  /// d log N_c / d log w over rows with w > 0 and finite N_c; NaN with fewer than two.
  double log_log_slope = std::numeric_limits<double>::quiet_NaN();
};

/// Smallest N at which the cat fraction drops below 1/2, linearly
/// interpolated between neighbouring N values.
inline double critical_size(const std::vector<int>& ns, const std::vector<double>& cat_fraction) {
  for (std::size_t i = 0; i < ns.size(); ++i) {
    if (cat_fraction[i] < 0.5) {
      if (i == 0) return ns[0];
      const double f0 = cat_fraction[i - 1], f1 = cat_fraction[i];
      return ns[i - 1] + (f0 - 0.5) / (f0 - f1) * (ns[i] - ns[i - 1]);
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

inline double log_log_slope(const std::vector<SweepSummaryRow>& rows) {
  std::vector<double> x, y;
  for (const auto& r : rows) {
    if (r.w > 0.0 && std::isfinite(r.N_c) && r.N_c > 0.0) {
      x.push_back(std::log(r.w));
      y.push_back(std::log(r.N_c));
    }
  }
  if (x.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = n * sxx - sx * sx;
  if (den == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return (n * sxy - sx * sy) / den;
}

inline SweepResult cat_sweep(const SweepSpec& spec) {
  if (spec.trials < 1) throw DomainError("trials must be >= 1");
  if (spec.N_list.empty() || spec.w_list.empty()) throw DomainError("sweep grids must be non-empty");
  std::vector<int> ns = spec.N_list;
  std::sort(ns.begin(), ns.end());
  const std::size_t cells = ns.size() * spec.w_list.size();
  const std::size_t jobs = cells * static_cast<std::size_t>(spec.trials);
  std::vector<Outcome> outcomes(jobs);
  std::vector<double> ewfe(jobs);
  parallel_for(jobs, [&](std::size_t j) {
    const std::size_t cell = j / spec.trials;
    const int trial = static_cast<int>(j % spec.trials);
    const std::size_t wi = cell / ns.size(), ni = cell % ns.size();
    ToyParams p = spec.base;
    p.N = ns[ni];
    p.w = spec.w_list[wi];
    const auto seed = job_seed(spec.seed, {static_cast<std::uint64_t>(p.N), wi, static_cast<std::uint64_t>(trial)});
    const auto r = run_measurement(p, seed, 1000000);
    outcomes[j] = r.outcome;
    ewfe[j] = r.max_E_wfe;
  });
  SweepResult res;
  for (std::size_t wi = 0; wi < spec.w_list.size(); ++wi) {
    std::vector<double> fractions;
    for (std::size_t ni = 0; ni < ns.size(); ++ni) {
      SweepCell c{ns[ni], spec.w_list[wi], spec.trials};
      const std::size_t base = (wi * ns.size() + ni) * spec.trials;
      for (int t = 0; t < spec.trials; ++t) {
        const double inc = 1.0 / spec.trials;
        switch (outcomes[base + t]) {
          case Outcome::Cat: c.cat_fraction += inc; break;
          case Outcome::Left: c.left_fraction += inc; break;
          case Outcome::Right: c.right_fraction += inc; break;
          case Outcome::Undecided: c.undecided_fraction += inc; break;
        }
        c.mean_E_wfe_max += ewfe[base + t] / spec.trials;
      }
      fractions.push_back(c.cat_fraction);
      res.cells.push_back(c);
    }
    res.summary.push_back({spec.w_list[wi], critical_size(ns, fractions)});
  }
  res.log_log_slope = log_log_slope(res.summary);
  return res;
}

inline std::string sweep_csv(const SweepResult& r) {
  std::string s = "N,w,trials,cat_fraction,left_fraction,right_fraction,undecided_fraction,mean_E_wfe_max\n";
  for (const auto& c : r.cells) {
    s += std::to_string(c.N) + ',' + format_number(c.w) + ',' + std::to_string(c.trials) + ',' +
         format_number(c.cat_fraction) + ',' + format_number(c.left_fraction) + ',' + format_number(c.right_fraction) +
         ',' + format_number(c.undecided_fraction) + ',' + format_number(c.mean_E_wfe_max) + '\n';
  }
  return s;
}

inline std::string sweep_summary_csv(const SweepResult& r) {
  std::string s = "w,N_c\n";
  for (const auto& row : r.summary) s += format_number(row.w) + ',' + format_number(row.N_c) + '\n';
  return s;
}

}  // namespace wfe
