#pragma once

// Spin wavefunctions: the full 2^N configuration basis and the reduced
// qubit (x) Dicke basis of the measurement toy model.
//
// Bit order for SpinState: bit i of a configuration index is spin i, with
// bit value 0 meaning s_i = +1/2 and 1 meaning s_i = -1/2. Spin 0 is the
// qubit; spins 1..N-1 form the apparatus.

#include <bit>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "wfe/error.hpp"
#include "wfe/linalg.hpp"

namespace wfe {

inline constexpr int kMaxFullSpins = 24;

inline double binomial(int n, int k) {
  if (k < 0 || k > n) return 0.0;
  return std::round(std::exp(std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0)));
}

class SpinState {
 public:
  SpinState(int n_spins, Amplitudes amplitudes) : n_spins_(n_spins), amps_(std::move(amplitudes)) {
    if (n_spins < 1 || n_spins > kMaxFullSpins) {
      throw DomainError("SpinState supports 1.." + std::to_string(kMaxFullSpins) + " spins, got " +
                        std::to_string(n_spins));
    }
    if (amps_.size() != (std::size_t{1} << n_spins)) {
      throw ShapeError("SpinState with " + std::to_string(n_spins) + " spins needs 2^N amplitudes, got " +
                       std::to_string(amps_.size()));
    }
  }

  static SpinState basis(int n_spins, std::uint64_t config) {
    Amplitudes a(std::size_t{1} << n_spins);
    a.at(config) = 1.0;
    return {n_spins, std::move(a)};
  }

  /// s_site in configuration `config` (+1/2 or -1/2).
  static double spin_value(std::uint64_t config, int site) { return ((config >> site) & 1u) ? -0.5 : 0.5; }

  int n_spins() const { return n_spins_; }
  std::size_t dim() const { return amps_.size(); }
  StateSpace space() const { return {dim(), 1.0}; }
  std::span<const cplx> amplitudes() const { return amps_; }

 private:
  int n_spins_;
  Amplitudes amps_;
};

/// Qubit (x) symmetric apparatus. Coefficient (q, n) multiplies
/// |s_1 = q ? -1/2 : +1/2> (x) |Dicke n>, the normalized symmetric state of
/// M = N-1 apparatus spins with n of them down.
class SymmetricState {
 public:
  SymmetricState(int n_spins, Amplitudes amplitudes) : n_spins_(n_spins), amps_(std::move(amplitudes)) {
    if (n_spins < 1) throw DomainError("SymmetricState needs at least the qubit");
    if (amps_.size() != 2 * static_cast<std::size_t>(n_spins)) {
      throw ShapeError("SymmetricState with N = " + std::to_string(n_spins) + " needs 2N amplitudes, got " +
                       std::to_string(amps_.size()));
    }
  }

  static SymmetricState basis(int n_spins, int qubit, int n_down) {
    Amplitudes a(2 * static_cast<std::size_t>(n_spins));
    a.at(index(qubit, n_down, n_spins - 1)) = 1.0;
    return {n_spins, std::move(a)};
  }

  static std::size_t index(int qubit, int n_down, int apparatus) {
    return static_cast<std::size_t>(qubit) * static_cast<std::size_t>(apparatus + 1) +
           static_cast<std::size_t>(n_down);
  }
  /// Readout S(n) = (M - 2n)/2.
  static double apparatus_spin(int n_down, int apparatus) { return (apparatus - 2.0 * n_down) / 2.0; }
  static double qubit_spin(int qubit) { return qubit ? -0.5 : 0.5; }

  int n_spins() const { return n_spins_; }
  int apparatus_size() const { return n_spins_ - 1; }
  /// Half-range of the readout, R = (N-1)/2.
  double readout_range() const { return apparatus_size() / 2.0; }
  std::size_t dim() const { return amps_.size(); }
  StateSpace space() const { return {dim(), 1.0}; }
  std::span<const cplx> amplitudes() const { return amps_; }
  cplx at(int qubit, int n_down) const { return amps_[index(qubit, n_down, apparatus_size())]; }

 private:
  int n_spins_;
  Amplitudes amps_;
};

inline SpinState embed_symmetric(const SymmetricState& s) {
  const int n = s.n_spins();
  if (n > kMaxFullSpins) throw DomainError("embedding limited to N <= 24");
  const int m = s.apparatus_size();
  std::vector<double> inv_sqrt_c(m + 1);
  for (int k = 0; k <= m; ++k) inv_sqrt_c[k] = 1.0 / std::sqrt(binomial(m, k));
  Amplitudes full(std::size_t{1} << n);
  for (std::uint64_t c = 0; c < full.size(); ++c) {
    const int q = static_cast<int>(c & 1u);
    const int down = std::popcount(c >> 1);
    full[c] = s.at(q, down) * inv_sqrt_c[down];
  }
  return {n, std::move(full)};
}

/// Largest deviation of a full state from permutation symmetry in the apparatus spins.
inline double apparatus_asymmetry(const SpinState& f) {
  const int m = f.n_spins() - 1;
  std::vector<cplx> first(2 * static_cast<std::size_t>(m + 1));
  std::vector<bool> seen(first.size(), false);
  double worst = 0.0;
  const auto amps = f.amplitudes();
  for (std::uint64_t c = 0; c < amps.size(); ++c) {
    const auto k = SymmetricState::index(static_cast<int>(c & 1u), std::popcount(c >> 1), m);
    if (!seen[k]) {
      seen[k] = true;
      first[k] = amps[c];
    } else {
      worst = std::max(worst, std::abs(amps[c] - first[k]));
    }
  }
  return worst;
}

inline SymmetricState project_symmetric(const SpinState& f, double tolerance = 1e-10) {
  const double asym = apparatus_asymmetry(f);
  if (asym > tolerance) {
    throw DomainError("state is not symmetric in the apparatus spins (max deviation " + format_short(asym) + ")");
  }
  const int m = f.n_spins() - 1;
  Amplitudes red(2 * static_cast<std::size_t>(m + 1));
  const auto amps = f.amplitudes();
  for (std::uint64_t c = 0; c < amps.size(); ++c) {
    const int down = std::popcount(c >> 1);
    red[SymmetricState::index(static_cast<int>(c & 1u), down, m)] += amps[c];
  }
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) red[SymmetricState::index(q, k, m)] /= std::sqrt(binomial(m, k));
  }
  return {f.n_spins(), std::move(red)};
}

/// Qubit amplitudes alpha|+> + beta e^{i gamma}|->.
struct QubitAmplitudes {
  double alpha = 1.0 / std::sqrt(2.0);
  double beta = 1.0 / std::sqrt(2.0);
  double gamma = 0.0;

  cplx up() const { return alpha; }
  cplx down() const { return beta * std::polar(1.0, gamma); }

  /// alpha = beta + eps with alpha^2 + beta^2 = 1.
  static QubitAmplitudes tilted(double eps, double gamma = 0.0) {
    const double beta = (-eps + std::sqrt(2.0 - eps * eps)) / 2.0;
    return {beta + eps, beta, gamma};
  }
};

inline void require_unit_qubit(const QubitAmplitudes& q) {
  if (std::abs(q.alpha * q.alpha + q.beta * q.beta - 1.0) > 1e-12) {
    throw DomainError("qubit amplitudes must satisfy alpha^2 + beta^2 = 1");
  }
}

/// Spin cat in the reduced basis: qubit (x) (a|n=0> + b e^{ig}|n=M>), i.e. the
/// apparatus simultaneously in the S = +R and S = -R wells.
inline SymmetricState build_spin_cat(int n_spins, const QubitAmplitudes& branches,
                                     const QubitAmplitudes& qubit = {1.0, 0.0, 0.0}) {
  require_unit_qubit(branches);
  require_unit_qubit(qubit);
  const int m = n_spins - 1;
  if (m < 1) throw DomainError("a cat needs at least one apparatus spin");
  Amplitudes a(2 * static_cast<std::size_t>(n_spins));
  const cplx qs[2] = {qubit.up(), qubit.down()};
  for (int q = 0; q < 2; ++q) {
    a[SymmetricState::index(q, 0, m)] += qs[q] * branches.up();
    a[SymmetricState::index(q, m, m)] += qs[q] * branches.down();
  }
  return {n_spins, std::move(a)};
}

/// Full-space cat over every spin: a|all up> + b e^{ig}|all down>.
inline SpinState build_spin_cat_full(int n_spins, const QubitAmplitudes& branches) {
  require_unit_qubit(branches);
  Amplitudes a(std::size_t{1} << n_spins);
  a.front() = branches.up();
  a.back() = branches.down();
  return {n_spins, std::move(a)};
}

/// Product state prod_i (a|+> + b e^{ig}|->), the spin analogue of an MQP state.
inline SpinState build_spin_product(int n_spins, const QubitAmplitudes& factor) {
  require_unit_qubit(factor);
  Amplitudes a(std::size_t{1} << n_spins);
  for (std::uint64_t c = 0; c < a.size(); ++c) {
    cplx v = 1.0;
    for (int i = 0; i < n_spins; ++i) v *= ((c >> i) & 1u) ? factor.down() : factor.up();
    a[c] = v;
  }
  return {n_spins, std::move(a)};
}

struct InitialToyOptions {
  double center = 0.5;
  /// RMS of the complex perturbation added to each band amplitude.
  double rho = 0.0;
};

/// Banded start near the hill of the double well:
///   [a|+> + b e^{ig}|->] (x) sum_{n : |S(n)| <= center} sqrt(C(M,n)) |n>,
/// normalized. The band weight sqrt(C(M,n)) makes every configuration in the
/// band equally likely. rho > 0 perturbs the nonzero amplitudes then renormalizes.
template <class Rng>
SymmetricState build_initial_toy(int n_spins, const QubitAmplitudes& qubit, const InitialToyOptions& opt, Rng& rng) {
  require_unit_qubit(qubit);
  const int m = n_spins - 1;
  const double r = m / 2.0;
  if (opt.center < 0.0 || opt.center > r + 1e-12) {
    throw DomainError("center must lie in [0, R] with R = " + format_short(r));
  }
  if (opt.rho < 0.0) throw DomainError("rho must be non-negative");
  std::vector<double> band(m + 1, 0.0);
  double z = 0.0;
  for (int k = 0; k <= m; ++k) {
    if (std::abs(SymmetricState::apparatus_spin(k, m)) <= opt.center + 1e-12) {
      band[k] = std::sqrt(binomial(m, k));
      z += band[k] * band[k];
    }
  }
  if (z == 0.0) throw DomainError("no readout value satisfies |S| <= center");
  Amplitudes a(2 * static_cast<std::size_t>(n_spins));
  const cplx qs[2] = {qubit.up(), qubit.down()};
  for (int q = 0; q < 2; ++q) {
    for (int k = 0; k <= m; ++k) a[SymmetricState::index(q, k, m)] = qs[q] * band[k] / std::sqrt(z);
  }
  if (opt.rho > 0.0) {
    std::normal_distribution<double> gauss(0.0, opt.rho / std::sqrt(2.0));
    for (auto& v : a) {
      if (v != 0.0) v += cplx{gauss(rng), gauss(rng)};
    }
    normalize({a.size(), 1.0}, a);
  }
  return {n_spins, std::move(a)};
}

}  // namespace wfe
