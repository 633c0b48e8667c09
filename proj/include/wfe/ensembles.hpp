#pragma once

// Curie-Weiss wavefunction ensembles over the symmetric sector: a state is
// phi_n, n = 0..N down spins, with spin values +-1. For p_n = |phi_n|^2,
//   x_n = (N - 2n) / N,   m = sum p x,   D = sum p x^2 - m^2,
//   f = N beta {1 - m^2 + (omega - 1) D},
// and [m^2]_beta is the e^{-f}-weighted average over the uniform measure on
// the unit sphere.

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "wfe/error.hpp"
#include "wfe/linalg.hpp"
#include "wfe/parallel.hpp"

namespace wfe {

enum class Sampler { Importance, Metropolis, Auto };

inline std::string_view to_string(Sampler s) {
  switch (s) {
    case Sampler::Importance: return "importance";
    case Sampler::Metropolis: return "metropolis";
    case Sampler::Auto: return "auto";
  }
  return "?";
}

inline Sampler sampler_from_string(std::string_view s) {
  for (auto v : {Sampler::Importance, Sampler::Metropolis, Sampler::Auto}) {
    if (to_string(v) == s) return v;
  }
  throw DomainError("unknown sampler '" + std::string(s) + "'");
}

struct EnsembleParams {
  int N = 10;
  double beta = 1.0;
  double omega = 2.0;
  Sampler sampler = Sampler::Importance;
  long long n_samples = 100000;
  std::uint64_t seed = 1;
  /// Initial Metropolis step; adapted during burn-in, then frozen.
  double step = 0.3;
  /// Threshold for the weight-fraction diagnostic {m^2 > eps}.
  double eps = 0.5;
  /// Auto mode switches to Metropolis below this importance ESS.
  double auto_min_ess = 500.0;

  void validate() const {
    if (N < 1) throw DomainError("N must be >= 1");
    if (!(beta >= 0.0)) throw DomainError("beta must be >= 0");
    if (!(omega >= 0.0)) throw DomainError("omega must be >= 0");
    if (n_samples < 100) throw DomainError("n_samples must be >= 100");
    if (!(step > 0.0)) throw DomainError("step must be positive");
  }
};

struct EnsembleEstimate {
  double m2_mean = 0.0;
  double std_error = 0.0;
  double effective_sample_size = 0.0;
  double acceptance_rate = std::numeric_limits<double>::quiet_NaN();  // Metropolis only
  double max_weight_fraction = std::numeric_limits<double>::quiet_NaN();  // importance only
  double weight_frac_above_eps = 0.0;
  double final_step = std::numeric_limits<double>::quiet_NaN();
  Sampler sampler_used = Sampler::Importance;
  std::vector<std::string> warnings;
};

/// Independent standard normal real and imaginary parts, N + 1 components.
template <class Rng>
Amplitudes sample_phi(int n, Rng& rng) {
  std::normal_distribution<double> g;
  Amplitudes phi(static_cast<std::size_t>(n) + 1);
  for (auto& z : phi) {
    const double re = g(rng);
    z = {re, g(rng)};
  }
  return phi;
}

struct MagnetizationDispersion {
  double m = 0.0;
  double D = 0.0;
};

/// From probabilities p_n (summing to one).
inline MagnetizationDispersion m_and_D_from_probabilities(std::span<const double> p) {
  const int n = static_cast<int>(p.size()) - 1;
  double m = 0.0, x2 = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double x = static_cast<double>(n - 2 * k) / n;
    m += p[k] * x;
    x2 += p[k] * x * x;
  }
  return {m, x2 - m * m};
}

/// Curie-Weiss energy -(1/N) sum |phi_n|^2 (N - 2n)^2.
inline double curie_weiss_energy(std::span<const double> p) {
  const int n = static_cast<int>(p.size()) - 1;
  double e = 0.0;
  for (int k = 0; k <= n; ++k) e += p[k] * static_cast<double>(n - 2 * k) * (n - 2 * k);
  return -e / n;
}

inline std::vector<double> probabilities(std::span<const cplx> phi) {
  std::vector<double> p(phi.size());
  for (std::size_t i = 0; i < phi.size(); ++i) p[i] = std::norm(phi[i]);
  return p;
}

/// Checks normalization and the decomposition E_CW = -N (m^2 + D).
inline MagnetizationDispersion m_and_D(std::span<const cplx> phi, int n) {
  if (static_cast<int>(phi.size()) != n + 1) throw ShapeError("phi must have N + 1 components");
  const auto p = probabilities(phi);
  double total = 0.0;
  for (double v : p) total += v;
  if (std::abs(total - 1.0) > 1e-12) throw DomainError("phi is not normalized (|phi|^2 = " + format_number(total) + ")");
  const auto r = m_and_D_from_probabilities(p);
  const double direct = curie_weiss_energy(p);
  const double split = -n * (r.m * r.m + r.D);
  if (std::abs(direct - split) > 1e-12 * std::max(1.0, std::abs(direct))) {
    throw NumericalFailure("energy decomposition mismatch " + format_short(direct - split), 0.0);
  }
  return r;
}

inline double f_from_md(const MagnetizationDispersion& md, int n, double beta, double omega) {
  return n * beta * (1.0 - md.m * md.m + (omega - 1.0) * md.D);
}

inline double f_value(std::span<const cplx> phi, const EnsembleParams& p) {
  return f_from_md(m_and_D(phi, p.N), p.N, p.beta, p.omega);
}

namespace detail {

/// Draws a uniform direction and returns its probabilities.
template <class Rng>
void draw_probabilities(int n, Rng& rng, std::normal_distribution<double>& g, std::vector<double>& p) {
  double total = 0.0;
  for (int k = 0; k <= n; ++k) {
    const double re = g(rng), im = g(rng);
    p[k] = re * re + im * im;
    total += p[k];
  }
  for (auto& v : p) v /= total;
}

inline EnsembleEstimate importance(const EnsembleParams& prm) {
  std::mt19937_64 rng(prm.seed);
  std::normal_distribution<double> g;
  std::vector<double> p(prm.N + 1);
  std::vector<double> logw(prm.n_samples), m2(prm.n_samples);
  for (long long s = 0; s < prm.n_samples; ++s) {
    draw_probabilities(prm.N, rng, g, p);
    const auto md = m_and_D_from_probabilities(p);
    m2[s] = md.m * md.m;
    logw[s] = -f_from_md(md, prm.N, prm.beta, prm.omega);
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double sw = 0.0, sw2 = 0.0, swm = 0.0, wmax = 0.0, above = 0.0;
  for (long long s = 0; s < prm.n_samples; ++s) {
    const double w = std::exp(logw[s] - top);
    sw += w;
    sw2 += w * w;
    swm += w * m2[s];
    wmax = std::max(wmax, w);
    if (m2[s] > prm.eps) above += w;
  }
  EnsembleEstimate e;
  e.sampler_used = Sampler::Importance;
  e.m2_mean = swm / sw;
  double var = 0.0;
  for (long long s = 0; s < prm.n_samples; ++s) {
    const double w = std::exp(logw[s] - top);
    var += w * w * (m2[s] - e.m2_mean) * (m2[s] - e.m2_mean);
  }
  e.std_error = std::sqrt(var) / sw;
  e.effective_sample_size = sw * sw / sw2;
  e.max_weight_fraction = wmax / sw;
  e.weight_frac_above_eps = above / sw;
  return e;
}

inline EnsembleEstimate metropolis(const EnsembleParams& prm) {
  std::mt19937_64 rng(prm.seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int n = prm.N;
  auto phi = sample_phi(n, rng);
  normalize({phi.size(), 1.0}, phi);
  auto current = m_and_D_from_probabilities(probabilities(phi));
  double f = f_from_md(current, n, prm.beta, prm.omega);
  const long long burn = prm.n_samples / 10;
  const long long kept = prm.n_samples - burn;
  double step = prm.step;
  Amplitudes trial(phi.size());
  std::vector<double> p(phi.size());
  std::vector<double> m2;
  m2.reserve(kept);
  long long accepted = 0, window_accepted = 0, window = 0;
  for (long long s = 0; s < prm.n_samples; ++s) {
    double total = 0.0;
    for (std::size_t k = 0; k < phi.size(); ++k) {
      const double re = g(rng), im = g(rng);
      trial[k] = phi[k] + step * cplx{re, im};
      total += std::norm(trial[k]);
    }
    const double inv = 1.0 / std::sqrt(total);
    for (std::size_t k = 0; k < phi.size(); ++k) {
      trial[k] *= inv;
      p[k] = std::norm(trial[k]);
    }
    const auto md = m_and_D_from_probabilities(p);
    const double ft = f_from_md(md, n, prm.beta, prm.omega);
    const bool accept = ft <= f || u(rng) < std::exp(f - ft);
    if (accept) {
      std::swap(phi, trial);
      current = md;
      f = ft;
    }
    if (s < burn) {
      // Robbins-Monro style nudging toward 30% acceptance
      window_accepted += accept;
      if (++window == 100) {
        const double rate = window_accepted / 100.0;
        step *= std::exp(rate - 0.3);
        step = std::clamp(step, 1e-4, 10.0);
        window = window_accepted = 0;
      }
    } else {
      accepted += accept;
      m2.push_back(current.m * current.m);
    }
  }
  EnsembleEstimate e;
  e.sampler_used = Sampler::Metropolis;
  e.final_step = step;
  e.acceptance_rate = static_cast<double>(accepted) / kept;
  double mean = 0.0, above = 0.0;
  for (double v : m2) {
    mean += v;
    if (v > prm.eps) above += 1.0;
  }
  mean /= kept;
  e.m2_mean = mean;
  e.weight_frac_above_eps = above / kept;
  double var = 0.0;
  for (double v : m2) var += (v - mean) * (v - mean);
  var /= std::max<long long>(1, kept - 1);
  // batch means
  const long long batches = 50;
  const long long len = kept / batches;
  double bvar = 0.0;
  for (long long b = 0; b < batches; ++b) {
    double bm = 0.0;
    for (long long i = 0; i < len; ++i) bm += m2[b * len + i];
    bm /= len;
    bvar += (bm - mean) * (bm - mean);
  }
  bvar /= batches - 1;
  e.std_error = std::sqrt(bvar / batches);
  // ESS = sample variance / squared standard error of the mean
  e.effective_sample_size =
      e.std_error > 0.0 ? std::min<double>(static_cast<double>(kept), var / (e.std_error * e.std_error)) : kept;
  return e;
}

}  // namespace detail

inline EnsembleEstimate estimate_m2(const EnsembleParams& p) {
  p.validate();
  EnsembleEstimate e;
  switch (p.sampler) {
    case Sampler::Importance:
      e = detail::importance(p);
      break;
    case Sampler::Metropolis:
      e = detail::metropolis(p);
      break;
    case Sampler::Auto:
      e = detail::importance(p);
      if (e.effective_sample_size < p.auto_min_ess) e = detail::metropolis(p);
      break;
  }
  if (e.effective_sample_size < 50.0) {
    e.warnings.push_back("degenerate weights: effective sample size " + format_short(e.effective_sample_size));
  }
  return e;
}

/// [m^2] by deterministic quadrature over the simplex of p_n (uniform density).
inline double exact_m2_small_n(int n, double beta, double omega) {
  if (n < 1 || n > 2) throw DomainError("exact oracle covers N = 1 and N = 2 only");
  if (!(beta >= 0.0) || !(omega >= 0.0)) throw DomainError("beta and omega must be >= 0");
  using boost::math::quadrature::gauss_kronrod;
  const double tol = 1e-13;
  if (n == 1) {
    // t = 2u - 1 uniform on [-1, 1]; f = beta omega (1 - t^2)
    const double a = beta * omega;
    auto w = [a](double t) { return std::exp(-a * (1.0 - t * t)); };
    const double num = gauss_kronrod<double, 61>::integrate([&](double t) { return t * t * w(t); }, -1.0, 1.0, 15, tol);
    const double den = gauss_kronrod<double, 61>::integrate(w, -1.0, 1.0, 15, tol);
    return num / den;
  }
  // N = 2: x = (1, 0, -1), p0 in [0,1], p2 in [0, 1 - p0]
  auto weight = [beta, omega](double p0, double p2, double& m2) {
    const double m = p0 - p2;
    const double d = p0 + p2 - m * m;
    m2 = m * m;
    return std::exp(-2.0 * beta * (1.0 - m * m + (omega - 1.0) * d));
  };
  auto outer = [&](bool moment) {
    return gauss_kronrod<double, 61>::integrate(
        [&](double p0) {
          return gauss_kronrod<double, 61>::integrate(
              [&](double p2) {
                double m2 = 0.0;
                const double w = weight(p0, p2, m2);
                return moment ? m2 * w : w;
              },
              0.0, 1.0 - p0, 15, tol);
        },
        0.0, 1.0, 15, tol);
  };
  return outer(true) / outer(false);
}

struct CurveRow {
  int N = 0;
  double beta = 0.0;
  double omega = 0.0;
  long long n_samples = 0;
  EnsembleEstimate estimate;
};

struct CurveSpec {
  std::vector<int> N_list{10, 50, 100};
  std::vector<double> beta_grid{0.5, 1.0, 2.0, 3.0, 4.0};
  std::vector<double> omega_list{0.0, 2.0};
  long long n_samples = 100000;
  std::uint64_t seed = 1;
  Sampler sampler = Sampler::Auto;
  double eps = 0.5;
  double step = 0.3;
};

struct CurveCrossing {
  int N = 0;
  double omega = 0.0;
  /// First beta at which [m^2] exceeds eps (interpolated); NaN if never.
  double beta_cross = std::numeric_limits<double>::quiet_NaN();
};

struct CurveResult {
  std::vector<CurveRow> rows;  // N-major, then omega, then beta
  std::vector<CurveCrossing> crossings;
};

inline CurveResult magnetization_curve(const CurveSpec& spec) {
  std::vector<double> betas = spec.beta_grid;
  std::sort(betas.begin(), betas.end());
  const std::size_t nb = betas.size(), no = spec.omega_list.size(), nn = spec.N_list.size();
  CurveResult res;
  res.rows.resize(nb * no * nn);
  parallel_for(res.rows.size(), [&](std::size_t j) {
    const std::size_t bi = j % nb, oi = (j / nb) % no, ni = j / (nb * no);
    EnsembleParams p;
    p.N = spec.N_list[ni];
    p.beta = betas[bi];
    p.omega = spec.omega_list[oi];
    p.sampler = spec.sampler;
    p.n_samples = spec.n_samples;
    p.eps = spec.eps;
    p.step = spec.step;
    p.seed = job_seed(spec.seed, {static_cast<std::uint64_t>(p.N), oi, bi});
    res.rows[j] = {p.N, p.beta, p.omega, p.n_samples, estimate_m2(p)};
  });
  for (std::size_t ni = 0; ni < nn; ++ni) {
    for (std::size_t oi = 0; oi < no; ++oi) {
      CurveCrossing c{spec.N_list[ni], spec.omega_list[oi]};
      for (std::size_t bi = 0; bi < nb; ++bi) {
        const double v = res.rows[(ni * no + oi) * nb + bi].estimate.m2_mean;
        if (v > spec.eps) {
          if (bi == 0) {
            c.beta_cross = betas[0];
          } else {
            const double v0 = res.rows[(ni * no + oi) * nb + bi - 1].estimate.m2_mean;
            c.beta_cross = betas[bi - 1] + (spec.eps - v0) / (v - v0) * (betas[bi] - betas[bi - 1]);
          }
          break;
        }
      }
      res.crossings.push_back(c);
    }
  }
  return res;
}

inline std::string curve_csv(const CurveResult& r) {
  std::string s = "N,beta,omega,sampler,n_samples,m2,std_error,ess,weight_frac_above_eps\n";
  for (const auto& row : r.rows) {
    s += std::to_string(row.N) + ',' + format_number(row.beta) + ',' + format_number(row.omega) + ',' +
         std::string(to_string(row.estimate.sampler_used)) + ',' + std::to_string(row.n_samples) + ',' +
         format_number(row.estimate.m2_mean) + ',' + format_number(row.estimate.std_error) + ',' +
         format_number(row.estimate.effective_sample_size) + ',' + format_number(row.estimate.weight_frac_above_eps) +
         '\n';
  }
  return s;
}

inline std::string crossing_csv(const CurveResult& r) {
  std::string s = "N,omega,beta_cross\n";
  for (const auto& c : r.crossings) {
    s += std::to_string(c.N) + ',' + format_number(c.omega) + ',' + format_number(c.beta_cross) + '\n';
  }
  return s;
}

}  // namespace wfe
