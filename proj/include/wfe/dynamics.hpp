#pragma once

// i dpsi/dt = dE/dpsi*  (hbar = 1) for E = E_QM + E_WFE.

#include <cmath>
#include <string>
#include <string_view>
#include <vector>

#include "wfe/model.hpp"
#include "wfe/observables.hpp"

namespace wfe {

/// w (A^2 - 2 <A> A) psi
inline Amplitudes wfe_gradient(const ModelSpec& m, std::span<const cplx> psi) {
  require_fits(m, psi);
  Amplitudes out(psi.size());
  if (m.w == 0.0) return out;
  const auto a = apply_op(m.family.apply, psi);
  const auto aa = apply_op(m.family.apply, a);
  const double mean = std::real(inner(m.space, psi, a));
  for (std::size_t i = 0; i < psi.size(); ++i) out[i] = m.w * (aa[i] - 2.0 * mean * a[i]);
  return out;
}

/// g = dE/dpsi* = H psi + wfe_gradient, written into `out`.
inline void energy_gradient(const ModelSpec& m, std::span<const cplx> psi, std::span<cplx> out) {
  m.hamiltonian(psi, out);
  if (m.w > 0.0) {
    const auto g = wfe_gradient(m, psi);
    axpy(1.0, g, out);
  }
}

/// dpsi/dt = -i g
inline void rhs(const ModelSpec& m, std::span<const cplx> psi, std::span<cplx> out) {
  energy_gradient(m, psi, out);
  for (auto& z : out) z = cplx{z.imag(), -z.real()};
}

inline Amplitudes rhs(const ModelSpec& m, std::span<const cplx> psi) {
  require_fits(m, psi);
  Amplitudes out(psi.size());
  rhs(m, psi, out);
  return out;
}

enum class Method { ImplicitMidpoint, ExtendedPhaseSpace, Rk4 };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ImplicitMidpoint: return "implicit_midpoint";
    case Method::ExtendedPhaseSpace: return "extended_phase_space";
    case Method::Rk4: return "rk4_reference";
  }
  return "?";
}

inline Method method_from_string(std::string_view s) {
  for (auto m : {Method::ImplicitMidpoint, Method::ExtendedPhaseSpace, Method::Rk4}) {
    if (to_string(m) == s) return m;
  }
  throw DomainError("unknown integrator '" + std::string(s) + "'");
}

struct IntegratorOptions {
  Method method = Method::ImplicitMidpoint;
  double tolerance = 1e-12;
  int max_iterations = 50;
  /// Fixed-point contraction target for the substep safeguard.
  double contraction = 0.25;
  /// Coupling frequency of the extended phase-space method.
  double omega = 20.0;
};

struct IntegratorStats {
  int substeps = 1;
  double rate_bound = 0.0;
  int max_iterations_used = 0;
  double max_residual = 0.0;
  long long steps = 0;
};

/// Upper estimate of the Lipschitz constant of g: |H| + 3 w |A|^2.
inline double rate_bound(const ModelSpec& m) {
  double b = spectral_radius_estimate(m.hamiltonian, m.space.dim);
  if (m.w > 0.0) {
    const double a = spectral_radius_estimate(m.family.apply, m.space.dim);
    b += 3.0 * m.w * a * a;
  }
  // power iteration approaches the radius from below
  return 1.1 * b;
}

inline int safeguard_substeps(const ModelSpec& m, double dt, const IntegratorOptions& opt, double* bound = nullptr) {
  const double b = rate_bound(m);
  if (bound) *bound = b;
  const double q = 0.5 * dt * b;
  return std::max(1, static_cast<int>(std::ceil(q / opt.contraction)));
}

class Stepper {
 public:
  Stepper(const ModelSpec& model, double dt, IntegratorOptions opt) : model_(model), dt_(dt), opt_(opt) {
    validate(model_);
    if (!(dt > 0.0)) throw DomainError("dt must be positive");
    if (opt_.method == Method::ImplicitMidpoint) {
      stats_.substeps = safeguard_substeps(model_, dt, opt_, &stats_.rate_bound);
    }
    const std::size_t n = model_.space.dim;
    y_.resize(n);
    f_.resize(n);
    next_.resize(n);
    k_.assign(4, Amplitudes(n));
    tmp_.resize(n);
    x_.resize(n);
  }

  const IntegratorStats& stats() const { return stats_; }

  /// Advances psi by dt in place; t is used only for error reports.
  void step(Amplitudes& psi, double t) {
    switch (opt_.method) {
      case Method::ImplicitMidpoint: {
        const double h = dt_ / stats_.substeps;
        for (int s = 0; s < stats_.substeps; ++s) midpoint(psi, h, t + s * h);
        break;
      }
      case Method::ExtendedPhaseSpace:
        tao(psi, dt_);
        break;
      case Method::Rk4:
        rk4(psi, dt_);
        break;
    }
    ++stats_.steps;
    if (!all_finite(psi)) throw NumericalFailure("non-finite amplitudes", t + dt_);
  }

 private:
  void midpoint(Amplitudes& psi, double h, double t) {
    // y = psi + (h/2) f(y); psi_new = 2y - psi
    y_ = psi;
    double residual = 0.0;
    int it = 0;
    for (; it < opt_.max_iterations; ++it) {
      rhs(model_, y_, f_);
      residual = 0.0;
      for (std::size_t i = 0; i < psi.size(); ++i) {
        next_[i] = psi[i] + 0.5 * h * f_[i];
        residual = std::max(residual, std::abs(next_[i] - y_[i]));
      }
      std::swap(y_, next_);
      if (!std::isfinite(residual)) break;
      if (residual <= opt_.tolerance) break;
    }
    if (!(residual <= opt_.tolerance)) {
      throw NumericalFailure("implicit midpoint stage solver did not converge (residual " + format_number(residual) +
                                 ")",
                             t);
    }
    stats_.max_iterations_used = std::max(stats_.max_iterations_used, it + 1);
    stats_.max_residual = std::max(stats_.max_residual, residual);
    for (std::size_t i = 0; i < psi.size(); ++i) psi[i] = 2.0 * y_[i] - psi[i];
  }

  void rk4(Amplitudes& psi, double h) {
    const std::size_t n = psi.size();
    rhs(model_, psi, k_[0]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = psi[i] + 0.5 * h * k_[0][i];
    rhs(model_, tmp_, k_[1]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = psi[i] + 0.5 * h * k_[1][i];
    rhs(model_, tmp_, k_[2]);
    for (std::size_t i = 0; i < n; ++i) tmp_[i] = psi[i] + h * k_[2][i];
    rhs(model_, tmp_, k_[3]);
    for (std::size_t i = 0; i < n; ++i) psi[i] += h / 6.0 * (k_[0][i] + 2.0 * k_[1][i] + 2.0 * k_[2][i] + k_[3][i]);
  }

  // Extended phase space: q + i p = psi, x + i y = copy, Hamiltonian E/2 so that
  // dH/dq = Re g and dH/dp = Im g with g = dE/dpsi*.
  void tao(Amplitudes& psi, double h) {
    // x_ holds the copy (x + i y); psi holds (q + i p)
    if (!copy_valid_) {
      x_ = psi;
      copy_valid_ = true;
    }
    flow_a(psi, 0.5 * h);
    flow_b(psi, 0.5 * h);
    flow_c(psi, h);
    flow_b(psi, 0.5 * h);
    flow_a(psi, 0.5 * h);
  }
  // p -= d Re g(q + i y);  x += d Im g(q + i y)
  void flow_a(Amplitudes& psi, double d) {
    for (std::size_t i = 0; i < psi.size(); ++i) tmp_[i] = {psi[i].real(), x_[i].imag()};
    energy_gradient(model_, tmp_, f_);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      psi[i] -= cplx{0.0, d * f_[i].real()};
      x_[i] += d * f_[i].imag();
    }
  }
  // q += d Im g(x + i p);  y -= d Re g(x + i p)
  void flow_b(Amplitudes& psi, double d) {
    for (std::size_t i = 0; i < psi.size(); ++i) tmp_[i] = {x_[i].real(), psi[i].imag()};
    energy_gradient(model_, tmp_, f_);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      psi[i] += d * f_[i].imag();
      x_[i] -= cplx{0.0, d * f_[i].real()};
    }
  }
  void flow_c(Amplitudes& psi, double d) {
    const double c = std::cos(2.0 * opt_.omega * d), s = std::sin(2.0 * opt_.omega * d);
    for (std::size_t i = 0; i < psi.size(); ++i) {
      const double q = psi[i].real(), p = psi[i].imag(), x = x_[i].real(), y = x_[i].imag();
      const double sq = q + x, sp = p + y;
      const double dq = q - x, dp = p - y;
      const double rq = c * dq + s * dp, rp = -s * dq + c * dp;
      psi[i] = {0.5 * (sq + rq), 0.5 * (sp + rp)};
      x_[i] = {0.5 * (sq - rq), 0.5 * (sp - rp)};
    }
  }

  ModelSpec model_;
  double dt_;
  IntegratorOptions opt_;
  IntegratorStats stats_;
  Amplitudes y_, f_, next_, tmp_, x_;
  std::vector<Amplitudes> k_;
  bool copy_valid_ = false;
};

struct TrajectoryMetadata {
  std::string method;
  double dt = 0.0;
  double T = 0.0;
  int record_every = 1;
  IntegratorStats stats;
};

struct TrajectoryRecord {
  std::vector<double> times;
  std::vector<ObservableReport> reports;
  TrajectoryMetadata metadata;
  Amplitudes final_state;
};

/// Evolution stopped early; `partial` holds everything recorded so far.
class EvolutionFailure : public NumericalFailure {
 public:
  EvolutionFailure(const NumericalFailure& cause, TrajectoryRecord partial)
      : NumericalFailure(strip(cause.what()), cause.time()), partial_(std::move(partial)) {}
  const TrajectoryRecord& partial() const { return partial_; }

 private:
  static std::string strip(const std::string& w) {
    const auto pos = w.rfind(" (t = ");
    return pos == std::string::npos ? w : w.substr(0, pos);
  }
  TrajectoryRecord partial_;
};

inline long long step_count(double T, double dt) {
  if (!(dt > 0.0)) throw DomainError("dt must be positive");
  if (!(T >= dt)) throw DomainError("T must be at least dt");
  const double n = T / dt;
  const long long k = std::llround(n);
  if (std::abs(n - static_cast<double>(k)) > 1e-9 * n) throw DomainError("T must be a multiple of dt");
  return k;
}

inline TrajectoryRecord evolve(std::span<const cplx> psi0, const ModelSpec& model, double T, double dt,
                               const Observer& observe, int record_every = 1, IntegratorOptions opt = {}) {
  require_fits(model, psi0);
  if (record_every < 1) throw DomainError("record_every must be >= 1");
  const long long steps = step_count(T, dt);
  Stepper stepper(model, dt, opt);
  TrajectoryRecord rec;
  rec.metadata = {std::string(to_string(opt.method)), dt, T, record_every, {}};
  Amplitudes psi(psi0.begin(), psi0.end());
  auto record = [&](double t) {
    rec.times.push_back(t);
    if (observe) rec.reports.push_back(observe(t, psi));
  };
  record(0.0);
  try {
    for (long long k = 1; k <= steps; ++k) {
      stepper.step(psi, (k - 1) * dt);
      if (k % record_every == 0 || k == steps) record(k * dt);
    }
  } catch (const NumericalFailure& e) {
    rec.metadata.stats = stepper.stats();
    rec.final_state = psi;
    throw EvolutionFailure(e, std::move(rec));
  }
  rec.metadata.stats = stepper.stats();
  rec.final_state = std::move(psi);
  return rec;
}

/// Advances without recording; returns the final amplitudes.
inline Amplitudes propagate(std::span<const cplx> psi0, const ModelSpec& model, double T, double dt,
                            IntegratorOptions opt = {}) {
  return evolve(psi0, model, T, dt, nullptr, step_count(T, dt), opt).final_state;
}

struct DivergenceSeries {
  std::vector<double> times;
  std::vector<double> distribution_distance;  // L2 distance of the readout distributions
  std::vector<double> readout_difference;     // <S>_a - <S>_b
  double final_readout_a = 0.0;
  double final_readout_b = 0.0;
};

/// Readout distribution over S values for a state's amplitudes.
using ReadoutMap = std::function<std::vector<double>(std::span<const cplx>)>;

inline DivergenceSeries sensitivity_run(std::span<const cplx> a, std::span<const cplx> b, const ModelSpec& model,
                                        double T, double dt, const ReadoutMap& readout, int record_every = 1,
                                        IntegratorOptions opt = {}) {
  require_same_size(a, b);
  DivergenceSeries out;
  std::vector<std::vector<double>> da, db;
  auto observer = [&readout](std::vector<std::vector<double>>& sink) {
    return Observer([&readout, &sink](double t, std::span<const cplx> psi) {
      sink.push_back(readout(psi));
      ObservableReport r;
      r.t = t;
      return r;
    });
  };
  const auto ra = evolve(a, model, T, dt, observer(da), record_every, opt);
  evolve(b, model, T, dt, observer(db), record_every, opt);
  out.times = ra.times;
  for (std::size_t k = 0; k < da.size(); ++k) {
    double d2 = 0.0;
    for (std::size_t n = 0; n < da[k].size(); ++n) d2 += (da[k][n] - db[k][n]) * (da[k][n] - db[k][n]);
    out.distribution_distance.push_back(std::sqrt(d2));
    out.readout_difference.push_back(readout_mean(da[k]) - readout_mean(db[k]));
  }
  out.final_readout_a = readout_mean(da.back());
  out.final_readout_b = readout_mean(db.back());
  return out;
}

}  // namespace wfe
