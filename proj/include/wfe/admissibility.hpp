#pragma once

// Commutator checks for WFE operator families on grid states.
//
// For a candidate family O and particle k,
//   G = O_k^2 + 2 sum_{j != k} O_j O_k - 2 <sum_i O_i> O_k
// and the family leaves the centre-of-mass equations untouched when
// <[X_k, G]> = 0 and <[P_k, G]> = 0. With O = L + S, G splits as
//   I   = L_k^2 + 2 sum_{j != k} L_k L_j - 2 <sum L> L_k
//   II  = S_k^2 + 2 sum_{j != k} S_k S_j - 2 <sum S> S_k
//   III = 2 L_k S_k + 2 sum_{j != k}(L_k S_j + S_k L_j) - 2 <sum S> L_k - 2 <sum L> S_k.
//
// For O = L the extra velocity is d<X_k>/dt - <P_k>/m = w F with the real
//   F = -( <Y_k L_k + L_k Y_k> + 2 sum_{j != k} <L_j Y_k> - 2 <sum L> <Y_k> ),
// i.e. -i <[X_k, G]> = F.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "json.hpp"
#include "wfe/error.hpp"
#include "wfe/grid_operators.hpp"
#include "wfe/operators.hpp"

namespace wfe {

/// Test family for the commutator checks:
///   prod_p exp(-|r_p - c_p|^2 / 2 + a (x_p - cx_p)(y_p - cy_p)) e^{i k_p . r_p} chi_p(s_p)
///   * exp(b (x_1 - cx_1)(x_2 - cx_2)),
/// with a = xy_coupling (2D only) and b = pair_coupling (two particles only).
struct CorrelatedGaussianSpec {
  double xy_coupling = 0.3;
  double pair_coupling = 0.0;
  std::vector<Point> centers;    // per particle; default origin
  std::vector<Point> momenta;    // per particle; default zero
  std::vector<SpinFactor> spins; // per particle; default up
};

inline GridState correlated_gaussian(const GridShape& shape, const CorrelatedGaussianSpec& spec) {
  shape.validate();
  const int np = shape.particles;
  auto pick = [np](const auto& v, auto def) {
    std::vector<decltype(def)> out(np, def);
    for (int p = 0; p < np && p < static_cast<int>(v.size()); ++p) out[p] = v[p];
    return out;
  };
  const auto centers = pick(spec.centers, Point{0.0, 0.0});
  const auto momenta = pick(spec.momenta, Point{0.0, 0.0});
  const auto spins = pick(spec.spins, SpinFactor{1.0, 0.0});
  if (std::abs(spec.xy_coupling) >= 1.0) throw DomainError("xy_coupling must lie in (-1, 1)");
  if (std::abs(spec.pair_coupling) >= 1.0) throw DomainError("pair_coupling must lie in (-1, 1)");
  Amplitudes a(shape.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    double expo = 0.0, phase = 0.0;
    cplx spin = 1.0;
    double rel_x[2] = {0.0, 0.0};
    for (int p = 0; p < np; ++p) {
      const double x = shape.position(i, p, 0) - centers[p][0];
      const double y = shape.dims == 2 ? shape.position(i, p, 1) - centers[p][1] : 0.0;
      rel_x[p] = x;
      expo += -(x * x + y * y) / 2.0 + spec.xy_coupling * x * y;
      phase += momenta[p][0] * shape.position(i, p, 0);
      if (shape.dims == 2) phase += momenta[p][1] * shape.position(i, p, 1);
      if (shape.spin_levels == 2) spin *= spins[p][shape.spin_bit(i, p)];
    }
    if (np == 2) expo += spec.pair_coupling * rel_x[0] * rel_x[1];
    a[i] = std::exp(expo) * std::polar(1.0, phase) * spin;
  }
  normalize(shape.space(), a);
  return {shape, std::move(a)};
}

/// Position, momentum and spin actions per particle and axis. Two
/// implementations exist: the closed-form spectral one and a DFT-built dense
/// per-axis matrix used as an oracle.
struct OperatorProvider {
  GridShape shape;
  std::function<void(std::span<const cplx>, std::span<cplx>, int, int)> position;
  std::function<void(std::span<const cplx>, std::span<cplx>, int, int)> momentum;
  std::function<void(std::span<const cplx>, std::span<cplx>, int)> spin_z;
};

inline OperatorProvider spectral_provider(std::shared_ptr<const GridOperators> ops) {
  return {ops->shape(),
          [ops](std::span<const cplx> in, std::span<cplx> out, int p, int a) { ops->position(in, out, p, a); },
          [ops](std::span<const cplx> in, std::span<cplx> out, int p, int a) { ops->momentum(in, out, p, a); },
          [ops](std::span<const cplx> in, std::span<cplx> out, int p) { ops->spin_z(in, out, p); }};
}

inline OperatorProvider spectral_provider(const GridShape& shape) {
  return spectral_provider(std::make_shared<const GridOperators>(shape));
}

/// Single-axis momentum matrix P = F^dagger diag(k) F with the Nyquist mode removed.
inline Eigen::MatrixXcd dft_momentum_matrix(int points, double half_width) {
  const int g = points;
  const double h = 2.0 * half_width / g;
  Eigen::MatrixXcd f(g, g);
  Eigen::VectorXd k(g);
  for (int m = 0; m < g; ++m) {
    const int mm = m <= g / 2 ? m : m - g;
    k(m) = (mm == g / 2) ? 0.0 : 2.0 * std::numbers::pi * mm / (2.0 * half_width);
    for (int j = 0; j < g; ++j) {
      const double x = -half_width + j * h;
      f(m, j) = std::polar(1.0 / std::sqrt(static_cast<double>(g)), -2.0 * std::numbers::pi * mm / (2.0 * half_width) * x);
    }
  }
  return f.adjoint() * k.asDiagonal() * f;
}

class DenseAxisOracle {
 public:
  explicit DenseAxisOracle(const GridShape& shape)
      : shape_(shape), p_(dft_momentum_matrix(shape.points, shape.half_width)) {
    shape_.validate();
  }

  void momentum(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    const std::size_t g = static_cast<std::size_t>(shape_.points);
    const std::size_t s = shape_.stride(particle, axis);
    const std::size_t blocks = in.size() / (g * s);
    Eigen::VectorXcd line(g);
    for (std::size_t b = 0; b < blocks; ++b) {
      for (std::size_t r = 0; r < s; ++r) {
        const std::size_t base = b * g * s + r;
        for (std::size_t l = 0; l < g; ++l) line(l) = in[base + l * s];
        const Eigen::VectorXcd res = p_ * line;
        for (std::size_t j = 0; j < g; ++j) out[base + j * s] = res(j);
      }
    }
  }

  void position(std::span<const cplx> in, std::span<cplx> out, int particle, int axis) const {
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = shape_.position(i, particle, axis) * in[i];
  }

  void spin_z(std::span<const cplx> in, std::span<cplx> out, int particle) const {
    if (shape_.spin_levels != 2) throw ShapeError("S_z needs spin-1/2 particles");
    for (std::size_t i = 0; i < in.size(); ++i) out[i] = (shape_.spin_bit(i, particle) ? -0.5 : 0.5) * in[i];
  }

  const Eigen::MatrixXcd& momentum_matrix() const { return p_; }

 private:
  GridShape shape_;
  Eigen::MatrixXcd p_;
};

inline OperatorProvider dense_provider(const GridShape& shape) {
  auto o = std::make_shared<const DenseAxisOracle>(shape);
  return {shape, [o](std::span<const cplx> in, std::span<cplx> out, int p, int a) { o->position(in, out, p, a); },
          [o](std::span<const cplx> in, std::span<cplx> out, int p, int a) { o->momentum(in, out, p, a); },
          [o](std::span<const cplx> in, std::span<cplx> out, int p) { o->spin_z(in, out, p); }};
}

class OperatorSet {
 public:
  OperatorSet(OperatorProvider provider, FamilyKind candidate) : p_(std::move(provider)), candidate_(candidate) {
    require_compatible(p_.shape, candidate);
  }
  OperatorSet(const GridShape& shape, FamilyKind candidate) : OperatorSet(spectral_provider(shape), candidate) {}

  const GridShape& shape() const { return p_.shape; }
  StateSpace space() const { return p_.shape.space(); }
  int particles() const { return p_.shape.particles; }
  FamilyKind candidate() const { return candidate_; }

  LinearAction x(int k) const { return axis_op(p_.position, k, 0); }
  LinearAction y(int k) const { return axis_op(p_.position, k, 1); }
  LinearAction px(int k) const { return axis_op(p_.momentum, k, 0); }
  LinearAction py(int k) const { return axis_op(p_.momentum, k, 1); }
  LinearAction sz(int k) const {
    check_particle(k);
    auto f = p_.spin_z;
    return [f, k](std::span<const cplx> in, std::span<cplx> out) { f(in, out, k); };
  }
  /// L_z = X P_y - Y P_x
  LinearAction lz(int k) const {
    check_particle(k);
    if (p_.shape.dims != 2) throw ShapeError("L_z needs a 2D grid");
    auto pos = p_.position;
    auto mom = p_.momentum;
    return [pos, mom, k](std::span<const cplx> in, std::span<cplx> out) {
      Amplitudes t(in.size()), u(in.size());
      mom(in, t, k, 1);
      pos(t, out, k, 0);
      mom(in, t, k, 0);
      pos(t, u, k, 1);
      axpy(-1.0, u, out);
    };
  }
  LinearAction site(FamilyKind kind, int k) const {
    switch (kind) {
      case FamilyKind::PositionX: return x(k);
      case FamilyKind::MomentumPx: return px(k);
      case FamilyKind::AngularMomentumLz: return lz(k);
      case FamilyKind::SpinZ: return sz(k);
      case FamilyKind::TotalJz: {
        auto l = lz(k), s = sz(k);
        return [l, s](std::span<const cplx> in, std::span<cplx> out) {
          Amplitudes t(in.size());
          l(in, out);
          s(in, t);
          axpy(1.0, t, out);
        };
      }
    }
    throw ShapeError("unknown family kind");
  }
  LinearAction o(int k) const { return site(candidate_, k); }
  std::vector<LinearAction> family(FamilyKind kind) const {
    std::vector<LinearAction> v;
    for (int j = 0; j < particles(); ++j) v.push_back(site(kind, j));
    return v;
  }

  void check_particle(int k) const {
    if (k < 0 || k >= particles()) throw ShapeError("particle index " + std::to_string(k) + " out of range");
  }

 private:
  LinearAction axis_op(const std::function<void(std::span<const cplx>, std::span<cplx>, int, int)>& f, int k,
                       int axis) const {
    check_particle(k);
    if (axis >= p_.shape.dims) throw ShapeError("no such axis");
    return [f, k, axis](std::span<const cplx> in, std::span<cplx> out) { f(in, out, k, axis); };
  }

  OperatorProvider p_;
  FamilyKind candidate_;
};

/// max over particles and axes of |[X, P] psi - i psi| / |psi|.
inline double calibration_residual(const OperatorSet& set, std::span<const cplx> psi) {
  const auto space = set.space();
  const double n = norm(space, psi);
  double worst = 0.0;
  Amplitudes a(psi.size()), b(psi.size()), c(psi.size());
  for (int k = 0; k < set.particles(); ++k) {
    for (int axis = 0; axis < set.shape().dims; ++axis) {
      const auto x = axis == 0 ? set.x(k) : set.y(k);
      const auto p = axis == 0 ? set.px(k) : set.py(k);
      p(psi, a);
      x(a, b);  // X P psi
      x(psi, a);
      p(a, c);  // P X psi
      for (std::size_t i = 0; i < psi.size(); ++i) b[i] -= c[i] + cplx{0.0, 1.0} * psi[i];
      worst = std::max(worst, norm(space, b) / n);
    }
  }
  return worst;
}

inline double sum_expectation(const StateSpace& space, const std::vector<LinearAction>& ops, std::span<const cplx> psi) {
  double s = 0.0;
  for (const auto& o : ops) s += std::real(expectation(space, o, psi));
  return s;
}

/// G from site operators with the state-dependent mean frozen at `mean_sum`.
inline LinearAction g_operator(std::vector<LinearAction> o, int k, double mean_sum) {
  return [o = std::move(o), k, mean_sum](std::span<const cplx> in, std::span<cplx> out) {
    Amplitudes ok(in.size()), t(in.size());
    o[k](in, ok);
    o[k](ok, out);
    for (int j = 0; j < static_cast<int>(o.size()); ++j) {
      if (j == k) continue;
      o[j](ok, t);
      axpy(2.0, t, out);
    }
    axpy(-2.0 * mean_sum, ok, out);
  };
}

inline LinearAction build_G(const OperatorSet& set, std::span<const cplx> psi, int k) {
  set.check_particle(k);
  auto o = set.family(set.candidate());
  const double mean = sum_expectation(set.space(), o, psi);
  return g_operator(std::move(o), k, mean);
}

struct GSplit {
  LinearAction total, I, II, III;
};

/// O = L + S regrouped into the orbital, spin and mixed parts.
inline GSplit build_G_split(const OperatorSet& set, std::span<const cplx> psi, int k) {
  set.check_particle(k);
  const auto space = set.space();
  auto l = set.family(FamilyKind::AngularMomentumLz);
  auto s = set.family(FamilyKind::SpinZ);
  auto j = set.family(FamilyKind::TotalJz);
  const double mean_l = sum_expectation(space, l, psi);
  const double mean_s = sum_expectation(space, s, psi);
  const double mean_j = sum_expectation(space, j, psi);
  GSplit g;
  g.total = g_operator(j, k, mean_j);
  g.I = g_operator(l, k, mean_l);
  g.II = g_operator(s, k, mean_s);
  g.III = [l, s, k, mean_l, mean_s](std::span<const cplx> in, std::span<cplx> out) {
    Amplitudes a(in.size()), b(in.size());
    std::fill(out.begin(), out.end(), cplx{});
    s[k](in, a);
    l[k](a, b);
    axpy(2.0, b, out);  // 2 L_k S_k
    for (int jj = 0; jj < static_cast<int>(l.size()); ++jj) {
      if (jj == k) continue;
      s[jj](in, a);
      l[k](a, b);
      axpy(2.0, b, out);  // 2 L_k S_j
      l[jj](in, a);
      s[k](a, b);
      axpy(2.0, b, out);  // 2 S_k L_j
    }
    l[k](in, a);
    axpy(-2.0 * mean_s, a, out);
    s[k](in, a);
    axpy(-2.0 * mean_l, a, out);
  };
  return g;
}

/// <psi|A B psi> - <psi|B A psi>
inline cplx commutator_expectation(const StateSpace& space, const LinearAction& a, const LinearAction& b,
                                   std::span<const cplx> psi) {
  const auto bp = apply_op(b, psi);
  const auto ap = apply_op(a, psi);
  const auto abp = apply_op(a, bp);
  const auto bap = apply_op(b, ap);
  return inner(space, psi, abp) - inner(space, psi, bap);
}

/// Natural size of <[A, B]>: 2 |A psi| |B psi|.
inline double commutator_scale(const StateSpace& space, const LinearAction& a, const LinearAction& b,
                               std::span<const cplx> psi) {
  return 2.0 * norm(space, apply_op(a, psi)) * norm(space, apply_op(b, psi));
}

inline cplx check_com_position(const OperatorSet& set, std::span<const cplx> psi, int k) {
  return commutator_expectation(set.space(), set.x(k), build_G(set, psi, k), psi);
}

inline cplx check_com_momentum(const OperatorSet& set, std::span<const cplx> psi, int k) {
  return commutator_expectation(set.space(), set.px(k), build_G(set, psi, k), psi);
}

inline double anomaly_F(const OperatorSet& set, std::span<const cplx> psi, int k) {
  set.check_particle(k);
  if (set.shape().dims != 2) throw ShapeError("the anomaly term needs a 2D grid");
  const auto space = set.space();
  const auto l = set.family(FamilyKind::AngularMomentumLz);
  const auto yk = apply_op(set.y(k), psi);
  const auto lk = apply_op(l[k], psi);
  double bracket = 2.0 * std::real(inner(space, yk, lk));  // <Y L + L Y>
  double mean_l = 0.0;
  for (int j = 0; j < set.particles(); ++j) {
    const auto lj = j == k ? lk : apply_op(l[j], psi);
    mean_l += std::real(inner(space, psi, lj));
    if (j != k) bracket += 2.0 * std::real(inner(space, lj, yk));  // <L_j Y_k>
  }
  bracket -= 2.0 * mean_l * std::real(inner(space, psi, yk));
  return -bracket;
}

/// 1 - purity of the spin reduced density matrix; 0 for psi(x) chi(s).
inline double product_defect(const GridShape& shape, std::span<const cplx> psi) {
  const std::size_t sc = shape.spin_count();
  if (sc == 1) return 0.0;
  Eigen::MatrixXcd rho = Eigen::MatrixXcd::Zero(sc, sc);
  const std::size_t spatial = shape.spatial_size();
  double total = 0.0;
  for (std::size_t x = 0; x < spatial; ++x) {
    for (std::size_t a = 0; a < sc; ++a) {
      total += std::norm(psi[x * sc + a]);
      for (std::size_t b = 0; b < sc; ++b) rho(a, b) += psi[x * sc + a] * std::conj(psi[x * sc + b]);
    }
  }
  rho /= total;
  return std::max(0.0, 1.0 - (rho * rho).trace().real());
}

struct SpinSectorValues {
  cplx II;
  cplx III;
  double product_defect = 0.0;
  bool is_product = true;
};

inline SpinSectorValues check_spin_sector(const OperatorSet& set, std::span<const cplx> psi, int k,
                                          double product_tolerance = 1e-12) {
  if (set.shape().spin_levels != 2 || set.shape().dims != 2) throw ShapeError("spin sector check needs 2D spinors");
  const auto g = build_G_split(set, psi, k);
  SpinSectorValues v;
  v.II = commutator_expectation(set.space(), set.x(k), g.II, psi);
  v.III = commutator_expectation(set.space(), set.x(k), g.III, psi);
  v.product_defect = product_defect(set.shape(), psi);
  v.is_product = v.product_defect <= product_tolerance;
  return v;
}

struct ConstraintCheck {
  std::string name;
  cplx value;
  double scale = 0.0;
  double tolerance = 0.0;  // relative to scale
  bool pass = false;
  /// <[A, B]> of self-adjoint A, B is imaginary; false flags a broken operator.
  bool imaginary = true;
};

struct ConstraintReport {
  FamilyKind candidate = FamilyKind::PositionX;
  int particle = 0;
  std::vector<ConstraintCheck> checks;
  double calibration_residual = 0.0;
  double tolerance = 0.0;
  bool verdict = false;
};

struct AdmissibilityOptions {
  double calibration_threshold = 1e-8;
  double tolerance_factor = 100.0;
};

inline ConstraintCheck make_check(std::string name, cplx value, double scale, double tol) {
  ConstraintCheck c{std::move(name), value, scale, tol};
  c.pass = std::abs(value) <= tol * scale;
  c.imaginary = std::abs(value.real()) <= tol * scale + 1e-14 * scale;
  return c;
}

inline ConstraintReport evaluate_candidate(const OperatorSet& set, std::span<const cplx> psi, int k,
                                           const AdmissibilityOptions& opt = {}) {
  ConstraintReport r;
  r.candidate = set.candidate();
  r.particle = k;
  r.calibration_residual = calibration_residual(set, psi);
  if (!(r.calibration_residual <= opt.calibration_threshold)) {
    throw CalibrationFailure("calibration residual " + format_short(r.calibration_residual) + " exceeds " +
                                 format_short(opt.calibration_threshold) + "; no verdict",
                             r.calibration_residual);
  }
  r.tolerance = opt.tolerance_factor * r.calibration_residual;
  const auto space = set.space();
  const auto g = build_G(set, psi, k);
  const double sx = commutator_scale(space, set.x(k), g, psi);
  const double sp = commutator_scale(space, set.px(k), g, psi);
  r.checks.push_back(make_check("com_position", commutator_expectation(space, set.x(k), g, psi), sx, r.tolerance));
  r.checks.push_back(make_check("com_momentum", commutator_expectation(space, set.px(k), g, psi), sp, r.tolerance));
  if (set.shape().dims == 2 &&
      (set.candidate() == FamilyKind::AngularMomentumLz || set.candidate() == FamilyKind::TotalJz)) {
    auto f = make_check("anomaly_F", anomaly_F(set, psi, k), sx, r.tolerance);
    f.imaginary = true;  // F is real by construction
    r.checks.push_back(f);
  }
  r.verdict = std::all_of(r.checks.begin(), r.checks.end(), [](const auto& c) { return c.pass; });
  return r;
}

inline nlohmann::json to_json(const ConstraintReport& r) {
  nlohmann::json checks = nlohmann::json::array();
  for (const auto& c : r.checks) {
    checks.push_back({{"name", c.name},
                      {"value_re", c.value.real()},
                      {"value_im", c.value.imag()},
                      {"scale", c.scale},
                      {"tolerance", c.tolerance},
                      {"pass", c.pass}});
  }
  return {{"candidate", std::string(to_string(r.candidate))},
          {"particle", r.particle},
          {"checks", checks},
          {"calibration_residual", r.calibration_residual},
          {"verdict", r.verdict ? "pass" : "fail"}};
}

}  // namespace wfe
