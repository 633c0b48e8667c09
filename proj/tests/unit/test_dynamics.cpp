#include <gtest/gtest.h>

#include <random>

#include "support.hpp"
#include "wfe/dynamics.hpp"
#include "wfe/grid_model.hpp"
#include "wfe/toy_model.hpp"

using namespace wfe;

namespace {

ToyParams small_toy(int n, double w) {
  ToyParams p;
  p.N = n;
  p.w = w;
  return p;
}

/// Reduced-basis dense family sum, from the enumerated Dicke isometry.
oracle::Mat reduced_family(int n) {
  const auto b = oracle::dicke_isometry(n);
  return b.adjoint() * oracle::total_sz(n) * b;
}

double bare_wfe(const oracle::Mat& a, const oracle::Vec& psi, double w) {
  const cplx m1 = psi.dot(a * psi);
  const cplx m2 = psi.dot(a * (a * psi));
  return w * (m2.real() - m1.real() * m1.real());
}

ModelSpec zero_hamiltonian(const ModelSpec& m) {
  ModelSpec z = m;
  z.hamiltonian = [](std::span<const cplx>, std::span<cplx> out) { std::fill(out.begin(), out.end(), cplx{}); };
  return z;
}


}  // namespace

TEST(WfeGradient, EigenstateGivesRealMultiple) {
  const auto p = small_toy(6, 0.3);
  const auto model = toy_model(p);
  const auto psi = SymmetricState::basis(6, 0, 1);  // S_total = 1/2 + 3/2 = 2
  const auto g = wfe_gradient(model, psi.amplitudes());
  for (std::size_t i = 0; i < g.size(); ++i) {
    EXPECT_NEAR(std::abs(g[i] - (-0.3 * 4.0) * psi.amplitudes()[i]), 0.0, 1e-14);
  }
}

TEST(WfeGradient, VanishesWithoutPenalty) {
  std::mt19937_64 rng(1);
  const auto model = toy_model(small_toy(6, 0.0));
  const auto g = wfe_gradient(model, oracle::random_state(12, rng));
  for (const auto& z : g) EXPECT_EQ(z, cplx(0.0));
}

TEST(WfeGradient, MatchesFiniteDifferencesOfTheBareFunctional) {
  std::mt19937_64 rng(42);
  const double w = 0.7;
  const auto model = toy_model(small_toy(6, w));
  const auto a = reduced_family(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto psi = oracle::random_state(12, rng);
    const auto g = wfe_gradient(model, psi);
    oracle::Vec v = oracle::to_vec(psi);
    const double h = 1e-5;
    double err = 0.0, ref = 0.0;
    for (int i = 0; i < v.size(); ++i) {
      for (int part = 0; part < 2; ++part) {
        const cplx step = part == 0 ? cplx(h, 0.0) : cplx(0.0, h);
        oracle::Vec up = v, dn = v;
        up(i) += step;
        dn(i) -= step;
        const double fd = (bare_wfe(a, up, w) - bare_wfe(a, dn, w)) / (2.0 * h);
        const double an = 2.0 * (part == 0 ? g[i].real() : g[i].imag());
        err = std::max(err, std::abs(fd - an));
        ref = std::max(ref, std::abs(an));
      }
    }
    EXPECT_LE(err / ref, 1e-6) << trial;
  }
}

TEST(Rhs, StationaryStateRotatesAtItsEnergy) {
  const auto p = small_toy(7, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(toy_dense_hamiltonian(p));
  Amplitudes psi(14);
  for (int i = 0; i < 14; ++i) psi[i] = es.eigenvectors()(i, 3);
  const auto r = rhs(toy_model(p), psi);
  for (int i = 0; i < 14; ++i) EXPECT_NEAR(std::abs(r[i] - cplx(0.0, -es.eigenvalues()(3)) * psi[i]), 0.0, 1e-13);
}

TEST(Rhs, IsOrthogonalToTheStateInTheRealSense) {
  std::mt19937_64 rng(3);
  const auto model = toy_model(small_toy(8, 1.5));
  for (int trial = 0; trial < 50; ++trial) {
    const auto psi = oracle::random_state(16, rng);
    EXPECT_LE(std::abs(raw_dot(psi, rhs(model, psi)).real()), 1e-12);
  }
}

TEST(Rhs, IsPhaseCovariant) {
  std::mt19937_64 rng(4);
  const auto model = toy_model(small_toy(8, 0.9));
  const auto psi = oracle::random_state(16, rng);
  const cplx ph = std::polar(1.0, 0.77);
  Amplitudes rotated(psi.size());
  for (std::size_t i = 0; i < psi.size(); ++i) rotated[i] = ph * psi[i];
  const auto a = rhs(model, psi), b = rhs(model, rotated);
  for (std::size_t i = 0; i < psi.size(); ++i) EXPECT_NEAR(std::abs(b[i] - ph * a[i]), 0.0, 1e-14);
}

TEST(Evolve, LinearEigenstateOnlyPicksUpAPhase) {
  const auto p = small_toy(9, 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(toy_dense_hamiltonian(p));
  Amplitudes psi(18);
  for (int i = 0; i < 18; ++i) psi[i] = es.eigenvectors()(i, 0);
  const double T = 5.0, e = es.eigenvalues()(0);
  const auto out = propagate(psi, toy_model(p), T, 0.01);
  Amplitudes expect(18);
  for (int i = 0; i < 18; ++i) expect[i] = std::polar(1.0, -e * T) * psi[i];
  EXPECT_GE(std::abs(raw_dot(expect, out)), 1.0 - 1e-8);
  EXPECT_GE(std::real(raw_dot(expect, out)), 1.0 - 1e-4);  // phase, not just overlap
}

TEST(Evolve, PureWfeOnFamilyEigenstateIsPhaseOnly) {
  const double w = 0.1, T = 5.0;
  const auto model = zero_hamiltonian(toy_model(small_toy(6, w)));
  const auto psi = SymmetricState::basis(6, 0, 1);  // lambda = 2
  const auto out = propagate(psi.amplitudes(), model, T, 0.01);
  const std::size_t k = SymmetricState::index(0, 1, 5);
  EXPECT_NEAR(std::norm(out[k]), 1.0, 1e-10);
  // midpoint phase error is second order: about T (w lambda^2)^3 dt^2 / 2 = 1.6e-5 here
  EXPECT_NEAR(std::abs(out[k] - std::polar(1.0, w * 4.0 * T)), 0.0, 3e-5);
  const auto finer = propagate(psi.amplitudes(), model, T, 0.005);
  EXPECT_NEAR(std::abs(finer[k] - std::polar(1.0, w * 4.0 * T)), 0.0, 3e-5 / 4.0);
}

TEST(Evolve, MidpointIsSecondOrder) {
  std::mt19937_64 rng(12);
  const auto p = small_toy(6, 0.3);
  const auto model = toy_model(p);
  const auto psi = oracle::random_state(12, rng);
  const double T = 1.0, dt = 0.1;
  IntegratorOptions opt;
  opt.contraction = 1.0;  // one substep at every dt below, so the study sees the bare method
  ASSERT_EQ(safeguard_substeps(model, dt, opt), 1);
  const auto ref = propagate(psi, model, T, dt / 16, opt);
  const double e1 = oracle::max_abs_diff(propagate(psi, model, T, dt, opt), ref);
  const double e2 = oracle::max_abs_diff(propagate(psi, model, T, dt / 2, opt), ref);
  EXPECT_NEAR(e1 / e2, 4.0, 1.0);
}

TEST(Evolve, ReferenceMethodsConvergeAtTheirOrders) {
  std::mt19937_64 rng(13);
  const auto model = toy_model(small_toy(6, 0.3));
  const auto psi = oracle::random_state(12, rng);
  const double T = 1.0, dt = 0.1;
  IntegratorOptions rk;
  rk.method = Method::Rk4;
  IntegratorOptions tao;
  tao.method = Method::ExtendedPhaseSpace;
  const auto ref = propagate(psi, model, T, dt / 64);
  const double r1 = oracle::max_abs_diff(propagate(psi, model, T, dt, rk), ref);
  const double r2 = oracle::max_abs_diff(propagate(psi, model, T, dt / 2, rk), ref);
  EXPECT_GT(r1 / r2, 12.0);
  const double t1 = oracle::max_abs_diff(propagate(psi, model, T, dt / 2, tao), ref);
  const double t2 = oracle::max_abs_diff(propagate(psi, model, T, dt / 4, tao), ref);
  EXPECT_NEAR(t1 / t2, 4.0, 1.0);
}

TEST(Evolve, ConservesNormAndEnergy) {
  ToyParams p = small_toy(10, 0.1);
  p.T = 10.0;
  const auto model = toy_model(p);
  const auto psi0 = toy_initial_state(p, 7);
  const auto rec = evolve(psi0.amplitudes(), model, p.T, p.dt, symmetric_observer(model, p.N), 10);
  const double e0 = rec.reports.front().E_total;
  for (const auto& r : rec.reports) {
    EXPECT_LE(std::abs(r.norm - 1.0), 1e-9);
    EXPECT_LE(std::abs(r.E_total - e0) / std::abs(e0), 1e-6);
  }
  EXPECT_EQ(rec.metadata.stats.steps, 1000);
  EXPECT_LE(rec.metadata.stats.max_residual, 1e-12);
}

TEST(Evolve, IsPhaseCovariant) {
  ToyParams p = small_toy(8, 0.4);
  const auto model = toy_model(p);
  const auto psi0 = toy_initial_state(p, 3);
  const cplx ph = std::polar(1.0, -1.1);
  Amplitudes rotated(psi0.dim());
  for (std::size_t i = 0; i < rotated.size(); ++i) rotated[i] = ph * psi0.amplitudes()[i];
  const auto a = propagate(psi0.amplitudes(), model, 3.0, 0.01);
  const auto b = propagate(rotated, model, 3.0, 0.01);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(std::abs(b[i] - ph * a[i]), 0.0, 1e-10);
}

TEST(Evolve, RecordsOnScheduleIncludingTheEnd) {
  const auto p = small_toy(5, 0.1);
  const auto model = toy_model(p);
  const auto rec = evolve(toy_initial_state(p, 1).amplitudes(), model, 0.25, 0.01, symmetric_observer(model, 5), 10);
  ASSERT_EQ(rec.times.size(), 4u);
  EXPECT_DOUBLE_EQ(rec.times[1], 0.1);
  EXPECT_DOUBLE_EQ(rec.times.back(), 0.25);
}

TEST(Evolve, RejectsBadSchedules) {
  const auto p = small_toy(5, 0.1);
  const auto model = toy_model(p);
  const auto psi = toy_initial_state(p, 1);
  EXPECT_THROW(propagate(psi.amplitudes(), model, 1.005, 0.01), DomainError);
  EXPECT_THROW(propagate(psi.amplitudes(), model, 1.0, 0.0), DomainError);
  EXPECT_THROW(propagate(Amplitudes(3), model, 1.0, 0.1), ShapeError);
}

TEST(Evolve, StageSolverFailureKeepsThePartialRecord) {
  const auto p = small_toy(6, 0.5);
  const auto model = toy_model(p);
  IntegratorOptions opt;
  opt.max_iterations = 2;
  try {
    evolve(toy_initial_state(p, 1).amplitudes(), model, 1.0, 0.01, symmetric_observer(model, 6), 1, opt);
    FAIL() << "expected a solver failure";
  } catch (const EvolutionFailure& e) {
    EXPECT_EQ(e.partial().times.size(), 1u);
    EXPECT_NE(std::string(e.what()).find("did not converge"), std::string::npos);
    EXPECT_EQ(e.time(), 0.0);
  }
}

TEST(Evolve, ExplicitBlowUpIsReportedAsNonFinite) {
  const auto p = small_toy(6, 50.0);
  IntegratorOptions opt;
  opt.method = Method::Rk4;
  EXPECT_THROW(propagate(toy_initial_state(p, 1).amplitudes(), toy_model(p), 200.0, 1.0, opt), NumericalFailure);
}

TEST(Safeguard, BoundCoversTheTrueRatesAndSetsSubsteps) {
  const auto p = small_toy(8, 2.0);
  const auto model = toy_model(p);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(toy_dense_hamiltonian(p), Eigen::EigenvaluesOnly);
  const double rho_h = std::max(std::abs(es.eigenvalues()(0)), std::abs(es.eigenvalues()(es.eigenvalues().size() - 1)));
  const double rho_a = 4.0;  // all 8 spins up: S = 4
  const double bound = rate_bound(model);
  EXPECT_GE(bound, rho_h + 3.0 * p.w * rho_a * rho_a);
  const IntegratorOptions opt;
  for (double dt : {0.001, 0.05, 0.2}) {
    const int expect = std::max(1, static_cast<int>(std::ceil(0.5 * dt * bound / opt.contraction)));
    EXPECT_EQ(safeguard_substeps(model, dt, opt), expect);
  }
  EXPECT_GT(safeguard_substeps(model, 0.2, opt), 1);
}

TEST(Safeguard, LargeStepsStillConverge) {
  const auto p = small_toy(8, 2.0);
  const auto model = toy_model(p);
  const auto psi0 = toy_initial_state(p, 2);
  const auto rec = evolve(psi0.amplitudes(), model, 2.0, 0.2, symmetric_observer(model, 8), 1);
  EXPECT_GT(rec.metadata.stats.substeps, 1);
  EXPECT_LE(std::abs(rec.reports.back().norm - 1.0), 1e-9);
}

TEST(Sensitivity, IdenticalInputsGiveZeroDivergence) {
  const auto p = small_toy(10, 0.1);
  const auto model = toy_model(p);
  const auto psi = toy_initial_state(p, 5);
  ReadoutMap readout = [](std::span<const cplx> a) {
    return readout_distribution(SymmetricState(10, Amplitudes(a.begin(), a.end())));
  };
  const auto d = sensitivity_run(psi.amplitudes(), psi.amplitudes(), model, 2.0, 0.01, readout, 10);
  for (double v : d.distribution_distance) EXPECT_EQ(v, 0.0);
  for (double v : d.readout_difference) EXPECT_EQ(v, 0.0);
}

TEST(Sensitivity, LinearFlowCannotAmplifyDifferences) {
  ToyParams a = small_toy(10, 0.0), b = a;
  a.qubit = QubitAmplitudes::tilted(0.01);
  b.qubit = QubitAmplitudes::tilted(-0.01);
  const auto model = toy_model(a);
  const auto sa = toy_initial_state(a, 1), sb = toy_initial_state(b, 1);
  Amplitudes diff(sa.dim());
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = sa.amplitudes()[i] - sb.amplitudes()[i];
  const double d0 = norm(sa.space(), diff);
  ReadoutMap readout = [](std::span<const cplx> x) {
    return readout_distribution(SymmetricState(10, Amplitudes(x.begin(), x.end())));
  };
  const auto d = sensitivity_run(sa.amplitudes(), sb.amplitudes(), model, 7.0, 0.01, readout, 10);
  for (double v : d.distribution_distance) EXPECT_LE(v, 2.0 * d0 + 1e-12);
  const auto fa = propagate(sa.amplitudes(), model, 7.0, 0.01), fb = propagate(sb.amplitudes(), model, 7.0, 0.01);
  for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = fa[i] - fb[i];
  EXPECT_NEAR(norm(sa.space(), diff), d0, 1e-10);
}

namespace {

// d<com>/dt by five-point differences against <sum P>/(N m) along a recorded run.
double ehrenfest_gap(const GridShape& g, double w, FamilyKind kind, double pair, double dt = 1e-3,
                     IntegratorOptions opt = {}) {
  auto ops = std::make_shared<const GridOperators>(g);
  GridHamiltonianSpec spec;
  spec.mass = 1.3;
  spec.potential = [](const Point& x) { return 0.5 * x[0] * x[0]; };
  spec.pair_stiffness = pair;
  const auto model = grid_model(ops, spec, w, kind);
  std::vector<Orbital> orb;
  for (int p = 0; p < g.particles; ++p) orb.push_back(gaussian_orbital({-0.5 + p, 0.0}, 0.9, {0.8 - 0.5 * p, 0.0}));
  const auto psi = build_grid_state(g, {{1.0, orb, {}}});
  const auto rec = evolve(psi.amplitudes(), model, 0.2, dt, grid_observer(model, ops), 1, opt);
  double worst = 0.0;
  auto x = [&](std::size_t k) { return rec.reports[k].com[0]; };
  for (std::size_t k = 2; k + 2 < rec.reports.size(); ++k) {
    const double dx = (x(k - 2) - 8.0 * x(k - 1) + 8.0 * x(k + 1) - x(k + 2)) / (12.0 * dt);
    const double v = rec.reports[k].momentum[0] / (g.particles * spec.mass);
    worst = std::max(worst, std::abs(dx - v) / std::abs(v));
  }
  return worst;
}

}  // namespace

TEST(Ehrenfest, ComVelocityMatchesMomentumWithoutPenalty) {
  EXPECT_LE(ehrenfest_gap({1, 1, 64, 10.0, 1}, 0.0, FamilyKind::PositionX, 0.0), 1e-6);
}

TEST(Ehrenfest, PositionFamilyLeavesComUntouched) {
  // strong penalty: default substeps leave ~1e-6 of midpoint error, finer ones resolve it
  IntegratorOptions fine;
  fine.contraction = 0.0625;
  EXPECT_LE(ehrenfest_gap({2, 1, 48, 10.0, 1}, 0.5, FamilyKind::PositionX, 0.7, 1e-3, fine), 1e-6);
}

TEST(Ehrenfest, MomentumFamilyLeavesComUntouched) {
  EXPECT_LE(ehrenfest_gap({2, 1, 48, 10.0, 1}, 0.5, FamilyKind::MomentumPx, 0.7), 1e-6);
}
