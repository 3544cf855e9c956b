#include "regime/simulator.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace regime;
using regime::testing::mat;
using regime::testing::vec;

namespace {

// dX = beta_i X dt + sqrt(2) dB on [0, inf), beta = (kappa - 1, kappa), with
// q_12(x) = b(1 + 2x)/(1 + x), q_21(x) = a(1 + 2x)/(2(1 + x)), a = 2, b = 1.
SdeModel two_regime_half_line(double kappa) {
  SdeModel m;
  m.regimes = 2;
  m.drift = [kappa](const Vector<>& x, Index i, Vector<>& out) { out(0) = (i == 0 ? kappa - 1 : kappa) * x(0); };
  m.diffusion = [](const Vector<>&, Index, Matrix<>& out) { out(0, 0) = std::sqrt(2.0); };
  StateDependentRates<> rates;
  rates.regimes = 2;
  // With a = 2, b = 1 both rates equal (1 + 2x)/(1 + x).
  rates.rate = [](const Vector<>& x, Index, Index) { return (1 + 2 * x(0)) / (1 + x(0)); };
  m.rates = rates;
  m.boundary = Boundary::ReflectAtZero;
  return m;
}

SdeModel linear(Vector<> b, Matrix<> q, double sigma) {
  SdeModel m;
  m.regimes = b.size();
  m.drift = [b](const Vector<>& x, Index i, Vector<>& out) { out(0) = b(i) * x(0); };
  m.diffusion = [sigma](const Vector<>&, Index, Matrix<>& out) { out(0, 0) = sigma; };
  m.rates = QMatrix<>::validate(q);
  return m;
}

SimulationConfig config(double horizon, int trials, std::uint64_t seed) {
  SimulationConfig c;
  c.x0 = vec({5.0});
  c.horizon = horizon;
  c.trials = trials;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("step with zero coefficients only switches regimes") {
  SdeModel m;
  m.regimes = 2;
  m.drift = [](const Vector<>&, Index, Vector<>& out) { out.setZero(); };
  m.diffusion = [](const Vector<>&, Index, Matrix<>& out) { out.setZero(); };
  m.rates = QMatrix<>::validate(mat({{-1, 1}, {2, -2}}));
  Stepper stepper(m);
  auto rng = path_rng(5, 0);
  const double dt = 0.05;
  int switches = 0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    Vector<> x = vec({3.0});
    Index i = 0;
    stepper.step(x, i, dt, rng);
    CHECK(x(0) == 3.0);
    switches += static_cast<int>(i);
  }
  // P(switch) = q_12 dt = 0.05.
  CHECK(static_cast<double>(switches) / n == doctest::Approx(0.05).epsilon(0.03));
}

TEST_CASE("single-regime OU reaches unit stationary variance") {
  const auto m = linear(vec({-1.0}), mat({{0}}), std::sqrt(2.0));
  const int n = 8000;
  double sum = 0, sum2 = 0;
  for (int p = 0; p < n; ++p) {
    auto rng = path_rng(17, static_cast<std::uint64_t>(p));
    const auto s = simulate_path(m, vec({0.0}), 0, 6.0, 1e-2, rng);
    sum += s.x(0);
    sum2 += s.x(0) * s.x(0);
  }
  const double mean = sum / n;
  const double var = sum2 / n - mean * mean;
  CHECK(var == doctest::Approx(1.0).epsilon(0.05));
}

TEST_CASE("regime occupation matches the invariant measure") {
  const auto q = QMatrix<>::validate(mat({{-1, 1}, {2, -2}}));
  const Vector<> mu = invariant_measure(q).mu;
  const Vector<> stepwise = regime_occupation(q, 0, 5000.0, 1e-2, 3);
  const Vector<> clock = regime_occupation(q, 0, 5000.0, 1e-2, 3, true);
  for (Index i = 0; i < 2; ++i) {
    CHECK(stepwise(i) == doctest::Approx(mu(i)).epsilon(0.02));
    CHECK(clock(i) == doctest::Approx(mu(i)).epsilon(0.02));
  }
  CHECK_THROWS_AS(regime_occupation(q, 0, 10.0, 0.1, 3), Error);
}

TEST_CASE("truncate_chain") {
  const auto chain = TailHomogeneousChain<>::birth_death(1.0, 2.0);
  const auto q3 = truncate_chain(chain, 3);
  CHECK((q3.matrix() - mat({{-1, 1, 0}, {2, -3, 1}, {0, 2, -2}})).cwiseAbs().maxCoeff() == 0);

  const auto q30 = truncate_chain(chain, 30);
  const Vector<> mu = invariant_measure(q30).mu;
  for (Index k = 1; k < 20; ++k) CHECK(mu(k) / mu(k - 1) == doctest::Approx(0.5).epsilon(1e-8));
  CHECK(mu.tail(20).sum() < 1e-3);
  CHECK_THROWS_AS(truncate_chain(chain, 1), Error);
}

TEST_CASE("run_ensemble is reproducible and thread-count independent") {
  const auto m = two_regime_half_line(0.3);
  auto cfg = config(20.0, 120, 99);
  cfg.dt = 2e-3;
  const auto a = run_ensemble(m, cfg);
  const auto b = run_ensemble(m, cfg);
  cfg.threads = 3;
  const auto c = run_ensemble(m, cfg);
  for (const auto* r : {&b, &c}) {
    CHECK(r->returned == a.returned);
    CHECK(r->escaped == a.escaped);
    CHECK(std::memcmp(&r->mean_hitting_time, &a.mean_hitting_time, sizeof(double)) == 0);
    CHECK(std::memcmp(&r->growth_exponent, &a.growth_exponent, sizeof(double)) == 0);
  }
  CHECK(a.returned + a.escaped + a.censored == a.trials);
  cfg.seed = 100;
  cfg.threads = 1;
  const auto d = run_ensemble(m, cfg);
  CHECK(d.mean_hitting_time != a.mean_hitting_time);
}

TEST_CASE("run_ensemble separates recurrent and transient regimes") {
  auto cfg = config(50.0, 200, 1);
  const auto rec = run_ensemble(two_regime_half_line(0.3), cfg);
  CHECK(rec.return_fraction >= 0.95);
  CHECK(rec.mean_hitting_time > 0);
  CHECK(rec.return_ci == doctest::Approx(proportion_ci(rec.return_fraction, 200)));

  const auto tr = run_ensemble(two_regime_half_line(1.2), cfg);
  CHECK(tr.escape_fraction >= 0.8);
  CHECK(tr.growth_exponent > 0);
  CHECK(tr.capped > 0);

  const auto ou = run_ensemble(linear(vec({-2, 1}), mat({{-1, 1}, {2, -2}}), 1.0), cfg);
  CHECK(ou.return_fraction >= 0.95);
}

TEST_CASE("halving dt moves the return fraction by less than the CI width") {
  auto cfg = config(50.0, 200, 8);
  cfg.dt = 2e-3;
  const auto coarse = run_ensemble(two_regime_half_line(0.3), cfg);
  cfg.dt = 1e-3;
  const auto fine = run_ensemble(two_regime_half_line(0.3), cfg);
  const double width = std::max(2 * coarse.return_ci, 2 * fine.return_ci);
  CHECK(std::abs(coarse.return_fraction - fine.return_fraction) <= std::max(width, 1.0 / 200));
}

TEST_CASE("simulator errors") {
  auto m = linear(vec({-1, 1}), mat({{-50, 50}, {1, -1}}), 1.0);
  auto cfg = config(1.0, 100, 1);
  cfg.dt = 0.01;
  try {
    run_ensemble(m, cfg);
    FAIL("expected StepTooLarge");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::StepTooLarge);
  }
  cfg.dt = 1e-3;
  cfg.trials = 50;
  CHECK_THROWS_AS(run_ensemble(m, cfg), Error);
  cfg.trials = 100;
  cfg.x0 = vec({0.5});
  CHECK_THROWS_AS(run_ensemble(m, cfg), Error);
  m.boundary = Boundary::ReflectAtZero;
  m.dimension = 2;
  CHECK_THROWS_AS(m.check(), Error);
}
