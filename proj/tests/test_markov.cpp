#include "regime/markov.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

using namespace regime;
using regime::testing::mat;
using regime::testing::vec;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::InvalidArgument;
}

}  // namespace

TEST_CASE("validate_qmatrix accepts and rejects the basic shapes") {
  CHECK_NOTHROW(validate_qmatrix(mat({{-1, 1}, {2, -2}})));
  CHECK_NOTHROW(validate_qmatrix(mat({{0}})));
  CHECK(code_of([] { validate_qmatrix(mat({{-1, 1}, {0, 0}})); }) == ErrorCode::Reducible);
  CHECK(code_of([] { validate_qmatrix(mat({{-1, 0.5}, {2, -2}})); }) == ErrorCode::RowSumNonzero);
  CHECK(code_of([] { validate_qmatrix(mat({{1, -1}, {2, -2}})); }) == ErrorCode::NegativeOffDiagonal);
  CHECK(code_of([] { validate_qmatrix(mat({{-1, 1, 0}, {1, -1, 0}, {0, 1, -1}})); }) == ErrorCode::Reducible);
}

TEST_CASE("invariant_measure on small chains") {
  // Balance for [[-1,1],[2,-2]]: mu1 = 2 mu2.
  auto mu = invariant_measure(validate_qmatrix(mat({{-1, 1}, {2, -2}}))).mu;
  CHECK(mu(0) == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
  CHECK(mu(1) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));

  // [[-b,b],[a,-a]] with a=2, b=1: a mu2 = b mu1.
  const double a = 2, b = 1;
  mu = invariant_measure(validate_qmatrix(mat({{-b, b}, {a, -a}}))).mu;
  CHECK(mu(0) == doctest::Approx(2.0 / 3.0));

  mu = invariant_measure(validate_qmatrix(mat({{-3, 1, 2}, {1, -1.5, 0.5}, {2, 0.5, -2.5}}))).mu;
  for (Index i = 0; i < 3; ++i) CHECK(mu(i) == doctest::Approx(1.0 / 3.0).epsilon(1e-13));
}

TEST_CASE("invariant_measure residual and permutation equivariance") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 20;
    const auto q = regime::testing::random_generator(rng, n);
    const auto mu = invariant_measure(q).mu;
    const double qnorm = q.matrix().cwiseAbs().rowwise().sum().maxCoeff();
    CHECK((mu.transpose() * q.matrix()).cwiseAbs().maxCoeff() <= 1e-10 * qnorm);
    CHECK(std::abs(mu.sum() - 1.0) <= 1e-14);
    CHECK(mu.minCoeff() > 0);

    std::vector<Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const auto mu_perm = invariant_measure(q.permuted(perm)).mu;
    for (Index k = 0; k < n; ++k) CHECK(mu_perm(k) == doctest::Approx(mu(perm[static_cast<std::size_t>(k)])).epsilon(1e-10));
  }
}

TEST_CASE("centered_solve solves the Fredholm system") {
  const auto q = validate_qmatrix(mat({{-1, 1}, {2, -2}}));
  const auto mu = invariant_measure(q).mu;
  // Q w = (4/3, -8/3), mu.w = 0: w2 - w1 = 4/3 and 2 w1 + w2 = 0.
  const auto w = centered_solve(q, mu, vec({4.0 / 3.0, -8.0 / 3.0}));
  CHECK(w(0) == doctest::Approx(-4.0 / 9.0));
  CHECK(w(1) == doctest::Approx(8.0 / 9.0));
}

TEST_CASE("bound_rates: hints, constant rates and grid scan") {
  const double a = 2, b = 1;
  StateDependentRates<> rates;
  rates.regimes = 2;
  rates.rate = [=](const Vector<>& x, Index i, Index) {
    const double r = x(0);
    return i == 0 ? b * (1 + 2 * r) / (1 + r) : a * (1 + 2 * r) / (2 * (1 + r));
  };

  SUBCASE("closed-form hints take precedence") {
    auto hinted = rates;
    hinted.hints[{0, 1}] = {2 * b, b};
    hinted.hints[{1, 0}] = {a, a / 2};
    const auto qt = bound_rates<double>(hinted, std::nullopt);
    CHECK(qt(0, 1) == b);
    CHECK(qt(1, 0) == a);
  }
  SUBCASE("scan approaches the same bounds") {
    const auto qt = bound_rates<double>(rates, ScanDomain<>::half_line());
    CHECK(qt(0, 1) == doctest::Approx(b).epsilon(1e-12));
    CHECK(qt(1, 0) == doctest::Approx(a).epsilon(1e-6));
  }
  SUBCASE("monotone rate: the infimum sits at infinity") {
    StateDependentRates<> r2;
    r2.regimes = 2;
    r2.rate = [](const Vector<>& x, Index i, Index) { return i == 0 ? 1 + std::exp(-x(0)) : 1.0; };
    const auto qt = bound_rates<double>(r2, ScanDomain<>::half_line());
    CHECK(qt(0, 1) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(qt(1, 0) == doctest::Approx(1.0));
  }
  SUBCASE("constant rates map to themselves") {
    const auto q = mat({{-1, 0.4, 0.6}, {2, -2.5, 0.5}, {0.1, 0.2, -0.3}});
    StateDependentRates<> r3;
    r3.regimes = 3;
    r3.rate = [q](const Vector<>&, Index i, Index j) { return q(i, j); };
    const auto qt = bound_rates<double>(r3, ScanDomain<>::half_line(100.0, 20));
    CHECK((qt.matrix() - q).cwiseAbs().maxCoeff() < 1e-15);
  }
  SUBCASE("errors") {
    CHECK(code_of([&] { bound_rates<double>(rates, std::nullopt); }) == ErrorCode::EmptyGrid);
    StateDependentRates<> grow;
    grow.regimes = 2;
    grow.rate = [](const Vector<>& x, Index, Index) { return 1 + x(0) * x(0); };
    CHECK(code_of([&] { bound_rates<double>(grow, ScanDomain<>::half_line()); }) == ErrorCode::UnboundedRate);
    StateDependentRates<> vanish;
    vanish.regimes = 2;
    vanish.rate = [](const Vector<>& x, Index i, Index) { return i == 0 ? 1 + std::pow(1 + x(0), -0.1) : 1.0; };
    CHECK(code_of([&] { bound_rates<double>(vanish, ScanDomain<>::half_line()); }) == ErrorCode::ScanUnstable);
  }
}

namespace {

BetaSequence<> kappa_minus_inverse(double kappa) {
  return {[kappa](std::size_t j) { return kappa - 1.0 / static_cast<double>(j); }, kappa, 1};
}

}  // namespace

TEST_CASE("coarsen reproduces the two- and three-class birth-death data") {
  const double a = 2, b = 1, kappa = 0.5;
  const auto chain = TailHomogeneousChain<>::birth_death(b, a);
  const auto beta = kappa_minus_inverse(kappa);

  const auto two = coarsen(chain, beta, Partition::from_blocks({1, 2}));
  CHECK(two.q(0, 1) == b);
  CHECK(two.q(1, 0) == a);
  CHECK(two.beta(0) == doctest::Approx(kappa - 1));
  CHECK(two.beta(1) == doctest::Approx(kappa));

  const auto three = coarsen(chain, beta, Partition::from_blocks({1, 2, 3}));
  const Matrix<> expected = mat({{-b, b, 0}, {a, -(a + b), b}, {0, a, -a}});
  CHECK((three.q - expected).cwiseAbs().maxCoeff() == 0.0);
  CHECK(three.beta(0) == doctest::Approx(kappa - 1));
  CHECK(three.beta(1) == doctest::Approx(kappa - 0.5));
  CHECK(three.beta(2) == doctest::Approx(kappa));

  const auto one = coarsen(chain, beta, Partition::from_blocks({1}));
  CHECK(one.q.rows() == 1);
  CHECK(one.q(0, 0) == 0.0);
  CHECK(one.beta(0) == doctest::Approx(kappa));
}

TEST_CASE("partition from cutpoints") {
  const auto beta = kappa_minus_inverse(0.5);  // -0.5, 0, 1/6, 1/4, ...
  const auto p = Partition::from_cutpoints<double>(beta, {-0.25, 0.1});
  CHECK(p.class_count() == 3);
  CHECK(p.finite_members(0) == std::vector<std::size_t>{1});
  CHECK(p.finite_members(1) == std::vector<std::size_t>{2});
  CHECK(p.tail_class() == 2);
  CHECK(p.tail_start() == 3);

  const auto chain = TailHomogeneousChain<>::birth_death(1.0, 2.0);
  const auto c = coarsen(chain, beta, p);
  for (Index i = 1; i < c.beta.size(); ++i) CHECK(c.beta(i - 1) < c.beta(i));

  CHECK(code_of([&] { Partition::from_cutpoints<double>(beta, {-0.9, -0.8}); }) == ErrorCode::EmptyClass);

  // A decreasing tail settles into the class just above its limit; when the
  // limit is itself a cutpoint the class below it stays empty.
  const BetaSequence<> down{[](std::size_t j) { return 1.0 / static_cast<double>(j); }, 0.0, 1};
  const auto q = Partition::from_cutpoints<double>(down, {0.75});
  CHECK(q.tail_class() == 0);
  CHECK(q.tail_start() == 2);
  CHECK(q.finite_members(1) == std::vector<std::size_t>{1});
  CHECK(code_of([&] { Partition::from_cutpoints<double>(down, {0.0, 0.75}); }) == ErrorCode::EmptyClass);

  const BetaSequence<> unbounded{[](std::size_t j) { return static_cast<double>(j); }, INFINITY, 1};
  CHECK(code_of([&] { coarsen(chain, unbounded, Partition::from_blocks({1, 2})); }) == ErrorCode::UnboundedBeta);
}
