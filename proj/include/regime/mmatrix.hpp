#pragma once

// Nonsingular M-matrix certification and Perron-Frobenius data for
// Q_p = Q + p diag(beta).

#include "regime/core.hpp"
#include "regime/lp.hpp"
#include "regime/markov.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <sstream>

namespace regime {

/// All off-diagonal entries <= 0, with entries inside tol * max(1, max|A|)
/// treated as zero.
template <typename Derived>
bool z_pattern(const Eigen::MatrixBase<Derived>& a, typename Derived::Scalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  const Scalar band = tol * std::max(Scalar(1), a.cwiseAbs().maxCoeff());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (i != j && a(i, j) > band) return false;
    }
  }
  return true;
}

/// minors(k-1) = det of the top-left k x k block, each from its own
/// partial-pivot LU.
template <typename Derived>
Vector<typename Derived::Scalar> leading_minors(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  if (a.cols() != n) throw Error(ErrorCode::InvalidArgument, "leading_minors needs a square matrix");
  if (n > 64) throw Error(ErrorCode::InvalidArgument, "leading_minors supports n <= 64");
  Vector<Scalar> minors(n);
  for (Index k = 1; k <= n; ++k) {
    const Matrix<Scalar> block = a.topLeftCorner(k, k);
    minors(k - 1) = block.partialPivLu().determinant();
  }
  return minors;
}

template <typename Derived>
bool leading_minors_positive(const Eigen::MatrixBase<Derived>& a) {
  return (leading_minors(a).array() > 0).all();
}

/// x with x >= 1 and A x >= 1 componentwise, or nullopt when none exists.
template <typename Derived>
std::optional<Vector<typename Derived::Scalar>> semipositive_certificate(const Eigen::MatrixBase<Derived>& a) {
  using Scalar = typename Derived::Scalar;
  const Index n = a.rows();
  Matrix<Scalar> g(2 * n, n);
  g.topRows(n) = a;
  g.bottomRows(n).setIdentity();
  const Vector<Scalar> h = Vector<Scalar>::Ones(2 * n);
  auto x = find_nonnegative_solution<Scalar>(g, h);
  if (!x) {
    // Close to singularity a witness has entries ~ 1/lambda_min and phase 1
    // stalls short of feasibility. A^{-1} 1 is the natural witness there; it
    // is accepted only if it verifies directly.
    Eigen::FullPivLU<Matrix<Scalar>> lu(a.derived());
    if (!lu.isInvertible()) return std::nullopt;
    const Vector<Scalar> y = lu.solve(Vector<Scalar>::Ones(n));
    const Vector<Scalar> ay = a * y;
    const Scalar floor = std::min(y.minCoeff(), ay.minCoeff());
    if (!(floor > Scalar(0)) || !y.allFinite()) return std::nullopt;
    x = y / floor;
  }
  const Vector<Scalar> ax = a * *x;
  const Scalar slack = Scalar(1e-6);
  if (x->minCoeff() < Scalar(1) - slack || ax.minCoeff() < Scalar(1) - slack) {
    std::ostringstream msg;
    msg << "simplex point fails verification: min x = " << x->minCoeff() << ", min Ax = " << ax.minCoeff();
    throw Error(ErrorCode::SolverFailure, msg.str());
  }
  return x;
}

template <typename Scalar = double>
struct MMatrixCertificate {
  bool verdict = false;
  bool z_pattern_ok = false;
  Vector<Scalar> minors;
  std::optional<Vector<Scalar>> positive_vector;
  /// Real eigenvalue <= 0 when one exists.
  std::optional<Scalar> eigen_witness;
  /// Smallest real eigenvalue; NaN when the spectrum has no real point.
  Scalar min_real_eigenvalue = std::numeric_limits<Scalar>::quiet_NaN();
  /// |min real eigenvalue| <= 1e-8 max(1, ||A||_inf): verdicts here are
  /// round-off sensitive.
  bool near_singular = false;
};

namespace detail {

template <typename Scalar>
Scalar min_real_eigenvalue(const Matrix<Scalar>& a) {
  using std::abs;
  Eigen::EigenSolver<Matrix<Scalar>> solver(a, false);
  if (solver.info() != Eigen::Success) throw Error(ErrorCode::SolverFailure, "eigenvalue solver failed");
  const Scalar scale = std::max(Scalar(1), a.cwiseAbs().rowwise().sum().maxCoeff());
  Scalar best = std::numeric_limits<Scalar>::quiet_NaN();
  for (Index k = 0; k < a.rows(); ++k) {
    const auto lambda = solver.eigenvalues()(k);
    if (abs(lambda.imag()) <= Scalar(1e-10) * scale) {
      if (std::isnan(static_cast<double>(best)) || lambda.real() < best) best = lambda.real();
    }
  }
  return best;
}

}  // namespace detail

/// Runs the Z-pattern, leading-minor, semipositivity and real-eigenvalue
/// tests. verdict = Z-pattern && minors. On Z-matrices the three
/// determinant-free tests must agree; disagreement throws InconsistentChecks
/// unless the matrix is near-singular, where round-off may split them.
template <typename Derived>
MMatrixCertificate<typename Derived::Scalar> is_nonsingular_mmatrix(const Eigen::MatrixBase<Derived>& a_in) {
  using Scalar = typename Derived::Scalar;
  using std::abs;
  const Matrix<Scalar> a = a_in;
  if (a.rows() != a.cols() || a.rows() < 1) throw Error(ErrorCode::InvalidArgument, "square matrix expected");

  MMatrixCertificate<Scalar> cert;
  cert.z_pattern_ok = z_pattern(a);
  cert.minors = leading_minors(a);
  const bool minors_ok = (cert.minors.array() > 0).all();
  cert.min_real_eigenvalue = detail::min_real_eigenvalue(a);
  const bool has_real = !std::isnan(static_cast<double>(cert.min_real_eigenvalue));
  const bool eigen_ok = !has_real || cert.min_real_eigenvalue > Scalar(0);
  if (has_real && cert.min_real_eigenvalue <= Scalar(0)) cert.eigen_witness = cert.min_real_eigenvalue;
  const Scalar norm = std::max(Scalar(1), a.cwiseAbs().rowwise().sum().maxCoeff());
  cert.near_singular = has_real && abs(cert.min_real_eigenvalue) <= Scalar(1e-8) * norm;
  cert.positive_vector = semipositive_certificate(a);

  cert.verdict = cert.z_pattern_ok && minors_ok;
  // The LP works to a looser tolerance than the determinants, so the
  // comparison is only meaningful a little further from singularity.
  const bool comparable = !has_real || abs(cert.min_real_eigenvalue) > Scalar(1e-6) * norm;
  if (cert.z_pattern_ok && comparable) {
    const bool semipositive = cert.positive_vector.has_value();
    if (minors_ok != eigen_ok || minors_ok != semipositive) {
      std::ostringstream msg;
      msg << "minors=" << minors_ok << " eigen=" << eigen_ok << " semipositive=" << semipositive
          << " (min real eigenvalue " << cert.min_real_eigenvalue << ")";
      throw Error(ErrorCode::InconsistentChecks, msg.str());
    }
  }
  return cert;
}

/// Upper-triangular all-ones matrix H_m; (H_m v)_i = v_i + ... + v_m.
template <typename Scalar = double>
Matrix<Scalar> triangular_ones(Index m) {
  Matrix<Scalar> h = Matrix<Scalar>::Zero(m, m);
  h.template triangularView<Eigen::Upper>().setOnes();
  return h;
}

template <typename Scalar = double>
struct PerronData {
  Scalar p = Scalar(0);
  /// Negated spectral abscissa of Q_p.
  Scalar eta_p = Scalar(0);
  /// Positive right eigenvector of Q_p for -eta_p, ||xi||_1 = 1.
  Vector<Scalar> xi;
};

/// Power iteration on Q_p + cI, which is nonnegative with a positive diagonal
/// and therefore primitive. Stops when the Collatz-Wielandt bracket on the
/// Perron root is narrower than 1e-12 relative.
template <typename Scalar>
PerronData<Scalar> perron(const QMatrix<Scalar>& q, const Vector<Scalar>& beta, Scalar p) {
  using std::abs;
  const Index n = q.size();
  if (beta.size() != n) throw Error(ErrorCode::InvalidArgument, "beta length does not match Q");
  if (!(p >= Scalar(0))) throw Error(ErrorCode::InvalidArgument, "p must be nonnegative");

  Matrix<Scalar> shifted = q.matrix();
  shifted.diagonal() += p * beta;
  Scalar c(0);
  for (Index i = 0; i < n; ++i) c = std::max(c, q.exit_rate(i) + p * abs(beta(i)));
  c += Scalar(1);
  shifted.diagonal().array() += c;

  Vector<Scalar> x = Vector<Scalar>::Constant(n, Scalar(1) / Scalar(n));
  Vector<Scalar> mx(n);
  constexpr int max_iterations = 100000;
  for (int iter = 0; iter < max_iterations; ++iter) {
    mx.noalias() = shifted * x;
    const Scalar lower = (mx.array() / x.array()).minCoeff();
    const Scalar upper = (mx.array() / x.array()).maxCoeff();
    const Scalar rho = Scalar(0.5) * (lower + upper);
    x = mx / mx.sum();
    if (upper - lower <= Scalar(1e-12) * rho) {
      return {p, c - rho, x};
    }
  }
  throw Error(ErrorCode::NoConvergence, "power iteration did not converge");
}

/// sup{p in (0, p_max] : eta_p > 0} by bisection to 1e-8. eta_p is concave
/// in p with eta_0 = 0 and slope -sum(mu beta) at zero.
template <typename Scalar>
Scalar critical_p(const QMatrix<Scalar>& q, const Vector<Scalar>& beta, Scalar p_max = Scalar(1)) {
  const auto mu = invariant_measure(q).mu;
  const Scalar drift = mu.dot(beta);
  if (!(drift < -Scalar(1e-10) * std::max(Scalar(1e-300), beta.cwiseAbs().maxCoeff()))) {
    throw Error(ErrorCode::NotApplicable, "critical p needs sum(mu beta) < 0");
  }
  if (perron(q, beta, p_max).eta_p > Scalar(0)) return p_max;
  Scalar lo(0), hi = p_max;
  while (hi - lo > Scalar(1e-8)) {
    const Scalar mid = Scalar(0.5) * (lo + hi);
    (perron(q, beta, mid).eta_p > Scalar(0) ? lo : hi) = mid;
  }
  return Scalar(0.5) * (lo + hi);
}

}  // namespace regime
