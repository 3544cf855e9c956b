#include "regime/criteria.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace regime {

std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::Recurrent: return "Recurrent";
    case Verdict::Transient: return "Transient";
    case Verdict::ExponentiallyErgodic: return "ExponentiallyErgodic";
    case Verdict::Inconclusive: return "Inconclusive";
  }
  return "?";
}

std::string_view to_string(LimitTag t) { return t == LimitTag::ToInfinity ? "ToInfinity" : "ToZero"; }

std::string_view to_string(MatrixTest t) { return t == MatrixTest::Strict ? "strict" : "leading-minors"; }

double sign_tolerance(const Vector<>& beta) {
  return beta.size() == 0 ? 0.0 : 1e-10 * beta.cwiseAbs().maxCoeff();
}

namespace {

void require_length(const Vector<>& v, Index n, const char* what) {
  if (v.size() != n) {
    std::ostringstream msg;
    msg << what << " has length " << v.size() << ", expected " << n;
    throw Error(ErrorCode::InvalidArgument, msg.str());
  }
  if (!v.allFinite()) throw Error(ErrorCode::InvalidArgument, std::string(what) + " must be finite");
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

// Verdict when the test function V (or h) satisfies the hypothesis; `ergodic`
// selects the strong conclusion available for V -> infinity.
Verdict conclude(LimitTag tag, bool ergodic) {
  if (tag == LimitTag::ToZero) return Verdict::Transient;
  return ergodic ? Verdict::ExponentiallyErgodic : Verdict::Recurrent;
}

bool minors_accept(const MMatrixCertificate<>& cert, MatrixTest test) {
  if (test == MatrixTest::Strict) return cert.verdict;
  return (cert.minors.array() > 0).all();
}

// Shared tail of the three M-matrix criteria.
void decide_matrix(Classification& out, const Matrix<>& tested, MatrixTest test, LimitTag tag, bool ergodic,
                   const char* label) {
  auto cert = is_nonsingular_mmatrix(tested);
  Certificate& c = out.certificate;
  c.tested_matrix = tested;
  c.matrix_test = test;
  c.mmatrix = cert;
  const bool accept = minors_accept(cert, test);
  if (test == MatrixTest::LeadingMinors && !cert.z_pattern_ok) {
    c.notes.push_back(
        "leading-minor reading only: the tested matrix has a positive off-diagonal entry, so positive minors do "
        "not make it a nonsingular M-matrix; strict mode returns Inconclusive here");
  }
  if (accept && cert.near_singular) {
    out.verdict = Verdict::Inconclusive;
    out.reason = std::string(label) + " is within round-off of singular";
    return;
  }
  if (!accept) {
    out.verdict = Verdict::Inconclusive;
    std::ostringstream msg;
    msg << label << " is not a nonsingular M-matrix under the " << to_string(test) << " test";
    if (!cert.z_pattern_ok) msg << " (positive off-diagonal entry)";
    out.reason = msg.str();
    return;
  }
  out.verdict = conclude(tag, ergodic);
  out.reason = std::string(label) + " is a nonsingular M-matrix (" + std::string(to_string(test)) + " test)";
}

Matrix<> shifted_generator(const QMatrix<>& q, const Vector<>& beta) {
  Matrix<> m = q.matrix();
  m.diagonal() += beta;
  return m;
}

}  // namespace

// --- single test function --------------------------------------------------

Classification classify_avg(const QMatrix<>& q, const LyapunovBehavior& lyap) {
  require_length(lyap.beta, q.size(), "beta");
  Classification out;
  out.criterion_id = "thm21";
  const Vector<> mu = invariant_measure(q).mu;
  const double weighted = mu.dot(lyap.beta);
  Certificate& c = out.certificate;
  c.generator = q.matrix();
  c.mu = mu;
  c.beta = lyap.beta;
  c.weighted_beta = weighted;
  if (!(weighted < -sign_tolerance(lyap.beta))) {
    out.reason = "sum(mu beta) = " + fmt(weighted) + " is not negative";
    return out;
  }
  // Witness: eta_p > 0 at half the critical exponent.
  const double p0 = critical_p(q, lyap.beta, 1.0);
  c.perron = perron(q, lyap.beta, 0.5 * p0);
  out.verdict = conclude(lyap.tag, true);
  out.reason = "sum(mu beta) = " + fmt(weighted) + " < 0";
  return out;
}

Classification classify_mmatrix(const QMatrix<>& q, const LyapunovBehavior& lyap, MatrixTest test) {
  require_length(lyap.beta, q.size(), "beta");
  Classification out;
  out.criterion_id = "thm22";
  out.certificate.generator = q.matrix();
  out.certificate.beta = lyap.beta;
  decide_matrix(out, -shifted_generator(q, lyap.beta), test, lyap.tag, true, "-(Q + diag beta)");
  return out;
}

Classification classify_state_dependent(const QMatrix<>& qtilde, const LyapunovBehavior& lyap, MatrixTest test) {
  require_length(lyap.beta, qtilde.size(), "beta");
  Classification out;
  out.criterion_id = "thm23";
  out.certificate.generator = qtilde.matrix();
  out.certificate.beta = lyap.beta;
  const Matrix<> tested = -shifted_generator(qtilde, lyap.beta) * triangular_ones<double>(qtilde.size());
  decide_matrix(out, tested, test, lyap.tag, true, "-(Qtilde + diag beta) H_N");
  if (out.verdict == Verdict::ExponentiallyErgodic) {
    out.certificate.notes.push_back(
        "the worked two-regime example states only recurrence here; exponential ergodicity is the stronger "
        "conclusion available for V -> infinity and implies it");
  }
  out.certificate.notes.push_back("depends on the regime ordering through H_N");
  return out;
}

Classification classify_infinite(const TailHomogeneousChain<>& chain, const BetaSequence<>& beta,
                                 const Partition& partition, LimitTag tag, MatrixTest test) {
  if (!chain.is_recurrent()) {
    throw Error(ErrorCode::ChainNotRecurrent, "regime chain must be recurrent (tail down rate >= up rate)");
  }
  const auto coarse = coarsen(chain, beta, partition);
  Classification out;
  out.criterion_id = "thm24";
  out.certificate.generator = coarse.q;
  out.certificate.beta = coarse.beta;
  const Index m = coarse.q.rows();
  Matrix<> shifted = coarse.q;
  shifted.diagonal() += coarse.beta;
  const Matrix<> tested = -shifted * triangular_ones<double>(m);
  decide_matrix(out, tested, test, tag, false, "-(diag beta^F + Q^F) H_m");
  return out;
}

Classification classify_ou(const QMatrix<>& q, const Vector<>& b) {
  require_length(b, q.size(), "b");
  Classification out;
  out.criterion_id = "prop22";
  const Vector<> mu = invariant_measure(q).mu;
  const double weighted = mu.dot(b);
  const double tol = sign_tolerance(b);
  Certificate& c = out.certificate;
  c.generator = q.matrix();
  c.mu = mu;
  c.beta = b;
  c.weighted_beta = weighted;
  if (weighted < -tol) {
    out.verdict = Verdict::ExponentiallyErgodic;
    out.reason = "sum(mu b) = " + fmt(weighted) + " < 0";
  } else if (weighted > tol) {
    out.verdict = Verdict::Transient;
    out.reason = "sum(mu b) = " + fmt(weighted) + " > 0";
  } else {
    out.reason = "sum(mu b) = 0 is not resolved for linear drift";
  }
  return out;
}

// --- two test functions -------------------------------------------------------

FredholmPair fredholm_solve(const QMatrix<>& q, const Vector<>& beta) {
  require_length(beta, q.size(), "beta");
  const Vector<> mu = invariant_measure(q).mu;
  const double kappa = -mu.dot(beta);
  if (!(kappa > sign_tolerance(beta))) {
    throw Error(ErrorCode::NotSolvable, "Q xi = -kappa - beta needs sum(mu beta) < 0, got " + fmt(-kappa));
  }
  const Vector<> rhs = -kappa * Vector<>::Ones(q.size()) - beta;
  return {kappa, centered_solve(q, mu, rhs)};
}

Classification classify_two_function(const QMatrix<>& q, const TwoFunctionData& data) {
  require_length(data.beta, q.size(), "beta");
  Classification out;
  out.criterion_id = "thm31";
  const Vector<> mu = invariant_measure(q).mu;
  const double weighted = mu.dot(data.beta);
  Certificate& c = out.certificate;
  c.generator = q.matrix();
  c.mu = mu;
  c.beta = data.beta;
  c.weighted_beta = weighted;
  if (!(weighted < -sign_tolerance(data.beta))) {
    out.reason = "sum(mu beta) = " + fmt(weighted) + " is not negative";
    if (std::abs(weighted) <= sign_tolerance(data.beta)) {
      out.reason += "; the balanced one-dimensional power-drift case is settled by cor31";
    }
    return out;
  }
  c.fredholm = fredholm_solve(q, data.beta);
  out.verdict = conclude(data.h_limit, false);
  out.reason = "sum(mu beta) = " + fmt(weighted) + " < 0";
  return out;
}

Classification classify_two_function_state_dependent(const QMatrix<>& qtilde, const Vector<>& beta,
                                                     LimitTag h_limit) {
  const Index n = qtilde.size();
  require_length(beta, n, "beta");
  Classification out;
  out.criterion_id = "thm32";
  out.certificate.generator = qtilde.matrix();
  out.certificate.beta = beta;
  out.certificate.notes.push_back("depends on the regime ordering through the monotonicity of eta");

  // eta = H zeta with zeta >= 0 is exactly the nonincreasing cone; eta_N >= 1
  // and -Qtilde eta >= 1 + beta give the unit-slack strict inequalities.
  const Matrix<> h = triangular_ones<double>(n);
  Matrix<> g(n + 1, n);
  g.topRows(n) = -qtilde.matrix() * h;
  g.row(n).setZero();
  g(n, n - 1) = 1.0;
  Vector<> rhs(n + 1);
  rhs.head(n) = Vector<>::Ones(n) + beta;
  rhs(n) = 1.0;
  const auto zeta = find_nonnegative_solution<double>(g, rhs);
  if (!zeta) {
    out.reason = "no positive nonincreasing eta with beta + Qtilde eta < 0";
    return out;
  }
  out.certificate.eta = h * *zeta;
  out.verdict = conclude(h_limit, false);
  out.reason = "positive nonincreasing eta with beta + Qtilde eta <= -1 found";
  return out;
}

// --- radial drift ---------------------------------------------------------------

std::vector<Vector<>> sphere_grid(Index dimension, int resolution) {
  if (dimension < 1) throw Error(ErrorCode::InvalidArgument, "dimension must be positive");
  if (resolution < 1) throw Error(ErrorCode::InvalidArgument, "resolution must be positive");
  std::vector<Vector<>> out;
  if (dimension == 1) {
    out.push_back(Vector<>::Constant(1, 1.0));
    out.push_back(Vector<>::Constant(1, -1.0));
    return out;
  }
  // Faces x_k = +-1 of the cube, remaining coordinates on a uniform grid.
  const Index free = dimension - 1;
  const int per_axis = resolution + 1;
  Index total = 1;
  for (Index k = 0; k < free; ++k) total *= per_axis;
  for (Index face = 0; face < dimension; ++face) {
    for (double side : {1.0, -1.0}) {
      for (Index code = 0; code < total; ++code) {
        Vector<> x(dimension);
        Index rest = code;
        for (Index k = 0; k < dimension; ++k) {
          if (k == face) {
            x(k) = side;
            continue;
          }
          x(k) = -1.0 + 2.0 * static_cast<double>(rest % per_axis) / resolution;
          rest /= per_axis;
        }
        out.push_back(x.normalized());
      }
    }
  }
  return out;
}

Vector<> radial_beta(const DriftProfile& drift, const DiffusionProfile& diffusion, double delta, LimitMode mode,
                     const std::vector<double>& radii, const std::vector<Vector<>>& grid, Index regimes) {
  if (!(delta >= -1.0 && delta < 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in [-1, 1)");
  if (grid.empty()) throw Error(ErrorCode::EmptyGrid, "sphere grid is empty");
  const bool upper = mode == LimitMode::Limsup;
  auto better = [upper](double a, double b) { return upper ? std::max(a, b) : std::min(a, b); };
  const double start = upper ? -std::numeric_limits<double>::infinity() : std::numeric_limits<double>::infinity();

  Vector<> out(regimes);
  const bool critical = delta == -1.0;
  if (critical && radii.size() < 2) {
    throw Error(ErrorCode::InvalidArgument, "delta = -1 needs at least two radii");
  }
  for (Index i = 0; i < regimes; ++i) {
    if (!critical) {
      double best = start;
      for (const auto& phi : grid) best = better(best, drift(phi, i).dot(phi));
      if (!std::isfinite(best)) throw Error(ErrorCode::InvalidArgument, "drift profile is not finite");
      out(i) = best;
      continue;
    }
    // delta = -1: the diffusion term is of the same order as the drift and
    // may depend on |x|; track the sphere extremum along the radii.
    std::vector<double> by_radius;
    for (double r : radii) {
      double best = start;
      for (const auto& phi : grid) {
        const Matrix<> a = diffusion(r * phi, i);
        const double value = 0.5 * a.trace() - 0.5 * phi.dot(a * phi) + drift(phi, i).dot(phi);
        best = better(best, value);
      }
      if (!std::isfinite(best)) throw Error(ErrorCode::InvalidArgument, "radial expression is not finite");
      by_radius.push_back(best);
    }
    const double last = by_radius.back();
    const double prev = by_radius[by_radius.size() - 2];
    if (std::abs(last - prev) > 1e-6 * std::max(1.0, std::abs(last))) {
      std::ostringstream msg;
      msg << "regime " << i + 1 << ": radial expression moves from " << prev << " to " << last
          << " over the last two radii";
      throw Error(ErrorCode::NonConvergent, msg.str());
    }
    out(i) = last;
  }
  return out;
}

Classification classify_radial(const QMatrix<>& q, const DriftProfile& drift, const DiffusionProfile& diffusion,
                               double delta, const std::vector<double>& radii, const std::vector<Vector<>>& grid) {
  const Index n = q.size();
  Classification out;
  out.criterion_id = "thm33";
  const Vector<> upper = radial_beta(drift, diffusion, delta, LimitMode::Limsup, radii, grid, n);
  const Vector<> lower = radial_beta(drift, diffusion, delta, LimitMode::Liminf, radii, grid, n);
  const Vector<> mu = invariant_measure(q).mu;
  Certificate& c = out.certificate;
  c.generator = q.matrix();
  c.mu = mu;
  c.beta = upper;
  c.beta_lower = lower;
  c.weighted_beta = mu.dot(upper);
  c.weighted_beta_lower = mu.dot(lower);
  if (*c.weighted_beta < -sign_tolerance(upper)) {
    out.verdict = Verdict::Recurrent;
    out.reason = "sum(mu beta) = " + fmt(*c.weighted_beta) + " < 0 (limsup)";
  } else if (*c.weighted_beta_lower > sign_tolerance(lower)) {
    out.verdict = Verdict::Transient;
    out.reason = "sum(mu beta~) = " + fmt(*c.weighted_beta_lower) + " > 0 (liminf)";
  } else {
    out.reason = "sum(mu beta~) = " + fmt(*c.weighted_beta_lower) + " <= 0 <= sum(mu beta) = " +
                 fmt(*c.weighted_beta);
  }
  return out;
}

Classification classify_power_1d(const QMatrix<>& q, const Vector<>& b, const Vector<>& sigma, double delta) {
  const Index n = q.size();
  require_length(b, n, "b");
  require_length(sigma, n, "sigma");
  if ((sigma.array() == 0.0).any()) throw Error(ErrorCode::InvalidArgument, "sigma must be nonzero");
  if (!(delta >= -1.0 && delta <= 1.0)) throw Error(ErrorCode::InvalidArgument, "delta must lie in [-1, 1]");
  if (delta == 1.0) {
    auto out = classify_ou(q, b);
    out.certificate.notes.push_back("delta = 1 handled as linear drift");
    return out;
  }
  Classification out;
  out.criterion_id = "cor31";
  const Vector<> mu = invariant_measure(q).mu;
  const double weighted = mu.dot(b);
  const double tol = sign_tolerance(b);
  Certificate& c = out.certificate;
  c.generator = q.matrix();
  c.mu = mu;
  c.beta = b;
  c.weighted_beta = weighted;
  if (weighted > tol) {
    out.verdict = Verdict::Transient;
    out.reason = "sum(mu b) = " + fmt(weighted) + " > 0";
    return out;
  }
  out.verdict = Verdict::Recurrent;
  out.reason = "sum(mu b) = " + fmt(weighted) + " <= 0";
  if (weighted >= -tol) {
    // Balanced case: w with Qw = b, sum(mu b w) = <Qw, w>_mu < 0 unless b = 0.
    const Vector<> w = centered_solve(q, mu, b);
    c.boundary_quantity = (mu.array() * b.array() * w.array()).sum();
    out.reason += " (balanced; boundary quantity " + fmt(*c.boundary_quantity) + ")";
  }
  return out;
}

// --- presets -----------------------------------------------------------------------

Vector<> power_lyapunov_beta(const Vector<>& linear_drift, const std::vector<Matrix<>>& diffusion, double exponent,
                             double r0) {
  const Index n = linear_drift.size();
  if (static_cast<Index>(diffusion.size()) != n) {
    throw Error(ErrorCode::InvalidArgument, "one diffusion matrix per regime expected");
  }
  if (!(r0 > 0)) throw Error(ErrorCode::InvalidArgument, "r0 must be positive");
  if (exponent == 0 || !std::isfinite(exponent)) throw Error(ErrorCode::InvalidArgument, "exponent must be nonzero");
  const double g = exponent;
  const double c = g * (g - 2.0) / 2.0;
  Vector<> beta(n);
  for (Index i = 0; i < n; ++i) {
    const Matrix<>& a = diffusion[static_cast<std::size_t>(i)];
    if (a.rows() != a.cols() || a.rows() < 1) throw Error(ErrorCode::InvalidArgument, "diffusion must be square");
    Eigen::SelfAdjointEigenSolver<Matrix<>> eig(0.5 * (a + a.transpose()), Eigen::EigenvaluesOnly);
    const double extreme = c >= 0 ? eig.eigenvalues().maxCoeff() : eig.eigenvalues().minCoeff();
    const double term = 0.5 * g * a.trace() + c * extreme;
    beta(i) = g * linear_drift(i) + std::max(term, 0.0) / (r0 * r0);
  }
  return beta;
}

KappaThresholds kappa_thresholds(double a, double b) {
  if (!(b > 0) || !(a >= b)) throw Error(ErrorCode::InvalidArgument, "need a >= b > 0");
  const double s = a + b + 1.0;
  KappaThresholds out;
  out.kappa_rec = (s - std::sqrt(s * s - 4.0 * a)) / 2.0;
  if (2.0 * a * b <= 1.0 - b) {
    out.kappa_trans = 1.0 - b;
  } else {
    const double t = a + b - 1.0;
    out.kappa_trans = (1.0 - b - a + std::sqrt(t * t + 4.0 * a + 2.0 * b - 2.0)) / 2.0;
  }
  return out;
}

// --- certificate re-validation -------------------------------------------------------

namespace {

bool close(double a, double b, double scale) { return std::abs(a - b) <= 1e-9 * std::max(1.0, scale); }

bool mu_ok(const Matrix<>& q, const Vector<>& mu) {
  if (mu.size() != q.rows() || (mu.array() <= 0).any()) return false;
  const double scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  return std::abs(mu.sum() - 1.0) <= 1e-10 && (mu.transpose() * q).cwiseAbs().maxCoeff() <= 1e-9 * scale;
}

}  // namespace

bool certificate_holds(const Classification& cls) {
  const Certificate& c = cls.certificate;
  const bool conclusive = cls.verdict != Verdict::Inconclusive;
  if (conclusive && cls.criterion_id.empty()) return false;
  if (!conclusive) return !cls.reason.empty();

  if (c.mu) {
    if (!c.generator || !mu_ok(*c.generator, *c.mu)) return false;
  }
  if (c.weighted_beta) {
    if (!c.mu || !c.beta) return false;
    const double scale = c.beta->cwiseAbs().maxCoeff();
    if (!close(c.mu->dot(*c.beta), *c.weighted_beta, scale)) return false;
  }
  if (c.weighted_beta_lower) {
    if (!c.mu || !c.beta_lower) return false;
    if (!close(c.mu->dot(*c.beta_lower), *c.weighted_beta_lower, c.beta_lower->cwiseAbs().maxCoeff())) return false;
  }
  bool evidence = false;

  const std::string& id = cls.criterion_id;
  if (id == "thm21" || id == "thm31") {
    if (!c.weighted_beta || !(*c.weighted_beta < 0)) return false;
    evidence = true;
  }
  if (id == "prop22" || id == "cor31") {
    if (!c.weighted_beta) return false;
    const bool positive = *c.weighted_beta > sign_tolerance(*c.beta);
    if ((cls.verdict == Verdict::Transient) != positive) return false;
    evidence = true;
  }
  if (id == "thm33") {
    if (!c.weighted_beta || !c.weighted_beta_lower) return false;
    if (cls.verdict == Verdict::Transient ? !(*c.weighted_beta_lower > 0) : !(*c.weighted_beta < 0)) return false;
    evidence = true;
  }
  if (c.boundary_quantity) {
    if (!(*c.boundary_quantity < 0)) {
      // b = 0 is the only balanced drift with a zero quantity.
      if (!(c.beta && c.beta->cwiseAbs().maxCoeff() == 0)) return false;
    }
  }
  if (c.perron) {
    if (!c.generator || !c.beta) return false;
    const PerronData<>& p = *c.perron;
    Matrix<> qp = *c.generator;
    qp.diagonal() += p.p * *c.beta;
    const Vector<> residual = qp * p.xi + p.eta_p * p.xi;
    const double scale = std::max(1.0, qp.cwiseAbs().maxCoeff());
    if (!(p.eta_p > 0) || (p.xi.array() <= 0).any() || residual.cwiseAbs().maxCoeff() > 1e-8 * scale) return false;
  }
  if (c.fredholm) {
    if (!c.generator || !c.beta) return false;
    const FredholmPair& f = *c.fredholm;
    const Vector<> residual = *c.generator * f.xi + f.kappa * Vector<>::Ones(f.xi.size()) + *c.beta;
    const double bound = 1e-9 * (c.generator->cwiseAbs().rowwise().sum().maxCoeff() + c.beta->cwiseAbs().maxCoeff());
    if (!(f.kappa > 0) || residual.cwiseAbs().maxCoeff() > std::max(bound, 1e-12)) return false;
    evidence = true;
  }
  if (c.tested_matrix) {
    if (!c.matrix_test) return false;
    const Matrix<>& a = *c.tested_matrix;
    const bool minors_ok = leading_minors_positive(a);
    if (!minors_ok) return false;
    if (*c.matrix_test == MatrixTest::Strict) {
      if (!z_pattern(a)) return false;
      const auto x = semipositive_certificate(a);
      if (!x) return false;
    }
    evidence = true;
  }
  if (c.eta) {
    if (!c.generator || !c.beta) return false;
    const Vector<>& eta = *c.eta;
    for (Index i = 0; i + 1 < eta.size(); ++i) {
      if (eta(i) < eta(i + 1) - 1e-9 * std::max(1.0, std::abs(eta(i)))) return false;
    }
    if (!(eta.minCoeff() > 0)) return false;
    const Vector<> lhs = *c.beta + *c.generator * eta;
    if (!(lhs.maxCoeff() < 0)) return false;
    evidence = true;
  }
  return evidence;
}

}  // namespace regime
