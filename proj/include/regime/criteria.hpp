#pragma once

// Recurrence / transience / exponential-ergodicity criteria. Each classifier
// maps model data to a Classification whose certificate can be re-checked
// with certificate_holds().

#include "regime/core.hpp"
#include "regime/markov.hpp"
#include "regime/mmatrix.hpp"

#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace regime {

enum class Verdict { Recurrent, Transient, ExponentiallyErgodic, Inconclusive };
std::string_view to_string(Verdict v);

/// Limit of the test function (V or h) as |x| -> infinity.
enum class LimitTag { ToInfinity, ToZero };
std::string_view to_string(LimitTag t);

/// How a matrix criterion decides "nonsingular M-matrix".
///  Strict: Z-pattern, leading minors, semipositive vector and real spectrum
///    (is_nonsingular_mmatrix).
///  LeadingMinors: leading principal minors only. This is the determinantal
///    reading used for the worked birth-death examples; it is not sufficient
///    off the Z-matrix class and the certificate says so.
enum class MatrixTest { Strict, LeadingMinors };
std::string_view to_string(MatrixTest t);

struct LyapunovBehavior {
  LimitTag tag = LimitTag::ToInfinity;
  std::optional<double> r0;
  Vector<> beta;
};

struct TwoFunctionData {
  Vector<> beta;
  LimitTag h_limit = LimitTag::ToInfinity;
};

/// Q xi = -kappa 1 - beta with kappa = -sum(mu beta) and mu.xi = 0.
struct FredholmPair {
  double kappa = 0;
  Vector<> xi;
};

struct Certificate {
  std::optional<Matrix<>> generator;
  std::optional<Vector<>> mu;
  std::optional<Vector<>> beta;
  std::optional<Vector<>> beta_lower;
  std::optional<double> weighted_beta;
  std::optional<double> weighted_beta_lower;
  std::optional<Matrix<>> tested_matrix;
  std::optional<MatrixTest> matrix_test;
  std::optional<MMatrixCertificate<>> mmatrix;
  std::optional<PerronData<>> perron;
  std::optional<FredholmPair> fredholm;
  std::optional<Vector<>> eta;
  /// sum_i mu_i b_i (Q^{-1} b)(i) for the balanced one-dimensional case.
  std::optional<double> boundary_quantity;
  std::vector<std::string> notes;
};

struct Classification {
  Verdict verdict = Verdict::Inconclusive;
  std::string criterion_id;
  std::string reason;
  Certificate certificate;
};

/// Re-checks every populated certificate field against the stored inputs.
bool certificate_holds(const Classification& c);

/// Sign tolerance for sum(mu beta): 1e-10 * ||beta||_inf.
double sign_tolerance(const Vector<>& beta);

// --- single test function V ------------------------------------------------

/// Averaged criterion: sum(mu beta) < 0.
Classification classify_avg(const QMatrix<>& q, const LyapunovBehavior& lyap);

/// -(Q + diag beta) is a nonsingular M-matrix.
Classification classify_mmatrix(const QMatrix<>& q, const LyapunovBehavior& lyap,
                                MatrixTest test = MatrixTest::Strict);

/// State-dependent rates: -(Qtilde + diag beta) H_N is a nonsingular
/// M-matrix. The result depends on the regime ordering through H_N.
Classification classify_state_dependent(const QMatrix<>& qtilde, const LyapunovBehavior& lyap,
                                        MatrixTest test = MatrixTest::Strict);

/// Infinite birth-death regimes via the finite partition; conclusion is
/// Recurrent (not exponentially ergodic) for V -> infinity.
Classification classify_infinite(const TailHomogeneousChain<>& chain, const BetaSequence<>& beta,
                                 const Partition& partition, LimitTag tag, MatrixTest test = MatrixTest::Strict);

/// Regime-switching Ornstein-Uhlenbeck process dX = b_i X dt + sigma_i dB.
Classification classify_ou(const QMatrix<>& q, const Vector<>& b);

// --- two test functions h, g ----------------------------------------------

/// Throws NotSolvable unless sum(mu beta) < 0.
FredholmPair fredholm_solve(const QMatrix<>& q, const Vector<>& beta);

Classification classify_two_function(const QMatrix<>& q, const TwoFunctionData& data);

/// Searches for a positive nonincreasing eta with beta + Qtilde eta <= -1.
Classification classify_two_function_state_dependent(const QMatrix<>& qtilde, const Vector<>& beta,
                                                     LimitTag h_limit);

// --- radial drift |x|^delta bhat(x/|x|, i) --------------------------------

using DriftProfile = std::function<Vector<>(const Vector<>& direction, Index regime)>;
using DiffusionProfile = std::function<Matrix<>(const Vector<>& x, Index regime)>;

enum class LimitMode { Limsup, Liminf };

/// Unit vectors on the surface of the cube [-1,1]^d at the given resolution,
/// normalized; d = 1 gives {+1, -1}.
std::vector<Vector<>> sphere_grid(Index dimension, int resolution);

/// Per-regime limsup (or liminf) of the radial drift component. For
/// delta = -1 the diffusion correction enters and the sphere extremum is
/// tracked along `radii` until it stabilizes to 1e-6.
Vector<> radial_beta(const DriftProfile& drift, const DiffusionProfile& diffusion, double delta, LimitMode mode,
                     const std::vector<double>& radii, const std::vector<Vector<>>& grid, Index regimes);

Classification classify_radial(const QMatrix<>& q, const DriftProfile& drift, const DiffusionProfile& diffusion,
                               double delta, const std::vector<double>& radii, const std::vector<Vector<>>& grid);

/// Half-line dX = b_i X^delta dt + sigma_i dB with reflection at 0.
/// delta in [-1, 1): complete dichotomy (never Inconclusive).
/// delta = 1: Ornstein-Uhlenbeck semantics.
Classification classify_power_1d(const QMatrix<>& q, const Vector<>& b, const Vector<>& sigma, double delta);

// --- presets and thresholds -------------------------------------------------

/// beta for V = |x|^exponent under linear drift b_i x and constant diffusion
/// matrices a_i, valid for |x| > r0:
///   beta_i = g b_i + max(0, sup_phi (g/2)(tr a_i + (g-2) phi'a_i phi)) / r0^2.
Vector<> power_lyapunov_beta(const Vector<>& linear_drift, const std::vector<Matrix<>>& diffusion, double exponent,
                             double r0);

struct KappaThresholds {
  double kappa_rec = 0;
  double kappa_trans = 0;
};

/// Closed-form thresholds for dX = (kappa - 1/Lambda) X dt + sqrt(2) dB on
/// the birth-death chain with up rate b and down rate a (a >= b > 0),
/// two-class partition {1} | {2, 3, ...}.
KappaThresholds kappa_thresholds(double a, double b);

}  // namespace regime
