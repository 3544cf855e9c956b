#pragma once

// Euler-Maruyama Monte Carlo for regime-switching diffusions. Evidence only:
// a finite horizon cannot decide recurrence.

#include "regime/core.hpp"
#include "regime/markov.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

namespace regime {

enum class Boundary { None, ReflectAtZero };

struct SdeModel {
  Index dimension = 1;
  Index regimes = 1;
  /// out = b(x, i); out is pre-sized to dimension.
  std::function<void(const Vector<>& x, Index i, Vector<>& out)> drift;
  /// out = sigma(x, i); out is pre-sized to dimension x dimension.
  std::function<void(const Vector<>& x, Index i, Matrix<>& out)> diffusion;
  std::variant<QMatrix<>, StateDependentRates<>> rates = QMatrix<>::validate(Matrix<>::Zero(1, 1));
  Boundary boundary = Boundary::None;
  /// Set when the regime chain is a truncation of an infinite one.
  std::optional<std::string> truncation_note;

  /// Throws InvalidArgument on inconsistent sizes or a missing function.
  void check() const;
};

struct SimulationConfig {
  Vector<> x0;
  Index i0 = 0;
  double r0 = 1.0;
  double horizon = 500.0;
  double dt = 1e-3;
  int trials = 500;
  std::uint64_t seed = 1;
  double escape_radius = 50.0;
  /// Paths are stopped once |x| exceeds this and counted as escaped.
  double escape_cap = 1e8;
  unsigned threads = 1;
};

struct SimulationReport {
  int trials = 0;
  int returned = 0;
  int escaped = 0;
  /// Paths stopped at escape_cap before the horizon.
  int capped = 0;
  /// Neither returned nor past escape_radius at the horizon.
  int censored = 0;
  double return_fraction = 0;
  double return_ci = 0;
  double escape_fraction = 0;
  double escape_ci = 0;
  /// Mean tau_{r0} among returners; NaN when none returned.
  double mean_hitting_time = 0;
  /// Mean of log(|X_end| / |x0|) / t_end over non-returners; NaN when none.
  double growth_exponent = 0;
  std::optional<std::string> truncation_note;
};

struct PathState {
  Vector<> x;
  Index regime = 0;
  double time = 0;
};

/// One Euler-Maruyama step followed by the regime switch.
class Stepper {
 public:
  explicit Stepper(const SdeModel& model);
  /// Advances (x, i) by dt in place. Throws StepTooLarge when dt q_i(x) > 0.1.
  void step(Vector<>& x, Index& regime, double dt, std::mt19937_64& rng);

 private:
  const SdeModel& model_;
  Vector<> drift_;
  Matrix<> sigma_;
  Vector<> noise_;
  std::normal_distribution<double> normal_;
  std::uniform_real_distribution<double> uniform_;
};

/// Per-path stream: mt19937_64 seeded from splitmix64(seed, path).
std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path);

/// Runs `trials` independent paths to min(tau_{r0}, T). The report is a
/// function of (model, config) only; the thread count does not change it.
SimulationReport run_ensemble(const SdeModel& model, const SimulationConfig& config);

/// Simulates a single path to time T without stopping.
PathState simulate_path(const SdeModel& model, const Vector<>& x0, Index i0, double horizon, double dt,
                        std::mt19937_64& rng);

/// Birth-death generator on {1..K}, upward rate out of K removed.
QMatrix<> truncate_chain(const TailHomogeneousChain<>& chain, std::size_t k);

/// Time fractions spent in each regime by the chain alone over [0, T].
/// Per-step switching with probability q_ij dt, or exact exponential clocks.
Vector<> regime_occupation(const QMatrix<>& q, Index i0, double horizon, double dt, std::uint64_t seed,
                           bool exact_clock = false);

/// 1.96 sqrt(p (1 - p) / n).
double proportion_ci(double p, int n);

}  // namespace regime
