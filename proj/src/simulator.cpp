#include "regime/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <limits>
#include <sstream>
#include <thread>

namespace regime {

void SdeModel::check() const {
  if (dimension < 1 || regimes < 1) throw Error(ErrorCode::InvalidArgument, "dimension and regimes must be >= 1");
  if (!drift || !diffusion) throw Error(ErrorCode::InvalidArgument, "drift and diffusion must be set");
  if (boundary == Boundary::ReflectAtZero && dimension != 1) {
    throw Error(ErrorCode::InvalidArgument, "reflection at zero needs dimension 1");
  }
  const Index n = std::visit(
      [](const auto& r) {
        using T = std::decay_t<decltype(r)>;
        if constexpr (std::is_same_v<T, QMatrix<>>) {
          return r.size();
        } else {
          return r.regimes;
        }
      },
      rates);
  if (n != regimes) throw Error(ErrorCode::InvalidArgument, "rate specification does not match regime count");
  if (const auto* sd = std::get_if<StateDependentRates<>>(&rates)) {
    if (!sd->rate) throw Error(ErrorCode::InvalidArgument, "state-dependent rate function missing");
  }
}

Stepper::Stepper(const SdeModel& model)
    : model_(model),
      drift_(model.dimension),
      sigma_(model.dimension, model.dimension),
      noise_(model.dimension),
      uniform_(0.0, 1.0) {}

void Stepper::step(Vector<>& x, Index& regime, double dt, std::mt19937_64& rng) {
  // Switch probabilities use the pre-step state.
  double exit = 0;
  const auto* constant = std::get_if<QMatrix<>>(&model_.rates);
  const auto* dependent = std::get_if<StateDependentRates<>>(&model_.rates);
  auto rate = [&](Index j) { return constant ? (*constant)(regime, j) : dependent->rate(x, regime, j); };
  if (constant) {
    exit = constant->exit_rate(regime);
  } else {
    for (Index j = 0; j < model_.regimes; ++j) {
      if (j != regime) exit += rate(j);
    }
  }
  if (!(dt * exit <= 0.1)) {
    std::ostringstream msg;
    msg << "dt * q_i(x) = " << dt * exit << " exceeds 0.1 in regime " << regime + 1;
    throw Error(ErrorCode::StepTooLarge, msg.str());
  }
  Index next = regime;
  if (exit > 0) {
    const double u = uniform_(rng);
    double cumulative = 0;
    for (Index j = 0; j < model_.regimes; ++j) {
      if (j == regime) continue;
      cumulative += rate(j) * dt;
      if (u < cumulative) {
        next = j;
        break;
      }
    }
  }

  model_.drift(x, regime, drift_);
  model_.diffusion(x, regime, sigma_);
  for (Index k = 0; k < noise_.size(); ++k) noise_(k) = normal_(rng);
  x.noalias() += dt * drift_;
  x.noalias() += std::sqrt(dt) * (sigma_ * noise_);
  if (model_.boundary == Boundary::ReflectAtZero) x(0) = std::abs(x(0));
  regime = next;
}

namespace {

std::uint64_t splitmix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct PathOutcome {
  bool returned = false;
  bool capped = false;
  double time = 0;
  double final_norm = 0;
};

PathOutcome run_path(const SdeModel& model, const SimulationConfig& cfg, std::uint64_t index) {
  auto rng = path_rng(cfg.seed, index);
  Stepper stepper(model);
  Vector<> x = cfg.x0;
  Index regime = cfg.i0;
  const auto steps = static_cast<long long>(std::ceil(cfg.horizon / cfg.dt - 1e-9));
  PathOutcome out;
  for (long long s = 1; s <= steps; ++s) {
    stepper.step(x, regime, cfg.dt, rng);
    const double norm = x.norm();
    const double t = static_cast<double>(s) * cfg.dt;
    if (norm <= cfg.r0) {
      out.returned = true;
      out.time = t;
      out.final_norm = norm;
      return out;
    }
    if (!(norm <= cfg.escape_cap)) {
      out.capped = true;
      out.time = t;
      out.final_norm = std::isfinite(norm) ? norm : cfg.escape_cap;
      return out;
    }
  }
  out.time = static_cast<double>(steps) * cfg.dt;
  out.final_norm = x.norm();
  return out;
}

}  // namespace

std::mt19937_64 path_rng(std::uint64_t seed, std::uint64_t path) {
  const std::uint64_t a = splitmix64(seed);
  const std::uint64_t b = splitmix64(a ^ splitmix64(path + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32)};
  return std::mt19937_64(seq);
}

double proportion_ci(double p, int n) { return n > 0 ? 1.96 * std::sqrt(p * (1 - p) / n) : 0.0; }

SimulationReport run_ensemble(const SdeModel& model, const SimulationConfig& cfg) {
  model.check();
  if (cfg.x0.size() != model.dimension) throw Error(ErrorCode::InvalidArgument, "x0 has the wrong dimension");
  if (cfg.i0 < 0 || cfg.i0 >= model.regimes) throw Error(ErrorCode::InvalidArgument, "initial regime out of range");
  if (!(cfg.r0 > 0) || !(cfg.x0.norm() > cfg.r0)) throw Error(ErrorCode::InvalidArgument, "need |x0| > r0 > 0");
  if (!(cfg.dt > 0) || !(cfg.horizon > 0)) throw Error(ErrorCode::InvalidArgument, "dt and T must be positive");
  if (cfg.trials < 100) throw Error(ErrorCode::InvalidArgument, "at least 100 trials are needed");
  if (!(cfg.escape_radius > cfg.r0) || !(cfg.escape_cap >= cfg.escape_radius)) {
    throw Error(ErrorCode::InvalidArgument, "need r0 < escape_radius <= escape_cap");
  }
  if (model.boundary == Boundary::ReflectAtZero && cfg.x0(0) < 0) {
    throw Error(ErrorCode::InvalidArgument, "half-line model needs x0 >= 0");
  }

  const auto n = static_cast<std::size_t>(cfg.trials);
  std::vector<PathOutcome> outcomes(n);
  std::vector<std::exception_ptr> errors(n);
  const unsigned workers = std::max(1u, std::min<unsigned>(cfg.threads, static_cast<unsigned>(n)));
  auto work = [&](unsigned w) {
    for (std::size_t p = w; p < n; p += workers) {
      try {
        outcomes[p] = run_path(model, cfg, p);
      } catch (...) {
        errors[p] = std::current_exception();
        return;
      }
    }
  };
  if (workers == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < workers; ++w) pool.emplace_back(work, w);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }

  SimulationReport r;
  r.trials = cfg.trials;
  r.truncation_note = model.truncation_note;
  double hit_sum = 0, growth_sum = 0;
  int growth_count = 0;
  const double start = cfg.x0.norm();
  for (const auto& o : outcomes) {
    if (o.returned) {
      ++r.returned;
      hit_sum += o.time;
      continue;
    }
    if (o.capped) ++r.capped;
    if (o.capped || o.final_norm > cfg.escape_radius) {
      ++r.escaped;
    } else {
      ++r.censored;
    }
    if (o.final_norm > 0) {
      growth_sum += std::log(o.final_norm / start) / o.time;
      ++growth_count;
    }
  }
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.return_fraction = static_cast<double>(r.returned) / r.trials;
  r.escape_fraction = static_cast<double>(r.escaped) / r.trials;
  r.return_ci = proportion_ci(r.return_fraction, r.trials);
  r.escape_ci = proportion_ci(r.escape_fraction, r.trials);
  r.mean_hitting_time = r.returned > 0 ? hit_sum / r.returned : nan;
  r.growth_exponent = growth_count > 0 ? growth_sum / growth_count : nan;
  return r;
}

PathState simulate_path(const SdeModel& model, const Vector<>& x0, Index i0, double horizon, double dt,
                        std::mt19937_64& rng) {
  model.check();
  if (x0.size() != model.dimension) throw Error(ErrorCode::InvalidArgument, "x0 has the wrong dimension");
  Stepper stepper(model);
  PathState s{x0, i0, 0.0};
  const auto steps = static_cast<long long>(std::ceil(horizon / dt - 1e-9));
  for (long long k = 1; k <= steps; ++k) stepper.step(s.x, s.regime, dt, rng);
  s.time = static_cast<double>(steps) * dt;
  return s;
}

QMatrix<> truncate_chain(const TailHomogeneousChain<>& chain, std::size_t k) {
  if (k < 2) throw Error(ErrorCode::InvalidArgument, "truncation needs K >= 2");
  const auto n = static_cast<Index>(k);
  Matrix<> q = Matrix<>::Zero(n, n);
  for (std::size_t s = 1; s <= k; ++s) {
    const auto i = static_cast<Index>(s - 1);
    if (s < k) q(i, i + 1) = chain.up(s);
    if (s > 1) q(i, i - 1) = chain.down(s);
    q(i, i) = -q.row(i).sum();
  }
  return QMatrix<>::validate(q);
}

Vector<> regime_occupation(const QMatrix<>& q, Index i0, double horizon, double dt, std::uint64_t seed,
                           bool exact_clock) {
  const Index n = q.size();
  if (i0 < 0 || i0 >= n) throw Error(ErrorCode::InvalidArgument, "initial regime out of range");
  if (!(horizon > 0) || !(dt > 0)) throw Error(ErrorCode::InvalidArgument, "dt and T must be positive");
  auto rng = path_rng(seed, 0);
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  Vector<> time = Vector<>::Zero(n);
  Index i = i0;
  if (exact_clock) {
    double t = 0;
    while (t < horizon) {
      const double exit = q.exit_rate(i);
      const double hold = exit > 0 ? std::exponential_distribution<double>(exit)(rng) : horizon;
      time(i) += std::min(hold, horizon - t);
      t += hold;
      if (exit == 0) break;
      double u = uniform(rng) * exit;
      for (Index j = 0; j < n; ++j) {
        if (j == i) continue;
        u -= q(i, j);
        if (u < 0) {
          i = j;
          break;
        }
      }
    }
    return time / horizon;
  }
  if (!(dt * q.matrix().diagonal().cwiseAbs().maxCoeff() <= 0.1)) {
    throw Error(ErrorCode::StepTooLarge, "dt * max q_i exceeds 0.1");
  }
  const auto steps = static_cast<long long>(std::ceil(horizon / dt - 1e-9));
  for (long long s = 0; s < steps; ++s) {
    time(i) += dt;
    const double u = uniform(rng);
    double cumulative = 0;
    for (Index j = 0; j < n; ++j) {
      if (j == i) continue;
      cumulative += q(i, j) * dt;
      if (u < cumulative) {
        i = j;
        break;
      }
    }
  }
  return time / time.sum();
}

}  // namespace regime
