#pragma once

// Generators of the switching chain: validation, invariant measures, the
// sup/inf bounding chain for state-dependent rates, and the finite-partition
// coarsening of tail-homogeneous birth-death chains.

#include "regime/core.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <sstream>
#include <utility>
#include <vector>

namespace regime {

namespace detail {

template <typename Scalar>
bool reaches_all(const Matrix<Scalar>& q, Scalar zero, bool transpose) {
  const Index n = q.rows();
  std::vector<char> seen(static_cast<std::size_t>(n), 0);
  std::queue<Index> frontier;
  frontier.push(0);
  seen[0] = 1;
  Index count = 1;
  while (!frontier.empty()) {
    const Index i = frontier.front();
    frontier.pop();
    for (Index j = 0; j < n; ++j) {
      const Scalar w = transpose ? q(j, i) : q(i, j);
      if (j != i && w > zero && !seen[static_cast<std::size_t>(j)]) {
        seen[static_cast<std::size_t>(j)] = 1;
        ++count;
        frontier.push(j);
      }
    }
  }
  return count == n;
}

}  // namespace detail

/// A validated finite generator: nonnegative off-diagonal rates, conservative
/// rows, strongly connected positivity graph.
template <typename Scalar = double>
class QMatrix {
 public:
  /// Throws NegativeOffDiagonal, RowSumNonzero or Reducible.
  static QMatrix validate(const Matrix<Scalar>& raw) {
    using std::abs;
    const Index n = raw.rows();
    if (n < 1 || raw.cols() != n) {
      throw Error(ErrorCode::InvalidArgument, "generator must be square with n >= 1");
    }
    if (!raw.allFinite()) {
      throw Error(ErrorCode::InvalidArgument, "generator has non-finite entries");
    }
    const Scalar scale = raw.cwiseAbs().maxCoeff();
    const Scalar zero = Scalar(1e-14) * scale;
    for (Index i = 0; i < n; ++i) {
      Scalar row_scale(0);
      for (Index j = 0; j < n; ++j) {
        if (j != i && raw(i, j) < -zero) {
          std::ostringstream msg;
          msg << "q(" << i + 1 << "," << j + 1 << ") = " << raw(i, j);
          throw Error(ErrorCode::NegativeOffDiagonal, msg.str());
        }
        row_scale = std::max(row_scale, Scalar(abs(raw(i, j))));
      }
      const Scalar defect = raw.row(i).sum();
      if (abs(defect) > Scalar(1e-12) * std::max(row_scale, std::numeric_limits<Scalar>::min())) {
        std::ostringstream msg;
        msg << "row " << i + 1 << " sums to " << defect;
        throw Error(ErrorCode::RowSumNonzero, msg.str());
      }
    }
    if (n > 1 && !(detail::reaches_all(raw, zero, false) && detail::reaches_all(raw, zero, true))) {
      throw Error(ErrorCode::Reducible, "positivity graph is not strongly connected");
    }
    return QMatrix(raw);
  }

  [[nodiscard]] const Matrix<Scalar>& matrix() const noexcept { return rates_; }
  [[nodiscard]] Index size() const noexcept { return rates_.rows(); }
  [[nodiscard]] Scalar operator()(Index i, Index j) const { return rates_(i, j); }
  [[nodiscard]] Scalar exit_rate(Index i) const { return -rates_(i, i); }

  /// Relabels regimes: new regime k is old regime perm[k].
  [[nodiscard]] QMatrix permuted(const std::vector<Index>& perm) const {
    Matrix<Scalar> out(size(), size());
    for (Index a = 0; a < size(); ++a) {
      for (Index b = 0; b < size(); ++b) {
        out(a, b) = rates_(perm[static_cast<std::size_t>(a)], perm[static_cast<std::size_t>(b)]);
      }
    }
    return QMatrix(std::move(out));
  }

 private:
  explicit QMatrix(Matrix<Scalar> rates) : rates_(std::move(rates)) {}
  Matrix<Scalar> rates_;
};

template <typename Scalar>
QMatrix<Scalar> validate_qmatrix(const Matrix<Scalar>& raw) {
  return QMatrix<Scalar>::validate(raw);
}

template <typename Scalar = double>
struct InvariantMeasure {
  Vector<Scalar> mu;
};

/// Solves mu Q = 0, sum(mu) = 1 with the last balance equation replaced by
/// the normalization.
template <typename Scalar>
InvariantMeasure<Scalar> invariant_measure(const QMatrix<Scalar>& q) {
  const Index n = q.size();
  if (n == 1) {
    return {Vector<Scalar>::Ones(1)};
  }
  Matrix<Scalar> system = q.matrix().transpose();
  system.row(n - 1).setOnes();
  Vector<Scalar> rhs = Vector<Scalar>::Zero(n);
  rhs(n - 1) = Scalar(1);
  Eigen::FullPivLU<Matrix<Scalar>> lu(system);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularSolve, "balance system is singular");
  }
  Vector<Scalar> mu = lu.solve(rhs);
  mu /= mu.sum();
  if (!mu.allFinite() || mu.minCoeff() <= Scalar(0)) {
    throw Error(ErrorCode::SingularSolve, "balance solve produced a non-positive measure");
  }
  return {std::move(mu)};
}

/// Returns w with mu.w = 0 and Q w = v - (mu.v) 1. When mu.v = 0 this is the
/// Fredholm solution of Q w = v; the correction term is the projection onto
/// the solvable subspace.
template <typename Scalar>
Vector<Scalar> centered_solve(const QMatrix<Scalar>& q, const Vector<Scalar>& mu, const Vector<Scalar>& v) {
  const Index n = q.size();
  if (mu.size() != n || v.size() != n) {
    throw Error(ErrorCode::InvalidArgument, "dimension mismatch in centered_solve");
  }
  // Q - 1 mu^T is invertible for irreducible Q.
  Matrix<Scalar> system = q.matrix() - Vector<Scalar>::Ones(n) * mu.transpose();
  Eigen::FullPivLU<Matrix<Scalar>> lu(system);
  if (!lu.isInvertible()) {
    throw Error(ErrorCode::SingularSolve, "Q - 1 mu^T is singular");
  }
  Vector<Scalar> w = lu.solve(v);
  w.array() -= mu.dot(w);
  return w;
}

// ---------------------------------------------------------------------------
// State-dependent rates and the bounding chain

template <typename Scalar = double>
struct RateBounds {
  Scalar sup;
  Scalar inf;
};

template <typename Scalar = double>
struct StateDependentRates {
  Index regimes = 0;
  Index dimension = 1;
  /// Off-diagonal rate q_ij(x), regimes 0-based.
  std::function<Scalar(const Vector<Scalar>& x, Index i, Index j)> rate;
  /// Closed-form bounds keyed by (i, j); preferred over scanning.
  std::map<std::pair<Index, Index>, RateBounds<Scalar>> hints;

  [[nodiscard]] Matrix<Scalar> at(const Vector<Scalar>& x) const {
    Matrix<Scalar> q = Matrix<Scalar>::Zero(regimes, regimes);
    for (Index i = 0; i < regimes; ++i) {
      for (Index j = 0; j < regimes; ++j) {
        if (i != j) q(i, j) = rate(x, i, j);
      }
      q(i, i) = -q.row(i).sum();
    }
    return q;
  }
};

/// Rays origin + r * direction with r on {0} and a geometric ladder
/// [r_min, r_max]. The refined level doubles the density and pushes the outer
/// radius out by a factor of ten.
template <typename Scalar = double>
struct ScanDomain {
  Vector<Scalar> origin;
  std::vector<Vector<Scalar>> directions;
  Scalar r_min = Scalar(1e-3);
  Scalar r_max = Scalar(1e6);
  int points = 200;
  Scalar cap = Scalar(1e12);

  static ScanDomain half_line(Scalar r_max = Scalar(1e6), int points = 200) {
    ScanDomain d;
    d.origin = Vector<Scalar>::Zero(1);
    d.directions = {Vector<Scalar>::Ones(1)};
    d.r_max = r_max;
    d.points = points;
    return d;
  }

  [[nodiscard]] std::vector<Vector<Scalar>> samples(int level) const {
    using std::pow;
    const int count = level == 0 ? points : 2 * points - 1;
    std::vector<Vector<Scalar>> out;
    out.reserve(directions.size() * static_cast<std::size_t>(count + 1));
    const Scalar outer = level == 0 ? r_max : Scalar(10) * r_max;
    const Scalar ratio = outer / r_min;
    for (const auto& dir : directions) {
      out.push_back(origin);
      for (int k = 0; k < count; ++k) {
        const Scalar r = count == 1 ? outer : r_min * pow(ratio, Scalar(k) / Scalar(count - 1));
        out.push_back(origin + r * dir);
      }
    }
    return out;
  }
};

/// Bounding chain: sup of q_ik(x) below the diagonal, inf above it,
/// conservative diagonal. The result is validated; a degenerate bound
/// (for example an infimum of zero that disconnects the chain) throws.
template <typename Scalar>
QMatrix<Scalar> bound_rates(const StateDependentRates<Scalar>& rates, const std::optional<ScanDomain<Scalar>>& domain) {
  using std::abs;
  const Index n = rates.regimes;
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "no regimes");

  bool needs_scan = false;
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i != j && !rates.hints.contains({i, j})) needs_scan = true;
    }
  }

  Matrix<Scalar> sup = Matrix<Scalar>::Zero(n, n);
  Matrix<Scalar> inf = Matrix<Scalar>::Zero(n, n);
  if (needs_scan) {
    if (!rates.rate) throw Error(ErrorCode::InvalidArgument, "no rate function and incomplete hints");
    if (!domain || domain->directions.empty() || domain->points < 1 || !(domain->r_max > domain->r_min) ||
        !(domain->r_min > Scalar(0))) {
      throw Error(ErrorCode::EmptyGrid, "scan domain is empty");
    }
    Matrix<Scalar> coarse_sup, coarse_inf;
    for (int level = 0; level < 2; ++level) {
      sup.setConstant(-std::numeric_limits<Scalar>::infinity());
      inf.setConstant(std::numeric_limits<Scalar>::infinity());
      for (const auto& x : domain->samples(level)) {
        for (Index i = 0; i < n; ++i) {
          for (Index j = 0; j < n; ++j) {
            if (i == j || rates.hints.contains({i, j})) continue;
            const Scalar v = rates.rate(x, i, j);
            if (!std::isfinite(static_cast<double>(v)) || abs(v) > domain->cap) {
              std::ostringstream msg;
              msg << "q(" << i + 1 << "," << j + 1 << ") exceeds cap " << domain->cap;
              throw Error(ErrorCode::UnboundedRate, msg.str());
            }
            if (v < Scalar(0)) throw Error(ErrorCode::InvalidArgument, "negative rate in scan");
            sup(i, j) = std::max(sup(i, j), v);
            inf(i, j) = std::min(inf(i, j), v);
          }
        }
      }
      if (level == 0) {
        coarse_sup = sup;
        coarse_inf = inf;
      }
    }
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < n; ++j) {
        if (i == j || rates.hints.contains({i, j})) continue;
        const Scalar fine = j < i ? sup(i, j) : inf(i, j);
        const Scalar coarse = j < i ? coarse_sup(i, j) : coarse_inf(i, j);
        if (abs(fine - coarse) > Scalar(1e-6) * std::max(Scalar(1), abs(fine))) {
          std::ostringstream msg;
          msg << "bound for q(" << i + 1 << "," << j + 1 << ") moved from " << coarse << " to " << fine
              << " under refinement";
          throw Error(ErrorCode::ScanUnstable, msg.str());
        }
      }
    }
  }

  Matrix<Scalar> tilde = Matrix<Scalar>::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      if (auto it = rates.hints.find({i, j}); it != rates.hints.end()) {
        tilde(i, j) = j < i ? it->second.sup : it->second.inf;
      } else {
        tilde(i, j) = j < i ? sup(i, j) : inf(i, j);
      }
    }
    tilde(i, i) = -tilde.row(i).sum();
  }
  return QMatrix<Scalar>::validate(tilde);
}

// ---------------------------------------------------------------------------
// Infinite regime spaces. States are 1-based: S = {1, 2, ...}.

/// Birth-death chain whose rates are constant beyond a finite head.
/// up(k) is the rate k -> k+1; down(k) the rate k -> k-1 (zero at k = 1).
template <typename Scalar = double>
class TailHomogeneousChain {
 public:
  /// up_head[k] is the up rate of state k+1; down_head[k] the down rate of
  /// state k+2.
  TailHomogeneousChain(std::vector<Scalar> up_head, std::vector<Scalar> down_head, Scalar up_tail, Scalar down_tail)
      : up_head_(std::move(up_head)), down_head_(std::move(down_head)), up_tail_(up_tail), down_tail_(down_tail) {
    auto positive = [](Scalar v) { return std::isfinite(static_cast<double>(v)) && v > Scalar(0); };
    if (!positive(up_tail_) || !positive(down_tail_) || !std::all_of(up_head_.begin(), up_head_.end(), positive) ||
        !std::all_of(down_head_.begin(), down_head_.end(), positive)) {
      throw Error(ErrorCode::InvalidArgument, "birth-death rates must be finite and positive");
    }
  }

  static TailHomogeneousChain birth_death(Scalar up, Scalar down) { return {{}, {}, up, down}; }

  [[nodiscard]] Scalar up(std::size_t state) const {
    return state - 1 < up_head_.size() ? up_head_[state - 1] : up_tail_;
  }
  [[nodiscard]] Scalar down(std::size_t state) const {
    if (state < 2) return Scalar(0);
    return state - 2 < down_head_.size() ? down_head_[state - 2] : down_tail_;
  }
  /// Rates of every state > tail_start() equal the tail values.
  [[nodiscard]] std::size_t tail_start() const { return std::max(up_head_.size(), down_head_.size() + 1); }
  [[nodiscard]] Scalar up_tail() const { return up_tail_; }
  [[nodiscard]] Scalar down_tail() const { return down_tail_; }
  [[nodiscard]] const std::vector<Scalar>& up_head() const { return up_head_; }
  [[nodiscard]] const std::vector<Scalar>& down_head() const { return down_head_; }

  /// Constant tail ratio down/up >= 1 makes the chain recurrent.
  [[nodiscard]] bool is_recurrent() const { return down_tail_ >= up_tail_; }

 private:
  std::vector<Scalar> up_head_;
  std::vector<Scalar> down_head_;
  Scalar up_tail_;
  Scalar down_tail_;
};

/// beta_j for j in S, monotone from `monotone_from` on and converging to
/// `limit`.
template <typename Scalar = double>
struct BetaSequence {
  std::function<Scalar(std::size_t)> value;
  Scalar limit = Scalar(0);
  std::size_t monotone_from = 1;

  /// sup over {s, s+1, ...}.
  [[nodiscard]] Scalar sup_from(std::size_t s) const {
    if (!std::isfinite(static_cast<double>(limit))) {
      throw Error(ErrorCode::UnboundedBeta, "beta sequence has no finite limit");
    }
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j = s; j < monotone_from; ++j) best = std::max(best, value(j));
    best = std::max({best, value(std::max(s, monotone_from)), limit});
    if (!std::isfinite(static_cast<double>(best))) {
      throw Error(ErrorCode::UnboundedBeta, "beta sequence has non-finite terms");
    }
    return best;
  }
};

/// Finite partition of S. Class indices are 0-based; class `tail_class()`
/// additionally contains every state >= tail_start().
class Partition {
 public:
  /// starts = {1, s_2, ..., s_m}: F_i = [s_i, s_{i+1}), F_m = [s_m, inf).
  static Partition from_blocks(const std::vector<std::size_t>& starts) {
    if (starts.empty() || starts.front() != 1) {
      throw Error(ErrorCode::InvalidArgument, "block starts must begin at state 1");
    }
    for (std::size_t k = 1; k < starts.size(); ++k) {
      if (starts[k] <= starts[k - 1]) {
        throw Error(ErrorCode::EmptyClass, "block starts must be strictly increasing");
      }
    }
    Partition p;
    p.members_.resize(starts.size());
    p.tail_start_ = starts.back();
    p.tail_class_ = starts.size() - 1;
    p.class_of_.assign(p.tail_start_, 0);
    for (std::size_t c = 0; c + 1 < starts.size(); ++c) {
      for (std::size_t s = starts[c]; s < starts[c + 1]; ++s) {
        p.members_[c].push_back(s);
        p.class_of_[s] = c;
      }
    }
    return p;
  }

  /// F_i = {j : beta_j in (k_{i-1}, k_i]} for interior cutpoints
  /// k_1 < ... < k_{m-1}, with k_0 = -inf and k_m = sup beta.
  template <typename Scalar>
  static Partition from_cutpoints(const BetaSequence<Scalar>& beta, const std::vector<Scalar>& cuts,
                                  std::size_t scan_limit = 1000000) {
    for (std::size_t k = 1; k < cuts.size(); ++k) {
      if (!(cuts[k] > cuts[k - 1])) throw Error(ErrorCode::InvalidArgument, "cutpoints must increase");
    }
    const std::size_t m = cuts.size() + 1;
    auto class_of_value = [&](Scalar v) {
      for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (v <= cuts[i]) return i;
      }
      return m - 1;
    };
    const std::size_t s0 = std::max<std::size_t>(beta.monotone_from, 1);
    const Scalar limit = beta.limit;
    if (!std::isfinite(static_cast<double>(limit))) {
      throw Error(ErrorCode::UnboundedBeta, "beta sequence has no finite limit");
    }
    std::size_t tail_class;
    if (beta.value(s0) <= limit) {
      tail_class = class_of_value(limit);
    } else {
      tail_class = m - 1;
      for (std::size_t i = 0; i < cuts.size(); ++i) {
        if (limit < cuts[i]) {
          tail_class = i;
          break;
        }
      }
    }
    std::size_t tail_start = 0;
    for (std::size_t j = s0; j <= scan_limit; ++j) {
      if (class_of_value(beta.value(j)) == tail_class) {
        tail_start = j;
        break;
      }
    }
    if (tail_start == 0) {
      throw Error(ErrorCode::InvalidArgument, "beta tail does not settle into one class within the scan limit");
    }
    Partition p;
    p.members_.resize(m);
    p.tail_start_ = tail_start;
    p.tail_class_ = tail_class;
    p.class_of_.assign(tail_start, 0);
    for (std::size_t j = 1; j < tail_start; ++j) {
      const std::size_t c = class_of_value(beta.value(j));
      p.members_[c].push_back(j);
      p.class_of_[j] = c;
    }
    for (std::size_t c = 0; c < m; ++c) {
      if (c != tail_class && p.members_[c].empty()) {
        std::ostringstream msg;
        msg << "class " << c + 1 << " is empty; delete a cutpoint";
        throw Error(ErrorCode::EmptyClass, msg.str());
      }
    }
    return p;
  }

  [[nodiscard]] std::size_t class_count() const { return members_.size(); }
  [[nodiscard]] std::size_t tail_class() const { return tail_class_; }
  [[nodiscard]] std::size_t tail_start() const { return tail_start_; }
  [[nodiscard]] const std::vector<std::size_t>& finite_members(std::size_t c) const { return members_[c]; }
  [[nodiscard]] std::size_t class_of(std::size_t state) const {
    return state >= tail_start_ ? tail_class_ : class_of_[state];
  }

 private:
  Partition() = default;
  std::vector<std::vector<std::size_t>> members_;
  std::vector<std::size_t> class_of_;  // indexed by state, entry 0 unused
  std::size_t tail_start_ = 1;
  std::size_t tail_class_ = 0;
};

template <typename Scalar = double>
struct CoarsenedChain {
  Vector<Scalar> beta;  // beta^F
  Matrix<Scalar> q;     // Q^F, conservative but possibly reducible
};

/// beta^F_i = sup_{j in F_i} beta_j; for k != i the class rate is the sup
/// (k < i) or inf (k > i) over r in F_i of the total rate from r into F_k.
template <typename Scalar>
CoarsenedChain<Scalar> coarsen(const TailHomogeneousChain<Scalar>& chain, const BetaSequence<Scalar>& beta,
                               const Partition& partition) {
  const std::size_t m = partition.class_count();
  const std::size_t tail = partition.tail_class();
  // Beyond `deep` a state's rates are the tail rates and both neighbours sit
  // in the tail class, so scanning the tail class up to `deep` is exhaustive.
  const std::size_t deep =
      std::max({partition.tail_start() + 1, chain.tail_start() + 1, beta.monotone_from});

  auto representatives = [&](std::size_t c) {
    std::vector<std::size_t> states = partition.finite_members(c);
    if (c == tail) {
      for (std::size_t s = partition.tail_start(); s <= deep; ++s) states.push_back(s);
    }
    return states;
  };
  auto flow = [&](std::size_t r, std::size_t k) {
    Scalar total(0);
    if (partition.class_of(r + 1) == k) total += chain.up(r);
    if (r >= 2 && partition.class_of(r - 1) == k) total += chain.down(r);
    return total;
  };

  CoarsenedChain<Scalar> out{Vector<Scalar>(static_cast<Index>(m)),
                             Matrix<Scalar>::Zero(static_cast<Index>(m), static_cast<Index>(m))};
  for (std::size_t i = 0; i < m; ++i) {
    const auto states = representatives(i);
    if (states.empty()) {
      std::ostringstream msg;
      msg << "class " << i + 1 << " is empty";
      throw Error(ErrorCode::EmptyClass, msg.str());
    }
    Scalar best = -std::numeric_limits<Scalar>::infinity();
    for (std::size_t j : partition.finite_members(i)) best = std::max(best, beta.value(j));
    if (i == tail) best = std::max(best, beta.sup_from(partition.tail_start()));
    if (!std::isfinite(static_cast<double>(best))) {
      throw Error(ErrorCode::UnboundedBeta, "class supremum of beta is not finite");
    }
    out.beta(static_cast<Index>(i)) = best;

    for (std::size_t k = 0; k < m; ++k) {
      if (k == i) continue;
      Scalar bound = flow(states.front(), k);
      for (std::size_t r : states) bound = k < i ? std::max(bound, flow(r, k)) : std::min(bound, flow(r, k));
      out.q(static_cast<Index>(i), static_cast<Index>(k)) = bound;
    }
    out.q(static_cast<Index>(i), static_cast<Index>(i)) = -out.q.row(static_cast<Index>(i)).sum();
  }
  return out;
}

}  // namespace regime
