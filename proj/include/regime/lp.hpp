#pragma once

// Dense phase-1 simplex for small feasibility problems
//   find z >= 0 with G z >= h.
// Bland's rule throughout; sizes here are a few dozen rows at most.

#include "regime/core.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

namespace regime {

template <typename Scalar = double>
struct FeasibilityOptions {
  Scalar pivot_tolerance = Scalar(1e-11);
  Scalar feasibility_tolerance = Scalar(1e-9);
  int max_iterations = 20000;
};

/// Returns a feasible point, std::nullopt when the system is infeasible, and
/// throws SolverFailure when the iteration cap is hit.
template <typename Scalar>
std::optional<Vector<Scalar>> find_nonnegative_solution(const Matrix<Scalar>& g, const Vector<Scalar>& h,
                                                        const FeasibilityOptions<Scalar>& opt = {}) {
  using std::abs;
  const Index rows = g.rows();
  const Index n = g.cols();
  if (h.size() != rows) throw Error(ErrorCode::InvalidArgument, "feasibility rhs has wrong length");
  if (!g.allFinite() || !h.allFinite()) throw Error(ErrorCode::InvalidArgument, "non-finite LP data");
  if (rows == 0) return Vector<Scalar>::Zero(n);

  // Row-equilibrate: each row scaled to unit max-magnitude.
  Matrix<Scalar> a = g;
  Vector<Scalar> b = h;
  for (Index i = 0; i < rows; ++i) {
    const Scalar s = std::max(a.row(i).cwiseAbs().maxCoeff(), abs(b(i)));
    if (s > Scalar(0)) {
      a.row(i) /= s;
      b(i) /= s;
    }
  }

  // Columns: z (n), surplus (rows), artificial (one per row with b >= 0).
  std::vector<Index> artificial_row;
  for (Index i = 0; i < rows; ++i) {
    if (b(i) >= Scalar(0)) artificial_row.push_back(i);
  }
  const Index n_art = static_cast<Index>(artificial_row.size());
  const Index cols = n + rows + n_art;
  Matrix<Scalar> t = Matrix<Scalar>::Zero(rows + 1, cols + 1);
  std::vector<Index> basis(static_cast<std::size_t>(rows));
  Index next_art = 0;
  for (Index i = 0; i < rows; ++i) {
    if (b(i) >= Scalar(0)) {
      t.row(i).head(n) = a.row(i);
      t(i, n + i) = Scalar(-1);
      t(i, n + rows + next_art) = Scalar(1);
      t(i, cols) = b(i);
      basis[static_cast<std::size_t>(i)] = n + rows + next_art;
      ++next_art;
    } else {
      t.row(i).head(n) = -a.row(i);
      t(i, n + i) = Scalar(1);
      t(i, cols) = -b(i);
      basis[static_cast<std::size_t>(i)] = n + i;
    }
  }
  // Reduced costs of sum(artificials).
  for (Index k = 0; k < n_art; ++k) t(rows, n + rows + k) = Scalar(1);
  for (Index i : artificial_row) t.row(rows) -= t.row(i);

  const Scalar tol = opt.pivot_tolerance;
  for (int iter = 0;; ++iter) {
    if (iter >= opt.max_iterations) throw Error(ErrorCode::SolverFailure, "simplex iteration cap reached");
    // Bland: lowest-index improving column that has a ratio-test row. The
    // phase-1 objective is bounded below by 0, so an improving column with
    // no positive entry is a round-off artifact and is skipped.
    Index enter = -1;
    Index leave = -1;
    for (Index j = 0; j < cols && leave < 0; ++j) {
      if (!(t(rows, j) < -tol)) continue;
      Scalar best_ratio = Scalar(0);
      for (Index i = 0; i < rows; ++i) {
        if (t(i, j) > tol) {
          const Scalar ratio = t(i, cols) / t(i, j);
          if (leave < 0 || ratio < best_ratio - tol * std::max(Scalar(1), abs(best_ratio)) ||
              (abs(ratio - best_ratio) <= tol * std::max(Scalar(1), abs(best_ratio)) &&
               basis[static_cast<std::size_t>(i)] < basis[static_cast<std::size_t>(leave)])) {
            leave = i;
            best_ratio = ratio;
          }
        }
      }
      if (leave >= 0) enter = j;
    }
    if (enter < 0) break;
    t.row(leave) /= t(leave, enter);
    for (Index i = 0; i <= rows; ++i) {
      if (i != leave && t(i, enter) != Scalar(0)) t.row(i) -= t(i, enter) * t.row(leave);
    }
    basis[static_cast<std::size_t>(leave)] = enter;
  }

  const Scalar infeasibility = -t(rows, cols);
  if (infeasibility > opt.feasibility_tolerance) return std::nullopt;

  Vector<Scalar> z = Vector<Scalar>::Zero(n);
  for (Index i = 0; i < rows; ++i) {
    const Index var = basis[static_cast<std::size_t>(i)];
    if (var < n) z(var) = std::max(Scalar(0), t(i, cols));
  }
  return z;
}

}  // namespace regime
