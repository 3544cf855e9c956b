#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>
#include <string_view>

namespace regime {

template <typename Scalar = double>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar = double>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Index = Eigen::Index;

enum class ErrorCode {
  InvalidArgument,
  // markov-core
  NegativeOffDiagonal,
  RowSumNonzero,
  Reducible,
  SingularSolve,
  UnboundedRate,
  EmptyGrid,
  ScanUnstable,
  EmptyClass,
  UnboundedBeta,
  // mmatrix
  SolverFailure,
  InconsistentChecks,
  NoConvergence,
  NotApplicable,
  // criteria
  NotSolvable,
  ChainNotRecurrent,
  NonConvergent,
  // simulator
  StepTooLarge,
  // cli
  ParseError,
  SchemaError,
  CriterionNotApplicable,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::NegativeOffDiagonal: return "NegativeOffDiagonal";
    case ErrorCode::RowSumNonzero: return "RowSumNonzero";
    case ErrorCode::Reducible: return "Reducible";
    case ErrorCode::SingularSolve: return "SingularSolve";
    case ErrorCode::UnboundedRate: return "UnboundedRate";
    case ErrorCode::EmptyGrid: return "EmptyGrid";
    case ErrorCode::ScanUnstable: return "ScanUnstable";
    case ErrorCode::EmptyClass: return "EmptyClass";
    case ErrorCode::UnboundedBeta: return "UnboundedBeta";
    case ErrorCode::SolverFailure: return "SolverFailure";
    case ErrorCode::InconsistentChecks: return "InconsistentChecks";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NotApplicable: return "NotApplicable";
    case ErrorCode::NotSolvable: return "NotSolvable";
    case ErrorCode::ChainNotRecurrent: return "ChainNotRecurrent";
    case ErrorCode::NonConvergent: return "NonConvergent";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::SchemaError: return "SchemaError";
    case ErrorCode::CriterionNotApplicable: return "CriterionNotApplicable";
  }
  return "Unknown";
}

/// Every failure in the library surfaces as this exception; `code()` is the
/// stable discriminator, `what()` carries the human-readable detail.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail), code_(code) {}

  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace regime
