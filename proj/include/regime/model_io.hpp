#pragma once

// Model files: one JSON document per model. Unknown keys are rejected and
// every number must be finite. Regime and state indices are 1-based in files.

#include <json.hpp>

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace regime {

using Table = std::vector<std::vector<double>>;

struct RateHint {
  int from = 0;
  int to = 0;
  double sup = 0;
  double inf = 0;
  bool operator==(const RateHint&) const = default;
};

/// Off-diagonal rates as expressions in x, r, x1..xd (and parameters);
/// std::nullopt on the diagonal and for absent transitions.
struct RateTable {
  std::vector<std::vector<std::optional<std::string>>> rates;
  std::vector<RateHint> hints;
  double scan_r_max = 1e6;
  int scan_points = 200;
  bool operator==(const RateTable&) const = default;
};

struct BirthDeathSpec {
  double up = 0;
  double down = 0;
  std::vector<double> up_head;
  std::vector<double> down_head;
  /// Number of states kept when simulating.
  std::size_t truncate = 50;
  bool operator==(const BirthDeathSpec&) const = default;
};

using RateSpec = std::variant<Table, RateTable, BirthDeathSpec>;

struct DriftSpec {
  /// linear (or ou): b_i x.  power: b_i |x|^delta sgn(x), d = 1.
  /// radial: |x|^delta bhat(x/|x|, i), profile[i][k] in phi1..phid.
  /// linear-sequence: b_j x over infinitely many regimes, b an expression in j.
  std::string kind;
  std::vector<double> b;
  double delta = 1.0;
  std::vector<std::vector<std::string>> profile;
  std::string sequence;
  double limit = 0;
  std::size_t monotone_from = 1;
  bool operator==(const DriftSpec&) const = default;
};

/// Same sigma for every regime, one scalar per regime, or one matrix per regime.
using SigmaSpec = std::variant<double, std::vector<double>, std::vector<Table>>;

struct LyapunovSpec {
  std::optional<std::vector<double>> beta;
  /// Expression in j for infinitely many regimes.
  std::optional<std::string> sequence;
  double limit = 0;
  std::size_t monotone_from = 1;
  /// Preset V = |x|^exponent; beta derived from linear drift and sigma.
  std::optional<double> exponent;
  std::optional<double> r0;
  /// "infinity" or "zero"; implied by the sign of a preset exponent.
  std::optional<std::string> tag;
  bool operator==(const LyapunovSpec&) const = default;
};

struct TwoFunctionSpec {
  std::vector<double> beta;
  std::string h_limit = "infinity";
  bool operator==(const TwoFunctionSpec&) const = default;
};

struct PartitionSpec {
  std::optional<std::vector<std::size_t>> blocks;
  std::optional<std::vector<double>> cutpoints;
  bool operator==(const PartitionSpec&) const = default;
};

struct RadialOptions {
  int grid = 0;  // 0: default for the dimension
  std::vector<double> radii{1e2, 1e3, 1e4};
  bool operator==(const RadialOptions&) const = default;
};

struct ModelFile {
  std::string name;
  int dimension = 1;
  /// Absent for birth-death regimes.
  std::optional<int> regimes;
  std::map<std::string, double> parameters;
  RateSpec q;
  std::optional<DriftSpec> drift;
  SigmaSpec sigma = 1.0;
  std::optional<LyapunovSpec> lyapunov;
  std::optional<TwoFunctionSpec> two_function;
  std::vector<PartitionSpec> partitions;
  std::string boundary = "none";
  std::string matrix_test = "strict";
  std::optional<RadialOptions> radial;
  bool operator==(const ModelFile&) const = default;

  [[nodiscard]] bool infinite() const { return std::holds_alternative<BirthDeathSpec>(q); }
};

/// Throws ParseError (malformed JSON) or SchemaError.
ModelFile parse_model(const std::string& text);
ModelFile load_model(const std::string& path);

nlohmann::json to_json(const ModelFile& model);
std::string dump_model(const ModelFile& model);

}  // namespace regime
