#pragma once

// Model-file driven classification, simulation and the reproduction tables
// behind the command-line tool.

#include "regime/criteria.hpp"
#include "regime/model_io.hpp"
#include "regime/simulator.hpp"

#include <json.hpp>

#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

namespace regime {

/// Criterion tokens in the order `auto` tries them.
const std::vector<std::string>& criterion_ids();

struct ClassifyResult {
  Classification final;
  std::vector<Classification> attempts;
};

/// `criterion` is "auto" or one of criterion_ids(). A criterion whose inputs
/// the model does not provide throws CriterionNotApplicable.
ClassifyResult classify_model(const ModelFile& model, const std::string& criterion = "auto");

/// Simulation view of a model; birth-death regimes are truncated.
SdeModel build_sde(const ModelFile& model);

/// 0 for a conclusive verdict, 2 for Inconclusive.
int exit_code(Verdict v);

nlohmann::json certificate_json(const Certificate& c);
nlohmann::json classification_json(const Classification& c);
nlohmann::json report_json(const ModelFile& model, const ClassifyResult& result);
nlohmann::json simulation_json(const SimulationConfig& config, const SimulationReport& report);

/// One "dotted.key  value" line per leaf of the JSON document.
std::string render_text(const nlohmann::json& report);

/// Closed-form and bisected kappa thresholds for birth-death regimes with up
/// rate b and down rate a.
nlohmann::json thresholds_json(double a, double b);

/// example: "ex21", "ex22", "ou" or "cor31".
nlohmann::json reproduce_json(const std::string& example, bool simulate, unsigned threads);
const std::vector<std::string>& example_ids();

/// Models behind the reproduction tables, keyed by file stem.
std::vector<std::pair<std::string, ModelFile>> example_models();

/// Command-line entry point; returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace regime
