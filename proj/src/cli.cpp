#include "regime/commands.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

namespace regime {

namespace {

struct SimOptions {
  std::vector<double> x0{5.0};
  int i0 = 1;
  double r0 = 1.0;
  double horizon = 500.0;
  double dt = 1e-3;
  int trials = 500;
  std::uint64_t seed = 1;
  double escape_radius = 50.0;
  unsigned threads = 0;
};

unsigned env_threads() {
  if (const char* s = std::getenv("REGIME_THREADS")) {
    const long v = std::strtol(s, nullptr, 10);
    if (v > 0) return static_cast<unsigned>(v);
  }
  return 1;
}

void add_sim_options(CLI::App* app, SimOptions& o) {
  app->add_option("--x0", o.x0, "Initial state (one value per coordinate)")->delimiter(',');
  app->add_option("--i0", o.i0, "Initial regime (1-based)");
  app->add_option("--r0", o.r0, "Return radius");
  app->add_option("--T,--horizon", o.horizon, "Time horizon T");
  app->add_option("--dt", o.dt, "Euler-Maruyama step");
  app->add_option("--trials", o.trials, "Number of paths");
  app->add_option("--seed", o.seed, "Base seed");
  app->add_option("--escape-radius", o.escape_radius, "Radius counted as escape");
  app->add_option("--threads", o.threads, "Worker threads (default: REGIME_THREADS or 1)");
}

SimulationConfig sim_config(const SimOptions& o) {
  SimulationConfig c;
  c.x0 = Eigen::Map<const Vector<>>(o.x0.data(), static_cast<Index>(o.x0.size()));
  c.i0 = o.i0 - 1;
  c.r0 = o.r0;
  c.horizon = o.horizon;
  c.dt = o.dt;
  c.trials = o.trials;
  c.seed = o.seed;
  c.escape_radius = o.escape_radius;
  c.threads = o.threads > 0 ? o.threads : env_threads();
  return c;
}

void emit(const nlohmann::json& doc, const std::string& format, const std::string& path, std::ostream& out) {
  const std::string body = format == "text" ? render_text(doc) : doc.dump(2) + "\n";
  if (path.empty()) {
    out << body;
    return;
  }
  std::ofstream file(path);
  if (!file) throw Error(ErrorCode::InvalidArgument, "cannot write " + path);
  file << body;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Recurrence and transience of regime-switching diffusions"};
  app.require_subcommand(1);
  std::string format = "json";
  std::string out_path;

  auto* classify = app.add_subcommand("classify", "Classify a model file");
  std::string model_path;
  std::string criterion = "auto";
  bool with_sim = false;
  SimOptions sim;
  classify->add_option("model", model_path, "Model file (JSON)")->required();
  classify->add_option("--criterion", criterion, "auto or a criterion id");
  classify->add_flag("--simulate", with_sim, "Append Monte Carlo evidence");
  add_sim_options(classify, sim);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo return and escape statistics");
  simulate->add_option("model", model_path, "Model file (JSON)")->required();
  add_sim_options(simulate, sim);

  auto* reproduce = app.add_subcommand("reproduce", "Recompute a worked example");
  std::string example;
  bool emit_models = false;
  reproduce->add_option("example", example, "ex21, ex22, ou or cor31")->required();
  reproduce->add_flag("--simulate", with_sim, "Add Monte Carlo corroboration");
  reproduce->add_flag("--emit-models", emit_models, "Write the example model files");
  reproduce->add_option("--threads", sim.threads, "Worker threads (default: REGIME_THREADS or 1)");

  auto* thresholds = app.add_subcommand("thresholds", "Kappa thresholds for birth-death regimes");
  double a = 2;
  double b = 1;
  thresholds->add_option("--a", a, "Down rate");
  thresholds->add_option("--b", b, "Up rate");

  auto* validate = app.add_subcommand("validate", "Check a model file and print it normalized");
  validate->add_option("model", model_path, "Model file (JSON)")->required();

  for (auto* sub : {classify, simulate, reproduce, thresholds, validate}) {
    sub->add_option("--format", format, "json or text")->check(CLI::IsMember({"json", "text"}));
    sub->add_option("--out", out_path,
                    sub == reproduce ? "Directory for the report and emitted models"
                                     : "Write the report here instead of stdout");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o;
    std::ostringstream e2;
    const int code = app.exit(e, o, e2);
    out << o.str();
    err << e2.str();
    return code == 0 ? 0 : 1;
  }

  try {
    if (*classify) {
      const ModelFile model = load_model(model_path);
      const auto result = classify_model(model, criterion);
      auto report = report_json(model, result);
      if (with_sim) {
        const auto cfg = sim_config(sim);
        report["simulation"] = simulation_json(cfg, run_ensemble(build_sde(model), cfg));
      }
      emit(report, format, out_path, out);
      return exit_code(result.final.verdict);
    }
    if (*simulate) {
      const ModelFile model = load_model(model_path);
      const auto cfg = sim_config(sim);
      auto report = simulation_json(cfg, run_ensemble(build_sde(model), cfg));
      report["model"] = model.name;
      emit(report, format, out_path, out);
      return 0;
    }
    if (*reproduce) {
      const std::filesystem::path dir = out_path.empty() ? "." : out_path;
      if (!out_path.empty() || emit_models) std::filesystem::create_directories(dir);
      if (emit_models) {
        for (const auto& [stem, model] : example_models()) std::ofstream(dir / (stem + ".json")) << dump_model(model);
      }
      const auto report = reproduce_json(example, with_sim, sim.threads > 0 ? sim.threads : env_threads());
      const std::string file = out_path.empty() ? "" : (dir / (example + (format == "text" ? ".txt" : ".json"))).string();
      emit(report, format, file, out);
      return 0;
    }
    if (*thresholds) {
      emit(thresholds_json(a, b), format, out_path, out);
      return 0;
    }
    emit(to_json(load_model(model_path)), format, out_path, out);
    return 0;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace regime
