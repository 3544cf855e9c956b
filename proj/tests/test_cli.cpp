#include "regime/commands.hpp"

#include "test_support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace regime;
using nlohmann::json;

namespace {

ErrorCode model_error(const std::string& text) {
  try {
    (void)parse_model(text);
  } catch (const Error& e) {
    return e.code();
  }
  return ErrorCode::InvalidArgument;
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "regime");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::filesystem::path scratch() {
  auto dir = std::filesystem::temp_directory_path() / "regime_test_cli";
  std::filesystem::create_directories(dir);
  return dir;
}

std::string write(const std::string& name, const std::string& text) {
  const auto path = scratch() / name;
  std::ofstream(path) << text;
  return path.string();
}

const char* kOu = R"m({
  "name": "ou",
  "regimes": 2,
  "q": [[-1, 1], [2, -2]],
  "drift": {"kind": "linear", "b": [-2, 1]},
  "sigma": 1
})m";

const char* kMatrixModel = R"m({
  "regimes": 2,
  "q": [[-1, 1], [2, -2]],
  "lyapunov": {"beta": [-1, 0.5], "tag": "infinity"}
})m";

}  // namespace

TEST_CASE("model files round-trip to equal objects") {
  for (const auto& [stem, model] : example_models()) {
    CAPTURE(stem);
    const ModelFile again = parse_model(dump_model(model));
    CHECK(again == model);
    CHECK(dump_model(again) == dump_model(model));
  }
  const ModelFile m = parse_model(kOu);
  CHECK(parse_model(dump_model(m)) == m);
  CHECK(m.name == "ou");
  CHECK(std::get<double>(m.sigma) == 1);
}

TEST_CASE("model file errors") {
  CHECK(model_error("{") == ErrorCode::ParseError);
  CHECK(model_error("[1, 2]") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "colour": 1})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 3, "q": [[-1, 1], [2, -2]]})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2]]})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "drift": {"kind": "linear", "b": [1]}})m") ==
        ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "drift": {"kind": "linear", "b": [1, "a"]}})m") ==
        ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "drift": {"kind": "cubic", "b": [1, 2]}})m") ==
        ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "sigma": 1e999})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "lyapunov": {"beta": [1, 2]}})m") ==
        ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": [[-1, 1], [2, -2]],
                        "lyapunov": {"exponent": -1, "r0": 1, "tag": "infinity"}})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 2, "q": {"rates": [[1, "x"], ["x", null]]}})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"q": {"birth_death": {"up": 1, "down": 2, "extra": 0}}})m") == ErrorCode::SchemaError);
  CHECK(model_error(R"m({"regimes": 1, "q": {"birth_death": {"up": 1, "down": 2}}})m") == ErrorCode::SchemaError);
  // A malformed expression surfaces when the model is used.
  const ModelFile m = parse_model(R"m({"regimes": 2, "q": {"rates": [[null, "1 +"], ["1", null]]},
                                      "lyapunov": {"beta": [-1, -1], "tag": "infinity"}})m");
  CHECK_THROWS_AS(classify_model(m), Error);
}

TEST_CASE("classify_model dispatch") {
  auto r = classify_model(parse_model(kOu));
  CHECK(r.final.criterion_id == "prop22");
  CHECK(r.final.verdict == Verdict::ExponentiallyErgodic);
  CHECK(certificate_holds(r.final));

  // beta = (-1, 0.5) has sum(mu beta) = -1/2 < 0.
  r = classify_model(parse_model(kMatrixModel));
  CHECK(r.final.verdict == Verdict::ExponentiallyErgodic);
  CHECK(r.final.criterion_id == "thm22");
  r = classify_model(parse_model(kMatrixModel), "thm21");
  CHECK(r.final.verdict == Verdict::ExponentiallyErgodic);
  CHECK(r.final.criterion_id == "thm21");

  try {
    (void)classify_model(parse_model(kMatrixModel), "prop22");
    FAIL("expected CriterionNotApplicable");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::CriterionNotApplicable);
  }
  CHECK_THROWS_AS(classify_model(parse_model(kMatrixModel), "thm99"), Error);

  // Birth-death models from the reproduction set, leading-minors reading.
  for (const auto& [stem, model] : example_models()) {
    CAPTURE(stem);
    const auto c = classify_model(model);
    if (stem == "ex21_kappa0.5") CHECK(c.final.verdict == Verdict::Recurrent);
    if (stem == "ex21_kappa0.65") CHECK(c.final.verdict == Verdict::Inconclusive);
    if (stem == "ex21_transient_kappa0.9") CHECK(c.final.verdict == Verdict::Transient);
    if (stem == "ex22_kappa0.3") CHECK(c.final.verdict == Verdict::ExponentiallyErgodic);
    if (stem == "ex22_kappa1.2") CHECK(c.final.verdict == Verdict::Transient);
    if (stem == "ou_recurrent") CHECK(c.final.verdict == Verdict::ExponentiallyErgodic);
    if (stem == "ou_transient") CHECK(c.final.verdict == Verdict::Transient);
    if (stem == "power_balanced") CHECK(c.final.verdict == Verdict::Recurrent);
    if (c.final.criterion_id != "auto") CHECK(certificate_holds(c.final));
  }
}

TEST_CASE("state-dependent and radial models") {
  // Rates without hints are bounded by scanning; (1 + 2x)/(1 + x) on the
  // reflected half line ranges over [1, 2).
  const ModelFile sd = parse_model(R"m({
    "regimes": 2, "boundary": "reflect",
    "q": {"rates": [[null, "(1 + 2*x)/(1 + x)"], ["(1 + 2*x)/(1 + x)", null]]},
    "drift": {"kind": "linear", "b": [-0.7, 0.3]}, "sigma": 1.4142135623730951,
    "lyapunov": {"exponent": 1, "r0": 1}, "matrix_test": "leading-minors"})m");
  auto r = classify_model(sd, "thm23");
  CHECK(r.final.verdict == Verdict::ExponentiallyErgodic);
  REQUIRE(r.final.certificate.generator);
  CHECK((*r.final.certificate.generator)(0, 1) == doctest::Approx(1.0));
  CHECK((*r.final.certificate.generator)(1, 0) == doctest::Approx(2.0).epsilon(1e-5));

  // bhat = -phi in regime 1 and +phi/2 in regime 2, delta = 0.
  const ModelFile radial = parse_model(R"m({
    "dimension": 2, "regimes": 2, "q": [[-1, 1], [2, -2]],
    "drift": {"kind": "radial", "delta": 0, "profile": [["-phi1", "-phi2"], ["phi1/2", "phi2/2"]]},
    "sigma": 1})m");
  r = classify_model(radial);
  CHECK(r.final.criterion_id == "thm33");
  CHECK(r.final.verdict != Verdict::Transient);

  const SdeModel sde = build_sde(radial);
  Vector<> out(2);
  sde.drift(regime::testing::vec({3, 4}), 0, out);
  CHECK(out(0) == doctest::Approx(-0.6));
  CHECK(out(1) == doctest::Approx(-0.8));
}

TEST_CASE("reports") {
  const ModelFile m = parse_model(kOu);
  const auto r = classify_model(m);
  const json report = report_json(m, r);
  CHECK(report["verdict"] == "ExponentiallyErgodic");
  CHECK(report["criterion"] == "prop22");
  CHECK(report["certificate_valid"] == true);
  CHECK(report["attempts"].size() == 1);

  // Text and JSON carry the same leaves.
  const std::string text = render_text(report);
  CHECK(text.find("verdict") != std::string::npos);
  CHECK(text.find("certificate.mu") != std::string::npos);
  CHECK(text.find("attempts[0].criterion") != std::string::npos);
  std::size_t lines = 0;
  for (char c : text) lines += c == '\n';
  std::size_t leaves = 0;
  std::function<void(const json&)> count = [&](const json& v) {
    const bool numeric = v.is_array() && std::all_of(v.begin(), v.end(), [](const json& x) {
      return x.is_number() || (x.is_array() && std::all_of(x.begin(), x.end(), [](const json& y) { return y.is_number(); }));
    });
    if ((v.is_object() || v.is_array()) && !v.empty() && !numeric) {
      for (const auto& c : v) count(c);
    } else {
      ++leaves;
    }
  };
  count(report);
  CHECK(lines == leaves);

  SimulationConfig cfg;
  SimulationReport sim;
  sim.mean_hitting_time = std::nan("");
  const std::string dumped = simulation_json(cfg, sim).dump();
  CHECK(dumped.find("\"mean_hitting_time\":null") != std::string::npos);
}

TEST_CASE("command line") {
  const auto ou = write("ou.json", kOu);
  auto r = cli({"classify", ou});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["verdict"] == "ExponentiallyErgodic");

  r = cli({"classify", ou, "--format", "text"});
  CHECK(r.code == 0);
  CHECK(r.out.find("criterion") != std::string::npos);

  r = cli({"classify", ou, "--criterion", "thm21"});
  CHECK(r.code == 1);
  CHECK(r.err.find("CriterionNotApplicable") != std::string::npos);

  r = cli({"classify", write("bad.json", "{\"q\": 1")});
  CHECK(r.code == 1);
  CHECK(r.err.find("ParseError") != std::string::npos);
  r = cli({"classify", write("schema.json", R"m({"regimes": 2, "q": [[-1, 1], [2, -2]], "oops": 1})m")});
  CHECK(r.code == 1);
  CHECK(r.err.find("SchemaError") != std::string::npos);
  r = cli({"classify", (scratch() / "missing.json").string()});
  CHECK(r.code == 1);
  r = cli({"frobnicate"});
  CHECK(r.code == 1);

  // Inconclusive exits with 2.
  const auto dir = scratch() / "models";
  r = cli({"reproduce", "cor31", "--emit-models", "--out", dir.string()});
  CHECK(r.code == 0);
  CHECK(r.out.empty());
  CHECK(json::parse(std::ifstream(dir / "cor31.json"))["example"] == "cor31");
  for (const auto& [stem, model] : example_models()) CHECK(load_model((dir / (stem + ".json")).string()) == model);
  r = cli({"classify", (dir / "ex21_kappa0.65.json").string()});
  CHECK(r.code == 2);
  CHECK(json::parse(r.out)["verdict"] == "Inconclusive");
  r = cli({"classify", (dir / "ex21_kappa0.5.json").string(), "--criterion", "thm24"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["verdict"] == "Recurrent");

  r = cli({"simulate", ou, "--trials", "0"});
  CHECK(r.code == 1);
  r = cli({"simulate", ou, "--trials", "100", "--horizon", "20", "--dt", "0.01", "--seed", "3"});
  CHECK(r.code == 0);
  const json sim = json::parse(r.out);
  CHECK(sim["returned"].get<int>() + sim["escaped"].get<int>() + sim["censored"].get<int>() == 100);
  CHECK(sim["return_fraction"].get<double>() > 0.95);
  // Same seed, different thread count, same report.
  const auto again = cli({"simulate", ou, "--trials", "100", "--horizon", "20", "--dt", "0.01", "--seed", "3",
                          "--threads", "2"});
  CHECK(again.out == r.out);

  r = cli({"thresholds", "--a", "2", "--b", "1"});
  CHECK(r.code == 0);
  CHECK(json::parse(r.out)["kappa_rec"].get<double>() == doctest::Approx(2 - std::sqrt(2.0)));
  r = cli({"thresholds", "--a", "1", "--b", "2"});
  CHECK(r.code == 1);

  r = cli({"validate", ou});
  CHECK(r.code == 0);
  CHECK(parse_model(r.out) == parse_model(kOu));
}
