#include "regime/model_io.hpp"

#include "regime/core.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace regime {

using nlohmann::json;

namespace {

[[noreturn]] void schema(const std::string& where, const std::string& what) {
  throw Error(ErrorCode::SchemaError, where + ": " + what);
}

void allow(const json& obj, const std::string& where, std::initializer_list<const char*> keys) {
  if (!obj.is_object()) schema(where, "expected an object");
  const std::set<std::string> known(keys.begin(), keys.end());
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) schema(where, "unknown key '" + key + "'");
  }
}

void require(const json& obj, const std::string& where, const char* key) {
  if (!obj.contains(key)) schema(where, std::string("missing key '") + key + "'");
}

double number(const json& v, const std::string& where) {
  if (!v.is_number()) schema(where, "expected a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) schema(where, "number is not finite");
  return d;
}

int integer(const json& v, const std::string& where, int min) {
  if (!v.is_number_integer()) schema(where, "expected an integer");
  const auto i = v.get<long long>();
  if (i < min || i > 1000000000) schema(where, "integer out of range");
  return static_cast<int>(i);
}

std::string text(const json& v, const std::string& where) {
  if (!v.is_string()) schema(where, "expected a string");
  return v.get<std::string>();
}

std::string choice(const json& v, const std::string& where, std::initializer_list<const char*> options) {
  const std::string s = text(v, where);
  for (const char* o : options) {
    if (s == o) return s;
  }
  std::string list;
  for (const char* o : options) list += std::string(list.empty() ? "" : ", ") + o;
  schema(where, "expected one of " + list);
}

std::vector<double> numbers(const json& v, const std::string& where) {
  if (!v.is_array()) schema(where, "expected an array of numbers");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(number(v[k], where + "[" + std::to_string(k) + "]"));
  return out;
}

Table table(const json& v, const std::string& where) {
  if (!v.is_array() || v.empty()) schema(where, "expected a non-empty array of rows");
  Table out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(numbers(v[k], where + "[" + std::to_string(k) + "]"));
  for (const auto& row : out) {
    if (row.size() != out.size()) schema(where, "matrix must be square");
  }
  return out;
}

std::string format_number(double v) {
  std::ostringstream s;
  s.precision(17);
  s << v;
  return s.str();
}

RateTable rate_table(const json& v) {
  const std::string where = "q";
  allow(v, where, {"rates", "hints", "scan"});
  require(v, where, "rates");
  RateTable t;
  const json& rows = v["rates"];
  if (!rows.is_array() || rows.empty()) schema("q.rates", "expected a non-empty array of rows");
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const std::string rw = "q.rates[" + std::to_string(i) + "]";
    if (!rows[i].is_array() || rows[i].size() != rows.size()) schema(rw, "rate table must be square");
    std::vector<std::optional<std::string>> row;
    for (std::size_t j = 0; j < rows.size(); ++j) {
      const json& cell = rows[i][j];
      const std::string cw = rw + "[" + std::to_string(j) + "]";
      if (cell.is_null()) {
        row.emplace_back();
      } else if (i == j) {
        schema(cw, "diagonal entries must be null");
      } else if (cell.is_number()) {
        row.emplace_back(format_number(number(cell, cw)));
      } else {
        row.emplace_back(text(cell, cw));
      }
    }
    t.rates.push_back(std::move(row));
  }
  if (v.contains("hints")) {
    if (!v["hints"].is_array()) schema("q.hints", "expected an array");
    for (std::size_t k = 0; k < v["hints"].size(); ++k) {
      const json& h = v["hints"][k];
      const std::string hw = "q.hints[" + std::to_string(k) + "]";
      allow(h, hw, {"from", "to", "sup", "inf"});
      for (const char* key : {"from", "to", "sup", "inf"}) require(h, hw, key);
      RateHint hint{integer(h["from"], hw + ".from", 1), integer(h["to"], hw + ".to", 1), number(h["sup"], hw + ".sup"),
                    number(h["inf"], hw + ".inf")};
      const int n = static_cast<int>(t.rates.size());
      if (hint.from > n || hint.to > n || hint.from == hint.to) schema(hw, "regime index out of range");
      if (hint.inf > hint.sup) schema(hw, "inf exceeds sup");
      t.hints.push_back(hint);
    }
  }
  if (v.contains("scan")) {
    allow(v["scan"], "q.scan", {"r_max", "points"});
    if (v["scan"].contains("r_max")) t.scan_r_max = number(v["scan"]["r_max"], "q.scan.r_max");
    if (v["scan"].contains("points")) t.scan_points = integer(v["scan"]["points"], "q.scan.points", 2);
  }
  return t;
}

BirthDeathSpec birth_death(const json& v) {
  const std::string where = "q.birth_death";
  allow(v, where, {"up", "down", "up_head", "down_head", "truncate"});
  require(v, where, "up");
  require(v, where, "down");
  BirthDeathSpec bd;
  bd.up = number(v["up"], where + ".up");
  bd.down = number(v["down"], where + ".down");
  if (v.contains("up_head")) bd.up_head = numbers(v["up_head"], where + ".up_head");
  if (v.contains("down_head")) bd.down_head = numbers(v["down_head"], where + ".down_head");
  if (v.contains("truncate")) bd.truncate = static_cast<std::size_t>(integer(v["truncate"], where + ".truncate", 2));
  return bd;
}

DriftSpec drift(const json& v) {
  allow(v, "drift", {"kind", "b", "delta", "profile", "limit", "monotone_from"});
  require(v, "drift", "kind");
  DriftSpec d;
  d.kind = choice(v["kind"], "drift.kind", {"linear", "ou", "power", "radial", "linear-sequence"});
  if (d.kind == "linear-sequence") {
    require(v, "drift", "b");
    require(v, "drift", "limit");
    d.sequence = text(v["b"], "drift.b");
    d.limit = number(v["limit"], "drift.limit");
    if (v.contains("monotone_from")) {
      d.monotone_from = static_cast<std::size_t>(integer(v["monotone_from"], "drift.monotone_from", 1));
    }
  } else if (d.kind == "radial") {
    require(v, "drift", "profile");
    require(v, "drift", "delta");
    const json& p = v["profile"];
    if (!p.is_array() || p.empty()) schema("drift.profile", "expected one row of expressions per regime");
    for (std::size_t i = 0; i < p.size(); ++i) {
      const std::string pw = "drift.profile[" + std::to_string(i) + "]";
      if (!p[i].is_array() || p[i].empty()) schema(pw, "expected an array of expressions");
      std::vector<std::string> row;
      for (std::size_t k = 0; k < p[i].size(); ++k) row.push_back(text(p[i][k], pw + "[" + std::to_string(k) + "]"));
      d.profile.push_back(std::move(row));
    }
  } else {
    require(v, "drift", "b");
    d.b = numbers(v["b"], "drift.b");
  }
  if (d.kind != "linear-sequence" && v.contains("limit")) schema("drift", "'limit' only applies to linear-sequence");
  if (d.kind == "power" || d.kind == "radial") {
    require(v, "drift", "delta");
    d.delta = number(v["delta"], "drift.delta");
  } else if (v.contains("delta")) {
    schema("drift", "'delta' only applies to power and radial drifts");
  }
  return d;
}

SigmaSpec sigma(const json& v) {
  if (v.is_number()) return number(v, "sigma");
  if (!v.is_array() || v.empty()) schema("sigma", "expected a number, an array of numbers or an array of matrices");
  if (v[0].is_array()) {
    std::vector<Table> out;
    for (std::size_t k = 0; k < v.size(); ++k) out.push_back(table(v[k], "sigma[" + std::to_string(k) + "]"));
    return out;
  }
  return numbers(v, "sigma");
}

std::string limit_tag(const json& v, const std::string& where) { return choice(v, where, {"infinity", "zero"}); }

LyapunovSpec lyapunov(const json& v) {
  allow(v, "lyapunov", {"beta", "sequence", "limit", "monotone_from", "exponent", "r0", "tag"});
  LyapunovSpec l;
  const int forms = static_cast<int>(v.contains("beta")) + static_cast<int>(v.contains("sequence")) +
                    static_cast<int>(v.contains("exponent"));
  if (forms != 1) schema("lyapunov", "give exactly one of 'beta', 'sequence' or 'exponent'");
  if (v.contains("beta")) l.beta = numbers(v["beta"], "lyapunov.beta");
  if (v.contains("sequence")) {
    l.sequence = text(v["sequence"], "lyapunov.sequence");
    require(v, "lyapunov", "limit");
    l.limit = number(v["limit"], "lyapunov.limit");
    if (v.contains("monotone_from")) {
      l.monotone_from = static_cast<std::size_t>(integer(v["monotone_from"], "lyapunov.monotone_from", 1));
    }
  } else if (v.contains("limit") || v.contains("monotone_from")) {
    schema("lyapunov", "'limit' and 'monotone_from' only apply to 'sequence'");
  }
  if (v.contains("exponent")) {
    l.exponent = number(v["exponent"], "lyapunov.exponent");
    if (*l.exponent == 0) schema("lyapunov.exponent", "must be nonzero");
    require(v, "lyapunov", "r0");
  }
  if (v.contains("r0")) {
    l.r0 = number(v["r0"], "lyapunov.r0");
    if (!(*l.r0 > 0)) schema("lyapunov.r0", "must be positive");
  }
  if (v.contains("tag")) l.tag = limit_tag(v["tag"], "lyapunov.tag");
  if (!l.tag && !l.exponent) schema("lyapunov", "missing key 'tag'");
  if (l.tag && l.exponent && (*l.tag == "infinity") != (*l.exponent > 0)) {
    schema("lyapunov.tag", "contradicts the sign of the exponent");
  }
  return l;
}

PartitionSpec partition(const json& v, const std::string& where) {
  allow(v, where, {"blocks", "cutpoints"});
  PartitionSpec p;
  if (v.contains("blocks") == v.contains("cutpoints")) schema(where, "give exactly one of 'blocks' or 'cutpoints'");
  if (v.contains("blocks")) {
    std::vector<std::size_t> blocks;
    if (!v["blocks"].is_array() || v["blocks"].empty()) schema(where + ".blocks", "expected block start states");
    for (const auto& b : v["blocks"]) blocks.push_back(static_cast<std::size_t>(integer(b, where + ".blocks", 1)));
    p.blocks = blocks;
  } else {
    p.cutpoints = numbers(v["cutpoints"], where + ".cutpoints");
  }
  return p;
}

std::size_t regime_count(const ModelFile& m) {
  if (const auto* t = std::get_if<Table>(&m.q)) return t->size();
  if (const auto* r = std::get_if<RateTable>(&m.q)) return r->rates.size();
  return 0;
}

void cross_check(const ModelFile& m) {
  const std::size_t n = regime_count(m);
  if (m.infinite()) {
    if (m.regimes) schema("regimes", "omit for birth-death regimes");
    if (m.dimension != 1) schema("dimension", "birth-death regimes support dimension 1 only");
    if (m.drift && m.drift->kind != "linear-sequence") schema("drift.kind", "birth-death regimes need linear-sequence");
    if (m.lyapunov && m.lyapunov->beta) schema("lyapunov", "birth-death regimes need 'sequence' or 'exponent'");
    if (!std::holds_alternative<double>(m.sigma)) schema("sigma", "birth-death regimes need a single sigma");
    if (m.two_function) schema("two_function", "not supported for birth-death regimes");
    return;
  }
  if (!m.regimes) schema("model", "missing key 'regimes'");
  if (static_cast<std::size_t>(*m.regimes) != n) schema("regimes", "does not match the size of q");
  auto length = [&](std::size_t k, const char* where) {
    if (k != n) schema(where, "expected one entry per regime");
  };
  if (m.drift) {
    if (m.drift->kind == "linear-sequence") schema("drift.kind", "linear-sequence needs birth-death regimes");
    if (m.drift->kind == "radial") {
      length(m.drift->profile.size(), "drift.profile");
      for (const auto& row : m.drift->profile) {
        if (static_cast<int>(row.size()) != m.dimension) schema("drift.profile", "expected one entry per dimension");
      }
    } else {
      length(m.drift->b.size(), "drift.b");
    }
    if (m.drift->kind == "power" && m.dimension != 1) schema("drift.kind", "power drift needs dimension 1");
  }
  if (const auto* per = std::get_if<std::vector<double>>(&m.sigma)) length(per->size(), "sigma");
  if (const auto* mats = std::get_if<std::vector<Table>>(&m.sigma)) {
    length(mats->size(), "sigma");
    for (const auto& s : *mats) {
      if (static_cast<int>(s.size()) != m.dimension) schema("sigma", "matrix size does not match dimension");
    }
  }
  if (m.lyapunov) {
    if (m.lyapunov->sequence) schema("lyapunov.sequence", "needs birth-death regimes");
    if (m.lyapunov->beta) length(m.lyapunov->beta->size(), "lyapunov.beta");
  }
  if (m.two_function) length(m.two_function->beta.size(), "two_function.beta");
  if (!m.partitions.empty()) schema("partitions", "only used with birth-death regimes");
  if (m.boundary == "reflect" && m.dimension != 1) schema("boundary", "reflection needs dimension 1");
}

json optional_string(const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); }

}  // namespace

ModelFile parse_model(const std::string& source) {
  json doc;
  try {
    doc = json::parse(source);
  } catch (const json::out_of_range& e) {
    throw Error(ErrorCode::SchemaError, std::string("number is not finite: ") + e.what());
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ParseError, e.what());
  }
  allow(doc, "model",
        {"name", "dimension", "regimes", "parameters", "q", "drift", "sigma", "lyapunov", "two_function",
         "partitions", "boundary", "matrix_test", "radial"});
  require(doc, "model", "q");
  ModelFile m;
  if (doc.contains("name")) m.name = text(doc["name"], "name");
  if (doc.contains("dimension")) m.dimension = integer(doc["dimension"], "dimension", 1);
  if (doc.contains("regimes")) m.regimes = integer(doc["regimes"], "regimes", 1);
  if (doc.contains("parameters")) {
    if (!doc["parameters"].is_object()) schema("parameters", "expected an object");
    for (const auto& [key, value] : doc["parameters"].items()) m.parameters[key] = number(value, "parameters." + key);
  }
  const json& q = doc["q"];
  if (q.is_array()) {
    m.q = table(q, "q");
  } else if (q.is_object() && q.contains("birth_death")) {
    allow(q, "q", {"birth_death"});
    m.q = birth_death(q["birth_death"]);
  } else if (q.is_object()) {
    m.q = rate_table(q);
  } else {
    schema("q", "expected a matrix, a rate table or a birth_death object");
  }
  if (doc.contains("drift")) m.drift = drift(doc["drift"]);
  if (doc.contains("sigma")) m.sigma = sigma(doc["sigma"]);
  if (doc.contains("lyapunov")) m.lyapunov = lyapunov(doc["lyapunov"]);
  if (doc.contains("two_function")) {
    const json& t = doc["two_function"];
    allow(t, "two_function", {"beta", "h_limit"});
    require(t, "two_function", "beta");
    TwoFunctionSpec tf;
    tf.beta = numbers(t["beta"], "two_function.beta");
    if (t.contains("h_limit")) tf.h_limit = limit_tag(t["h_limit"], "two_function.h_limit");
    m.two_function = tf;
  }
  if (doc.contains("partitions")) {
    if (!doc["partitions"].is_array()) schema("partitions", "expected an array");
    for (std::size_t k = 0; k < doc["partitions"].size(); ++k) {
      m.partitions.push_back(partition(doc["partitions"][k], "partitions[" + std::to_string(k) + "]"));
    }
  }
  if (doc.contains("boundary")) m.boundary = choice(doc["boundary"], "boundary", {"none", "reflect"});
  if (doc.contains("matrix_test")) {
    m.matrix_test = choice(doc["matrix_test"], "matrix_test", {"strict", "leading-minors"});
  }
  if (doc.contains("radial")) {
    const json& r = doc["radial"];
    allow(r, "radial", {"grid", "radii"});
    RadialOptions opt;
    if (r.contains("grid")) opt.grid = integer(r["grid"], "radial.grid", 1);
    if (r.contains("radii")) {
      opt.radii = numbers(r["radii"], "radial.radii");
      if (opt.radii.empty() || !std::all_of(opt.radii.begin(), opt.radii.end(), [](double x) { return x > 0; })) {
        schema("radial.radii", "expected positive radii");
      }
    }
    m.radial = opt;
  }
  cross_check(m);
  return m;
}

ModelFile load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::ParseError, "cannot open model file " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_model(buffer.str());
}

json to_json(const ModelFile& m) {
  json doc;
  if (!m.name.empty()) doc["name"] = m.name;
  doc["dimension"] = m.dimension;
  if (m.regimes) doc["regimes"] = *m.regimes;
  if (!m.parameters.empty()) doc["parameters"] = m.parameters;
  if (const auto* t = std::get_if<Table>(&m.q)) {
    doc["q"] = *t;
  } else if (const auto* r = std::get_if<RateTable>(&m.q)) {
    json rows = json::array();
    for (const auto& row : r->rates) {
      json cells = json::array();
      for (const auto& cell : row) cells.push_back(optional_string(cell));
      rows.push_back(cells);
    }
    json hints = json::array();
    for (const auto& h : r->hints) hints.push_back({{"from", h.from}, {"to", h.to}, {"sup", h.sup}, {"inf", h.inf}});
    doc["q"] = {{"rates", rows}, {"scan", {{"r_max", r->scan_r_max}, {"points", r->scan_points}}}};
    if (!r->hints.empty()) doc["q"]["hints"] = hints;
  } else {
    const auto& bd = std::get<BirthDeathSpec>(m.q);
    json b{{"up", bd.up}, {"down", bd.down}, {"truncate", bd.truncate}};
    if (!bd.up_head.empty()) b["up_head"] = bd.up_head;
    if (!bd.down_head.empty()) b["down_head"] = bd.down_head;
    doc["q"] = {{"birth_death", b}};
  }
  if (m.drift) {
    const DriftSpec& d = *m.drift;
    json j{{"kind", d.kind}};
    if (d.kind == "linear-sequence") {
      j["b"] = d.sequence;
      j["limit"] = d.limit;
      j["monotone_from"] = d.monotone_from;
    } else if (d.kind == "radial") {
      j["profile"] = d.profile;
    } else {
      j["b"] = d.b;
    }
    if (d.kind == "power" || d.kind == "radial") j["delta"] = d.delta;
    doc["drift"] = j;
  }
  std::visit([&](const auto& s) { doc["sigma"] = s; }, m.sigma);
  if (m.lyapunov) {
    const LyapunovSpec& l = *m.lyapunov;
    json j = json::object();
    if (l.beta) j["beta"] = *l.beta;
    if (l.sequence) {
      j["sequence"] = *l.sequence;
      j["limit"] = l.limit;
      j["monotone_from"] = l.monotone_from;
    }
    if (l.exponent) j["exponent"] = *l.exponent;
    if (l.r0) j["r0"] = *l.r0;
    if (l.tag) j["tag"] = *l.tag;
    doc["lyapunov"] = j;
  }
  if (m.two_function) doc["two_function"] = {{"beta", m.two_function->beta}, {"h_limit", m.two_function->h_limit}};
  if (!m.partitions.empty()) {
    json parts = json::array();
    for (const auto& p : m.partitions) {
      if (p.blocks) {
        parts.push_back({{"blocks", *p.blocks}});
      } else {
        parts.push_back({{"cutpoints", *p.cutpoints}});
      }
    }
    doc["partitions"] = parts;
  }
  doc["boundary"] = m.boundary;
  doc["matrix_test"] = m.matrix_test;
  if (m.radial) doc["radial"] = {{"grid", m.radial->grid}, {"radii", m.radial->radii}};
  return doc;
}

std::string dump_model(const ModelFile& m) { return to_json(m).dump(2) + "\n"; }

}  // namespace regime
