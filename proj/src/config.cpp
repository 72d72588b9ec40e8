#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <variant>

#include "psc/experiment.hpp"

namespace psc {

namespace {

using Value = std::variant<std::string, double, bool>;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

Value parse_value(const std::string& text, int lineno) {
  const auto where = " on line " + std::to_string(lineno);
  if (text.empty()) throw ConfigError("missing value" + where);
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"' || text.find('"', 1) != text.size() - 1)
      throw ConfigError("unterminated string" + where);
    return text.substr(1, text.size() - 2);
  }
  if (text == "true") return true;
  if (text == "false") return false;
  std::string cleaned = text;
  cleaned.erase(std::remove(cleaned.begin(), cleaned.end(), '_'), cleaned.end());
  char* end = nullptr;
  const double v = std::strtod(cleaned.c_str(), &end);
  if (end == cleaned.c_str() || *end != '\0' || !std::isfinite(v))
    throw ConfigError("cannot parse value '" + text + "'" + where);
  return v;
}

std::string as_string(const Value& v, const std::string& key) {
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("'" + key + "' must be a string");
}

double as_number(const Value& v, const std::string& key) {
  if (const auto* d = std::get_if<double>(&v)) return *d;
  throw ConfigError("'" + key + "' must be a number");
}

long as_integer(const Value& v, const std::string& key) {
  const double d = as_number(v, key);
  if (d != std::floor(d) || std::abs(d) > 9e15) throw ConfigError("'" + key + "' must be an integer");
  return static_cast<long>(d);
}

bool as_bool(const Value& v, const std::string& key) {
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("'" + key + "' must be true or false");
}

using Setter = std::function<void(RunConfig&, const Value&, const std::string&)>;

const std::map<std::string, Setter>& setters() {
  static const std::map<std::string, Setter> table = {
      {"grid.dim", [](RunConfig& c, const Value& v, const std::string& k) { c.dim = int(as_integer(v, k)); }},
      {"grid.n_cells", [](RunConfig& c, const Value& v, const std::string& k) { c.n_cells = int(as_integer(v, k)); }},
      {"metric.family", [](RunConfig& c, const Value& v, const std::string& k) { c.family = as_string(v, k); }},
      {"metric.potential", [](RunConfig& c, const Value& v, const std::string& k) { c.potential = as_string(v, k); }},
      {"f.spec", [](RunConfig& c, const Value& v, const std::string& k) { c.f = as_string(v, k); }},
      {"u0.spec", [](RunConfig& c, const Value& v, const std::string& k) { c.u0 = as_string(v, k); }},
      {"integrator.scheme", [](RunConfig& c, const Value& v, const std::string& k) { c.scheme = as_string(v, k); }},
      {"integrator.dt", [](RunConfig& c, const Value& v, const std::string& k) { c.dt = as_string(v, k); }},
      {"integrator.horizon", [](RunConfig& c, const Value& v, const std::string& k) { c.horizon = as_number(v, k); }},
      {"integrator.stop_tol", [](RunConfig& c, const Value& v, const std::string& k) { c.stop_tol = as_number(v, k); }},
      {"integrator.renormalize",
       [](RunConfig& c, const Value& v, const std::string& k) { c.renormalize = as_string(v, k); }},
      {"output.cadence", [](RunConfig& c, const Value& v, const std::string& k) { c.cadence = int(as_integer(v, k)); }},
      {"output.u_ref", [](RunConfig& c, const Value& v, const std::string& k) { c.u_ref = as_string(v, k); }},
      {"output.seed",
       [](RunConfig& c, const Value& v, const std::string& k) {
         const long s = as_integer(v, k);
         if (s < 0) throw ConfigError("'seed' must be nonnegative");
         c.seed = static_cast<std::uint64_t>(s);
       }},
      {"output.dir", [](RunConfig& c, const Value& v, const std::string& k) { c.dir = as_string(v, k); }},
      {"output.energy_log", [](RunConfig& c, const Value& v, const std::string& k) { c.energy_log = as_bool(v, k); }},
  };
  return table;
}

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

std::string number(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  std::string s = os.str();
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

}  // namespace

RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  std::istringstream in(text);
  std::string line, section;
  std::set<std::string> seen;
  static const std::set<std::string> sections = {"grid", "metric", "f", "u0", "integrator", "output"};
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("malformed section header on line " + std::to_string(lineno));
      section = trim(line.substr(1, line.size() - 2));
      if (!sections.count(section)) throw ConfigError("unknown section [" + section + "]");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key = value on line " + std::to_string(lineno));
    if (section.empty()) throw ConfigError("key outside a section on line " + std::to_string(lineno));
    const std::string key = section + "." + trim(line.substr(0, eq));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError("duplicate key '" + key + "'");
    it->second(c, parse_value(trim(line.substr(eq + 1)), lineno), key);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const std::string text = buf.str();
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("malformed JSON config: ") + e.what());
    }
    return RunConfig::from_json(j.contains("config") ? j["config"] : j);
  }
  return parse_config_text(text);
}

nlohmann::json RunConfig::to_json() const {
  return {{"grid", {{"dim", dim}, {"n_cells", n_cells}}},
          {"metric", {{"family", family}, {"potential", potential}}},
          {"f", {{"spec", f}}},
          {"u0", {{"spec", u0}}},
          {"integrator",
           {{"scheme", scheme}, {"dt", dt}, {"horizon", horizon}, {"stop_tol", stop_tol}, {"renormalize", renormalize}}},
          {"output",
           {{"cadence", cadence}, {"u_ref", u_ref}, {"seed", seed}, {"dir", dir}, {"energy_log", energy_log}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  for (const auto& [section, body] : j.items()) {
    if (!body.is_object()) throw ConfigError("section '" + section + "' must be an object");
    for (const auto& [name, value] : body.items()) {
      const std::string key = section + "." + name;
      const auto it = setters().find(key);
      if (it == setters().end()) throw ConfigError("unknown key '" + key + "'");
      Value v;
      if (value.is_string())
        v = value.get<std::string>();
      else if (value.is_boolean())
        v = value.get<bool>();
      else if (value.is_number())
        v = value.get<double>();
      else
        throw ConfigError("unsupported value for '" + key + "'");
      it->second(c, v, key);
    }
  }
  c.validate();
  return c;
}

std::string RunConfig::to_toml() const {
  std::ostringstream os;
  os << "[grid]\ndim = " << dim << "\nn_cells = " << n_cells << "\n\n";
  os << "[metric]\nfamily = " << quoted(family) << "\npotential = " << quoted(potential) << "\n\n";
  os << "[f]\nspec = " << quoted(f) << "\n\n";
  os << "[u0]\nspec = " << quoted(u0) << "\n\n";
  os << "[integrator]\nscheme = " << quoted(scheme) << "\ndt = " << quoted(dt) << "\nhorizon = " << number(horizon)
     << "\nstop_tol = " << number(stop_tol) << "\nrenormalize = " << quoted(renormalize) << "\n\n";
  os << "[output]\ncadence = " << cadence << "\nu_ref = " << quoted(u_ref) << "\nseed = " << seed
     << "\ndir = " << quoted(dir) << "\nenergy_log = " << (energy_log ? "true" : "false") << "\n";
  return os.str();
}

void RunConfig::validate() const {
  if (dim < 3) throw ConfigError("grid.dim must be at least 3");
  if (n_cells < 8) throw ConfigError("grid.n_cells must be at least 8");
  parse_metric_family(family);
  parse_potential(potential);
  parse_f_spec(f);
  parse_scheme(scheme);
  parse_dt_policy(dt);
  parse_renormalize(renormalize);
  if (!(horizon > 0)) throw ConfigError("integrator.horizon must be positive");
  if (!(stop_tol >= 0)) throw ConfigError("integrator.stop_tol must be nonnegative");
  if (cadence < 1) throw ConfigError("output.cadence must be at least 1");
  if (u_ref != "one" && u_ref != "final") throw ConfigError("output.u_ref must be \"one\" or \"final\"");
  if (dir.empty()) throw ConfigError("output.dir must not be empty");

  // u0 tag syntax; values that depend on the metric are checked in build_u0.
  const auto colon = u0.find(':');
  const std::string kind = u0.substr(0, colon);
  const std::string rest = colon == std::string::npos ? "" : u0.substr(colon + 1);
  if (kind == "mode") {
    const auto c2 = rest.find(':');
    if (c2 == std::string::npos) throw ConfigError("u0 mode needs mode:<l>:<amplitude>");
    const double l = detail::parse_number(rest.substr(0, c2), "mode index");
    if (l < 0 || l != std::floor(l)) throw ConfigError("mode index must be a nonnegative integer");
    detail::parse_number(rest.substr(c2 + 1), "u0 amplitude");
  } else if (kind == "const") {
    if (!(detail::parse_number(rest, "u0 constant") > 0)) throw ConfigError("u0 constant must be positive");
  } else if (kind == "cos" || kind == "kernel" || kind == "random") {
    detail::parse_number(rest, "u0 amplitude");
  } else {
    throw ConfigError("unknown u0 spec '" + u0 + "'");
  }
}

}  // namespace psc
