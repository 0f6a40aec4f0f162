#include "dcflex/config.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace dcflex {

namespace {

struct Entry {
  std::string section, key, value;
  std::string origin;
  int line = 0;
};

[[noreturn]] void fail(const Entry& e, const std::string& msg) {
  std::ostringstream os;
  os << e.origin << ":" << e.line << ": [" << e.section << "] " << e.key
     << ": " << msg;
  throw std::runtime_error(os.str());
}

[[noreturn]] void fail_line(const std::string& origin, int line,
                            const std::string& msg) {
  std::ostringstream os;
  os << origin << ":" << line << ": " << msg;
  throw std::runtime_error(os.str());
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    std::size_t p = s.find(sep, start);
    if (p == std::string::npos) {
      out.push_back(trim(s.substr(start)));
      return out;
    }
    out.push_back(trim(s.substr(start, p - start)));
    start = p + 1;
  }
}

std::vector<Entry> lex(const std::string& text, const std::string& origin) {
  std::vector<Entry> out;
  std::istringstream in(text);
  std::string raw, section;
  int lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    if (line.front() == '[') {
      if (line.back() != ']')
        fail_line(origin, lineno, "malformed section header '" + line + "'");
      section = trim(line.substr(1, line.size() - 2));
      if (section.empty()) fail_line(origin, lineno, "empty section name");
      continue;
    }
    std::size_t eq = line.find('=');
    if (eq == std::string::npos)
      fail_line(origin, lineno, "expected 'key = value', got '" + line + "'");
    if (section.empty())
      fail_line(origin, lineno, "entry before any [section] header");
    Entry e;
    e.section = section;
    e.key = trim(line.substr(0, eq));
    e.value = trim(line.substr(eq + 1));
    e.origin = origin;
    e.line = lineno;
    if (e.key.empty()) fail_line(origin, lineno, "empty key");
    if (e.value.empty()) fail(e, "empty value");
    out.push_back(std::move(e));
  }
  return out;
}

Entry parse_override(const std::string& spec) {
  std::size_t eq = spec.find('=');
  if (eq == std::string::npos)
    throw std::runtime_error("--set '" + spec +
                             "': expected section.key=value");
  std::string path = trim(spec.substr(0, eq));
  std::size_t dot = path.find('.');
  if (dot == std::string::npos)
    throw std::runtime_error("--set '" + spec +
                             "': key must be qualified as section.key");
  Entry e;
  e.section = trim(path.substr(0, dot));
  e.key = trim(path.substr(dot + 1));
  e.value = trim(spec.substr(eq + 1));
  e.origin = "--set";
  e.line = 0;
  if (e.section.empty() || e.key.empty() || e.value.empty())
    throw std::runtime_error("--set '" + spec + "': empty section, key, or value");
  return e;
}

double parse_number(const std::string& tok, const Entry& e) {
  errno = 0;
  char* end = nullptr;
  double v = std::strtod(tok.c_str(), &end);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE || !std::isfinite(v))
    fail(e, "'" + tok + "' is not a finite number");
  return v;
}

long long parse_int(const std::string& tok, const Entry& e) {
  errno = 0;
  char* end = nullptr;
  long long v = std::strtoll(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    fail(e, "'" + tok + "' is not an integer");
  return v;
}

std::uint64_t parse_u64(const std::string& tok, const Entry& e) {
  if (!tok.empty() && tok[0] == '-') fail(e, "'" + tok + "' must be non-negative");
  errno = 0;
  char* end = nullptr;
  unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
  if (end == tok.c_str() || *end != '\0' || errno == ERANGE)
    fail(e, "'" + tok + "' is not an unsigned integer");
  return static_cast<std::uint64_t>(v);
}

bool parse_bool(const std::string& tok, const Entry& e) {
  if (tok == "true" || tok == "on" || tok == "1") return true;
  if (tok == "false" || tok == "off" || tok == "0") return false;
  fail(e, "'" + tok + "' is not a boolean (true/false/on/off/1/0)");
}

enum class Dim { none, resistance, inductance, capacitance, current, voltage };

const std::map<std::string, double>& unit_table(Dim d) {
  static const std::map<std::string, double> resistance{{"ohm", 1.0},
                                                        {"mohm", 1e-3}};
  static const std::map<std::string, double> inductance{
      {"H", 1.0}, {"mH", 1e-3}, {"uH", 1e-6}};
  static const std::map<std::string, double> capacitance{
      {"F", 1.0}, {"mF", 1e-3}, {"uF", 1e-6}};
  static const std::map<std::string, double> current{{"A", 1.0}};
  static const std::map<std::string, double> voltage{{"V", 1.0}};
  switch (d) {
    case Dim::resistance: return resistance;
    case Dim::inductance: return inductance;
    case Dim::capacitance: return capacitance;
    case Dim::current: return current;
    default: return voltage;
  }
}

std::string unit_hint(Dim d) {
  switch (d) {
    case Dim::resistance: return "ohm or mohm";
    case Dim::inductance: return "H, mH, or uH";
    case Dim::capacitance: return "F, mF, or uF";
    case Dim::current: return "A";
    default: return "V";
  }
}

// "1.5 mohm" -> 1.5e-3; the unit is mandatory for dimensioned keys and
// forbidden for dimensionless ones
double parse_quantity(const std::string& tok, Dim d, const Entry& e) {
  std::istringstream is(tok);
  std::string num, unit, extra;
  is >> num >> unit >> extra;
  if (!extra.empty()) fail(e, "trailing text after '" + num + " " + unit + "'");
  if (d == Dim::none) {
    if (!unit.empty()) fail(e, "dimensionless key takes no unit, got '" + unit + "'");
    return parse_number(num, e);
  }
  if (unit.empty())
    fail(e, "missing unit on '" + num + "' (expected " + unit_hint(d) + ")");
  const auto& table = unit_table(d);
  auto it = table.find(unit);
  if (it == table.end())
    fail(e, "unknown unit '" + unit + "' (expected " + unit_hint(d) + ")");
  return parse_number(num, e) * it->second;
}

double parse_scalar(const Entry& e, Dim d = Dim::none) {
  return parse_quantity(e.value, d, e);
}

std::vector<double> parse_values(const Entry& e, Dim d) {
  std::vector<double> out;
  for (const auto& item : split(e.value, ','))
    out.push_back(parse_quantity(item, d, e));
  return out;
}

RangeSpec parse_range(const Entry& e, Dim d) {
  std::size_t p = e.value.find("..");
  if (p == std::string::npos)
    fail(e, "expected a range 'lo unit .. hi unit'");
  RangeSpec r;
  r.lo = parse_quantity(trim(e.value.substr(0, p)), d, e);
  r.hi = parse_quantity(trim(e.value.substr(p + 2)), d, e);
  if (!(r.lo <= r.hi)) fail(e, "range lower bound exceeds upper bound");
  return r;
}

std::vector<std::pair<int, int>> parse_edges(const Entry& e) {
  std::vector<std::pair<int, int>> out;
  for (const auto& item : split(e.value, ',')) {
    std::size_t dash = item.find('-');
    if (dash == std::string::npos || dash == 0)
      fail(e, "edge '" + item + "' must look like '0-1'");
    Entry tmp = e;
    int a = static_cast<int>(parse_int(trim(item.substr(0, dash)), tmp));
    int b = static_cast<int>(parse_int(trim(item.substr(dash + 1)), tmp));
    out.emplace_back(a, b);
  }
  return out;
}

std::vector<int> parse_adopters(const Entry& e) {
  if (e.value == "all") return {};
  std::vector<int> out;
  for (const auto& item : split(e.value, ','))
    out.push_back(static_cast<int>(parse_int(item, e)));
  return out;
}

void apply_entry(ScenarioConfig& cfg, const Entry& e) {
  const std::string& s = e.section;
  const std::string& k = e.key;
  if (s == "grid") {
    if (k == "nodes") cfg.nodes = static_cast<int>(parse_int(e.value, e));
    else if (k == "topology") {
      if (e.value != "ring" && e.value != "edges")
        fail(e, "topology must be 'ring' or 'edges'");
      cfg.topology = e.value;
    } else if (k == "edges") cfg.edges = parse_edges(e);
    else if (k == "seed") cfg.seed = parse_u64(e.value, e);
    else fail(e, "unknown key");
  } else if (s == "ranges") {
    if (k == "R_s") cfg.R_s = parse_range(e, Dim::resistance);
    else if (k == "L_s") cfg.L_s = parse_range(e, Dim::inductance);
    else if (k == "C") cfg.C = parse_range(e, Dim::capacitance);
    else if (k == "I_l") cfg.I_l = parse_range(e, Dim::current);
    else if (k == "R_line") cfg.R_line = parse_range(e, Dim::resistance);
    else if (k == "L_line") cfg.L_line = parse_range(e, Dim::inductance);
    else fail(e, "unknown key");
  } else if (s == "node") {
    if (k == "R_s") cfg.R_s_lit = parse_values(e, Dim::resistance);
    else if (k == "L_s") cfg.L_s_lit = parse_values(e, Dim::inductance);
    else if (k == "C") cfg.C_lit = parse_values(e, Dim::capacitance);
    else if (k == "I_l") cfg.I_l_lit = parse_values(e, Dim::current);
    else if (k == "V_d") cfg.V_d = parse_values(e, Dim::voltage);
    else if (k == "V_min") cfg.V_min = parse_values(e, Dim::voltage);
    else if (k == "V_max") cfg.V_max = parse_values(e, Dim::voltage);
    else if (k == "pi_c") cfg.pi_c = parse_values(e, Dim::none);
    else fail(e, "unknown key");
  } else if (s == "lines") {
    if (k == "R_line") cfg.R_line_lit = parse_values(e, Dim::resistance);
    else if (k == "L_line") cfg.L_line_lit = parse_values(e, Dim::inductance);
    else fail(e, "unknown key");
  } else if (s == "weights") {
    if (k == "alpha") cfg.gains.weights.alpha = parse_scalar(e);
    else if (k == "beta") cfg.gains.weights.beta = parse_scalar(e);
    else if (k == "gamma") cfg.gains.weights.gamma = parse_scalar(e);
    else fail(e, "unknown key");
  } else if (s == "gains") {
    if (k == "tau_s") cfg.gains.tau_s = parse_scalar(e);
    else if (k == "tau_l") cfg.gains.tau_l = parse_scalar(e);
    else if (k == "tau_I") cfg.gains.tau_I = parse_scalar(e);
    else if (k == "tau_V") cfg.gains.tau_V = parse_scalar(e);
    else if (k == "tau_a") cfg.gains.tau_a = parse_scalar(e);
    else if (k == "tau_b") cfg.gains.tau_b = parse_scalar(e);
    else fail(e, "unknown key");
  } else if (s == "constraints") {
    if (k == "clamp_u_l") cfg.constraints.clamp_u_l = parse_bool(e.value, e);
    else if (k == "voltage_band")
      cfg.constraints.voltage_band = parse_bool(e.value, e);
    else if (k == "tau_eta") cfg.constraints.tau_eta = parse_scalar(e);
    else fail(e, "unknown key");
  } else if (s == "flexibility") {
    if (k == "source") {
      if (e.value != "ceiling" && e.value != "profile" && e.value != "explicit")
        fail(e, "source must be 'ceiling', 'profile', or 'explicit'");
      cfg.flex_source = e.value;
    } else if (k == "psi") cfg.psi = parse_scalar(e);
    else if (k == "stv") cfg.stv = parse_scalar(e);
    else if (k == "sev") cfg.sev = parse_scalar(e);
    else if (k == "lambda") cfg.lambda_explicit = parse_scalar(e);
    else if (k == "appliance_table") cfg.appliance_table = e.value;
    else if (k == "spread") cfg.spread = parse_scalar(e);
    else if (k == "adopters") cfg.adopters = parse_adopters(e);
    else fail(e, "unknown key");
  } else if (s == "integration") {
    auto& is = cfg.integration;
    if (k == "method") {
      if (e.value != "modal" && e.value != "rk4")
        fail(e, "method must be 'modal' or 'rk4'");
      is.method = e.value;
    } else if (k == "dt") is.dt = parse_scalar(e);
    else if (k == "dt_max") is.dt_max = parse_scalar(e);
    else if (k == "growth") is.growth = parse_scalar(e);
    else if (k == "horizon") is.horizon = parse_scalar(e);
    else if (k == "tolerance") is.tolerance = parse_scalar(e);
    else if (k == "window") is.window = static_cast<int>(parse_int(e.value, e));
    else if (k == "divergence_norm") is.divergence_norm = parse_scalar(e);
    else fail(e, "unknown key");
  } else if (s == "output") {
    if (k == "stride")
      cfg.integration.stride = static_cast<int>(parse_int(e.value, e));
    else if (k == "supply")
      cfg.integration.accumulate_supply = parse_bool(e.value, e);
    else fail(e, "unknown key");
  } else {
    fail_line(e.origin, e.line, "unknown section [" + s + "]");
  }
}

void check_range(const char* name, const std::optional<RangeSpec>& r,
                 bool allow_zero) {
  if (!r) return;
  double floor = allow_zero ? 0.0 : 1e-300;
  if (!(r->lo >= floor) || !(r->hi >= r->lo)) {
    std::ostringstream os;
    os << "[ranges] " << name << ": bounds must satisfy "
       << (allow_zero ? "0 <= lo <= hi" : "0 < lo <= hi");
    throw std::invalid_argument(os.str());
  }
}

void check_broadcast(const char* name, const std::vector<double>& v, int n) {
  if (v.size() != 1 && v.size() != static_cast<std::size_t>(n)) {
    std::ostringstream os;
    os << "[node] " << name << ": expected 1 or " << n << " values, got "
       << v.size();
    throw std::invalid_argument(os.str());
  }
}

}  // namespace

void ScenarioConfig::validate() const {
  if (nodes < 1) throw std::invalid_argument("[grid] nodes: must be >= 1");
  if (topology == "ring") {
    if (nodes < 3)
      throw std::invalid_argument("[grid] topology: ring needs >= 3 nodes");
  } else if (topology == "edges") {
    if (edges.empty())
      throw std::invalid_argument(
          "[grid] edges: required when topology = edges");
  } else {
    throw std::invalid_argument("[grid] topology: must be 'ring' or 'edges'");
  }

  check_range("R_s", R_s, false);
  check_range("L_s", L_s, false);
  check_range("C", C, false);
  check_range("I_l", I_l, true);
  check_range("R_line", R_line, false);
  check_range("L_line", L_line, false);

  auto need = [&](const char* name, const std::optional<RangeSpec>& r,
                  const std::optional<std::vector<double>>& lit) {
    if (!r && !lit) {
      std::ostringstream os;
      os << name << ": give either a [ranges] entry or a literal";
      throw std::invalid_argument(os.str());
    }
  };
  need("R_s", R_s, R_s_lit);
  need("L_s", L_s, L_s_lit);
  need("C", C, C_lit);
  need("I_l", I_l, I_l_lit);
  need("R_line", R_line, R_line_lit);
  need("L_line", L_line, L_line_lit);

  check_broadcast("V_d", V_d, nodes);
  check_broadcast("V_min", V_min, nodes);
  check_broadcast("V_max", V_max, nodes);
  check_broadcast("pi_c", pi_c, nodes);

  gains.validate();
  if (constraints.voltage_band && !(constraints.tau_eta > 0.0))
    throw std::invalid_argument("[constraints] tau_eta: must be > 0");

  if (!(psi >= 0.0 && psi < 1.0))
    throw std::invalid_argument("[flexibility] psi: must lie in [0, 1)");
  if (flex_source == "explicit" &&
      !(lambda_explicit >= 0.0 && lambda_explicit < 1.0))
    throw std::invalid_argument("[flexibility] lambda: must lie in [0, 1)");
  if (flex_source != "ceiling" && flex_source != "profile" &&
      flex_source != "explicit")
    throw std::invalid_argument("[flexibility] source: unknown value");
  if (!(spread > 0.0 && spread <= 1.0))
    throw std::invalid_argument("[flexibility] spread: must lie in (0, 1]");
  {
    std::set<int> seen;
    for (int a : adopters) {
      if (a < 0 || a >= nodes)
        throw std::invalid_argument(
            "[flexibility] adopters: node index out of range");
      if (!seen.insert(a).second)
        throw std::invalid_argument(
            "[flexibility] adopters: duplicate node index");
    }
  }

  integration.validate();
}

ScenarioConfig default_scenario_config() {
  ScenarioConfig cfg;
  cfg.nodes = 10;
  cfg.topology = "ring";
  cfg.seed = 1;
  cfg.R_s = RangeSpec{1e-3, 2e-3};
  cfg.L_s = RangeSpec{1.8e-3, 3e-3};
  cfg.C = RangeSpec{1.7e-3, 2.5e-3};
  cfg.I_l = RangeSpec{6.0, 14.0};
  cfg.R_line = RangeSpec{50e-3, 100e-3};
  cfg.L_line = RangeSpec{2e-6, 3e-6};
  cfg.gains.weights.alpha = 1e6;
  cfg.gains.weights.beta = 1e-6;
  cfg.gains.weights.gamma = 1.0;
  return cfg;
}

ScenarioConfig load_config_text(const std::string& text,
                                const std::string& origin,
                                const std::vector<std::string>& overrides) {
  std::vector<Entry> entries = lex(text, origin);
  for (const auto& o : overrides) entries.push_back(parse_override(o));
  ScenarioConfig cfg = default_scenario_config();
  {
    std::string stem = origin;
    std::size_t slash = stem.find_last_of("/\\");
    if (slash != std::string::npos) stem = stem.substr(slash + 1);
    std::size_t dot = stem.rfind('.');
    if (dot != std::string::npos && dot > 0) stem = stem.substr(0, dot);
    if (!stem.empty() && stem.front() != '<') cfg.name = stem;
  }
  for (const auto& e : entries) apply_entry(cfg, e);
  cfg.validate();
  return cfg;
}

ScenarioConfig load_config_file(const std::string& path,
                                const std::vector<std::string>& overrides) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": cannot open config file");
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_config_text(buf.str(), path, overrides);
}

}  // namespace dcflex
