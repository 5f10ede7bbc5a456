#include "kdnsim/scenario_file.hpp"

#include <openssl/evp.h>

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <variant>

#include "kdnsim/errors.hpp"

namespace kdnsim {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("sha256 failed");
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

namespace {

struct Value {
  std::variant<std::int64_t, double, std::string, bool, std::vector<double>> v;
  int line = 0;

  const char* type_name() const {
    switch (v.index()) {
      case 0: return "integer";
      case 1: return "real";
      case 2: return "string";
      case 3: return "boolean";
      default: return "array";
    }
  }
};

struct Table {
  std::string name;
  int line = 0;
  std::vector<std::pair<std::string, Value>> entries;
};

std::string trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

bool valid_key(const std::string& k) {
  if (k.empty()) return false;
  for (char c : k)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.')) return false;
  return true;
}

std::optional<double> parse_number(const std::string& tok, bool& is_integer) {
  if (tok.empty()) return std::nullopt;
  std::size_t i = (tok[0] == '+' || tok[0] == '-') ? 1 : 0;
  is_integer = i < tok.size();
  for (std::size_t j = i; j < tok.size(); ++j)
    if (!std::isdigit(static_cast<unsigned char>(tok[j]))) is_integer = false;
  char* end = nullptr;
  const double d = std::strtod(tok.c_str(), &end);
  if (end != tok.c_str() + tok.size() || !std::isfinite(d)) return std::nullopt;
  // Reject strtod extensions such as hex floats and "nan"/"inf".
  for (char c : tok)
    if (!(std::isdigit(static_cast<unsigned char>(c)) || c == '+' || c == '-' || c == '.' || c == 'e' || c == 'E'))
      return std::nullopt;
  return d;
}

Value parse_value(const std::string& raw, const std::string& key, int line) {
  const std::string s = trim(raw);
  Value out;
  out.line = line;
  if (s.empty()) throw ConfigError(key, line, "missing value");
  if (s.front() == '"') {
    if (s.size() < 2 || s.back() != '"' || s.find('"', 1) != s.size() - 1)
      throw ConfigError(key, line, "unterminated or malformed string");
    out.v = s.substr(1, s.size() - 2);
    return out;
  }
  if (s == "true" || s == "false") {
    out.v = (s == "true");
    return out;
  }
  if (s.front() == '[') {
    if (s.back() != ']') throw ConfigError(key, line, "unterminated array");
    std::vector<double> arr;
    const std::string inner = trim(std::string_view(s).substr(1, s.size() - 2));
    if (!inner.empty()) {
      std::stringstream ss(inner);
      std::string item;
      while (std::getline(ss, item, ',')) {
        bool is_int = false;
        const std::string t = trim(item);
        if (t.empty() && ss.eof()) break;  // trailing comma
        auto d = parse_number(t, is_int);
        if (!d) throw ConfigError(key, line, "array elements must be numbers, got '" + t + "'");
        arr.push_back(*d);
      }
    }
    out.v = std::move(arr);
    return out;
  }
  bool is_int = false;
  auto d = parse_number(s, is_int);
  if (!d) throw ConfigError(key, line, "cannot parse value '" + s + "'");
  if (is_int) {
    errno = 0;
    const long long i = std::strtoll(s.c_str(), nullptr, 10);
    if (errno == ERANGE) throw ConfigError(key, line, "integer out of range");
    out.v = static_cast<std::int64_t>(i);
  } else {
    out.v = *d;
  }
  return out;
}

std::vector<Table> tokenize(std::string_view text) {
  std::vector<Table> tables;
  tables.push_back({"", 0, {}});
  std::set<std::string> seen_sections;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    const std::string s = trim(strip_comment(raw));
    if (s.empty()) continue;
    if (s.front() == '[') {
      const bool array_table = s.rfind("[[", 0) == 0;
      const std::size_t open = array_table ? 2 : 1;
      const std::string close = array_table ? "]]" : "]";
      if (s.size() < open + close.size() || s.compare(s.size() - close.size(), close.size(), close) != 0)
        throw ConfigError("", line, "malformed section header '" + s + "'");
      const std::string name = trim(std::string_view(s).substr(open, s.size() - open - close.size()));
      if (!valid_key(name)) throw ConfigError(name, line, "invalid section name");
      if (array_table) {
        if (name != "station") throw ConfigError(name, line, "unknown array section (only [[station]])");
        tables.push_back({"station", line, {}});
      } else {
        if (!seen_sections.insert(name).second) throw ConfigError(name, line, "duplicate section");
        tables.push_back({name, line, {}});
      }
      continue;
    }
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw ConfigError("", line, "expected 'key = value'");
    const std::string key = trim(std::string_view(s).substr(0, eq));
    if (!valid_key(key)) throw ConfigError(key, line, "invalid key");
    auto& entries = tables.back().entries;
    for (const auto& [k, v] : entries)
      if (k == key) throw ConfigError(key, line, "duplicate key (first set on line " + std::to_string(v.line) + ")");
    entries.emplace_back(key, parse_value(s.substr(eq + 1), key, line));
  }
  return tables;
}

std::string qualified(const std::string& section, const std::string& key) {
  return section.empty() ? key : section + "." + key;
}

/// Typed accessors that raise ConfigError with the qualified key and line.
struct Field {
  std::string key;
  const Value& value;

  [[noreturn]] void mismatch(const char* expected) const {
    throw ConfigError(key, value.line,
                      std::string("expected ") + expected + ", got " + value.type_name());
  }

  double real() const {
    if (auto p = std::get_if<double>(&value.v)) return *p;
    if (auto p = std::get_if<std::int64_t>(&value.v)) return static_cast<double>(*p);
    mismatch("a number");
  }
  std::int64_t integer() const {
    if (auto p = std::get_if<std::int64_t>(&value.v)) return *p;
    mismatch("an integer");
  }
  int int32() const {
    const auto i = integer();
    if (i < std::numeric_limits<int>::min() || i > std::numeric_limits<int>::max())
      throw ConfigError(key, value.line, "integer out of range");
    return static_cast<int>(i);
  }
  const std::string& string() const {
    if (auto p = std::get_if<std::string>(&value.v)) return *p;
    mismatch("a string");
  }
  const std::vector<double>& array() const {
    if (auto p = std::get_if<std::vector<double>>(&value.v)) return *p;
    mismatch("an array of numbers");
  }
  [[noreturn]] void constraint(const std::string& what) const {
    throw ConfigError(key, value.line, "constraint violated: " + what);
  }
};

using Setter = std::function<void(const Field&)>;

void apply_table(const Table& table, const std::map<std::string, Setter>& setters) {
  for (const auto& [key, value] : table.entries) {
    const auto it = setters.find(key);
    const std::string qkey = qualified(table.name, key);
    if (it == setters.end()) throw ConfigError(qkey, value.line, "unknown key");
    it->second(Field{qkey, value});
  }
}

/// Runs a validate() overload, reattributing its message to a key/line.
template <typename F>
void check(const std::string& key, int line, F&& f) {
  try {
    f();
  } catch (const InvalidParameter& e) {
    throw ConfigError(key, line, std::string("constraint violated: ") + e.what());
  }
}

const Value* find(const Table& t, const std::string& key) {
  for (const auto& [k, v] : t.entries)
    if (k == key) return &v;
  return nullptr;
}

BaseStation parse_station(const Table& t, int id) {
  const std::string prefix = "station[" + std::to_string(id) + "]";
  const Value* kind_v = find(t, "kind");
  if (!kind_v) throw ConfigError(prefix + ".kind", t.line, "missing required key");
  const Field kind_f{prefix + ".kind", *kind_v};
  const std::string kind = kind_f.string();
  BaseStation bs;
  if (kind == "macro")
    bs = make_macro(id, Vec2::Zero());
  else if (kind == "ap")
    bs = make_access_point(id, Vec2::Zero());
  else
    throw ConfigError(kind_f.key, kind_v->line, "expected \"macro\" or \"ap\", got \"" + kind + "\"");

  bool has_x = false;
  bool has_y = false;
  for (const auto& [key, value] : t.entries) {
    const Field f{prefix + "." + key, value};
    if (key == "kind") continue;
    if (key == "x_m") {
      bs.position.x() = f.real();
      has_x = true;
    } else if (key == "y_m") {
      bs.position.y() = f.real();
      has_y = true;
    } else if (key == "carrier_hz") {
      bs.carrier_frequency_hz = f.real();
    } else if (key == "bandwidth_hz") {
      bs.bandwidth_hz = f.real();
    } else if (key == "power_levels_dbm") {
      bs.power_levels_dbm = f.array();
    } else if (key == "base_latency_ms") {
      bs.base_latency_ms = f.real();
    } else if (key == "capacity_ue") {
      bs.capacity_ue = f.int32();
    } else {
      throw ConfigError(f.key, value.line, "unknown key");
    }
  }
  if (!has_x || !has_y) throw ConfigError(prefix, t.line, "x_m and y_m are required");
  if (!bs.power_levels_dbm.empty()) bs.tx_power_dbm = middle_power(bs);
  check(prefix, t.line, [&] { validate(bs); });
  return bs;
}

}  // namespace

ParsedScenario parse_scenario_text(std::string_view text) {
  const auto tables = tokenize(text);
  Scenario sc = default_scenario();
  std::map<std::string, int> section_line;
  std::vector<BaseStation> stations;

  for (const auto& table : tables) {
    section_line[table.name] = table.line;
    if (table.name.empty()) {
      apply_table(table, {
          {"format_version", [](const Field& f) {
             if (f.integer() != kScenarioFormatVersion)
               f.constraint("format_version must be " + std::to_string(kScenarioFormatVersion));
           }},
          {"seed", [&](const Field& f) {
             const auto s = f.integer();
             if (s < 0) f.constraint("seed ≥ 0");
             sc.seed = static_cast<std::uint64_t>(s);
           }},
          {"ue_count", [&](const Field& f) {
             const int n = f.int32();
             if (n < 1) f.constraint("ue_count ≥ 1");
             sc.ue_count = n;
           }},
          {"policy", [&](const Field& f) {
             try {
               sc.policy = policy_from_string(f.string());
             } catch (const InvalidParameter& e) {
               f.constraint(e.what());
             }
           }},
      });
    } else if (table.name == "area") {
      apply_table(table, {
          {"width_m", [&](const Field& f) { sc.mobility.area.width_m = f.real(); }},
          {"height_m", [&](const Field& f) { sc.mobility.area.height_m = f.real(); }},
      });
    } else if (table.name == "traffic") {
      apply_table(table, {
          {"demand_bps", [&](const Field& f) {
             sc.traffic.demand_min_bps = sc.traffic.demand_max_bps = f.real();
           }},
          {"demand_min_bps", [&](const Field& f) { sc.traffic.demand_min_bps = f.real(); }},
          {"demand_max_bps", [&](const Field& f) { sc.traffic.demand_max_bps = f.real(); }},
      });
    } else if (table.name == "mobility") {
      auto& m = sc.mobility;
      apply_table(table, {
          {"speed_min_mps", [&](const Field& f) { m.speed_min_mps = f.real(); }},
          {"speed_max_mps", [&](const Field& f) { m.speed_max_mps = f.real(); }},
          {"pause_max_s", [&](const Field& f) { m.pause_max_s = f.real(); }},
          {"tick_duration_s", [&](const Field& f) { m.tick_duration_s = f.real(); }},
      });
    } else if (table.name == "radio") {
      auto& r = sc.radio;
      apply_table(table, {
          {"noise_dbm", [&](const Field& f) { r.noise_dbm = f.real(); }},
          {"thz_absorption_db_per_m", [&](const Field& f) { r.thz_absorption_db_per_m = f.real(); }},
          {"thz_threshold_hz", [&](const Field& f) { r.thz_threshold_hz = f.real(); }},
          {"d_min_m", [&](const Field& f) { r.d_min_m = f.real(); }},
          {"sinr_cap_db", [&](const Field& f) { r.sinr_cap_db = f.real(); }},
          {"k_q", [&](const Field& f) { r.k_q = f.real(); }},
          {"u_cap", [&](const Field& f) { r.u_cap = f.real(); }},
          {"eps_u", [&](const Field& f) { r.eps_u = f.real(); }},
          {"k_over", [&](const Field& f) { r.k_over = f.real(); }},
          {"k_rf", [&](const Field& f) { r.k_rf = f.real(); }},
          {"sinr_floor_db", [&](const Field& f) { r.sinr_floor_db = f.real(); }},
          {"s_w_db", [&](const Field& f) { r.s_w_db = f.real(); }},
      });
    } else if (table.name == "reward") {
      auto& r = sc.reward;
      apply_table(table, {
          {"latency_sla_ms", [&](const Field& f) { r.latency_sla_ms = f.real(); }},
          {"loss_sla", [&](const Field& f) { r.loss_sla = f.real(); }},
          {"throughput_sla_bps", [&](const Field& f) { r.throughput_sla_bps = f.real(); }},
          {"imbalance_weight", [&](const Field& f) { r.imbalance_weight = f.real(); }},
      });
    } else if (table.name == "learning") {
      auto& h = sc.hyper;
      apply_table(table, {
          {"alpha", [&](const Field& f) { h.alpha = f.real(); }},
          {"gamma", [&](const Field& f) { h.gamma = f.real(); }},
          {"epsilon0", [&](const Field& f) { h.epsilon0 = f.real(); }},
          {"epsilon_min", [&](const Field& f) { h.epsilon_min = f.real(); }},
          {"epsilon_decay", [&](const Field& f) { h.epsilon_decay = f.real(); }},
          {"episodes", [&](const Field& f) { h.episodes = f.int32(); }},
          {"ticks_per_episode", [&](const Field& f) { h.ticks_per_episode = f.int32(); }},
      });
    } else if (table.name == "bins") {
      std::map<std::string, Setter> setters;
      for (std::size_t i = 0; i < kFeatureCount; ++i)
        setters[std::string(kFeatureNames[i])] = [&sc, i](const Field& f) {
          sc.bins.boundaries[i] = f.array();
        };
      apply_table(table, setters);
    } else if (table.name == "station") {
      stations.push_back(parse_station(table, static_cast<int>(stations.size())));
    } else {
      throw ConfigError(table.name, table.line, "unknown section");
    }
  }

  if (!stations.empty())
    sc.stations = std::move(stations);
  else
    sc.stations = default_stations(sc.mobility.area);

  check("mobility", section_line.count("mobility") ? section_line["mobility"] : section_line["area"],
        [&] { validate(sc.mobility); });
  check("traffic", section_line["traffic"], [&] {
    if (!(sc.traffic.demand_min_bps > 0.0 && sc.traffic.demand_min_bps <= sc.traffic.demand_max_bps))
      throw InvalidParameter("0 < demand_min_bps ≤ demand_max_bps");
  });
  check("radio", section_line["radio"], [&] { validate(sc.radio); });
  check("reward", section_line["reward"], [&] { validate(sc.reward); });
  check("learning", section_line["learning"], [&] { validate(sc.hyper); });
  check("bins", section_line["bins"], [&] { validate(sc.bins); });
  check("", 0, [&] { validate(sc); });

  return {std::move(sc), sha256_hex(text)};
}

ParsedScenario parse_scenario(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open scenario '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_scenario_text(buf.str());
}

}  // namespace kdnsim
