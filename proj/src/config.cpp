#include "thermovisco/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

namespace thermovisco {
namespace {

constexpr const char* kProfileFields[] = {"u0", "ut0", "theta0"};
constexpr const char* kProfileKeys[] = {"profile", "mean",  "amplitude", "mode",
                                        "center",  "width", "values",    "file"};

std::vector<std::string> build_keys() {
  std::vector<std::string> keys = {"preset",
                                   "a",
                                   "D",
                                   "gamma.family",
                                   "gamma.A",
                                   "gamma.B",
                                   "gamma.alpha",
                                   "gamma.c",
                                   "gamma.p",
                                   "gamma.xi",
                                   "gamma.values",
                                   "grid.length",
                                   "grid.n_cells",
                                   "time.t_end",
                                   "time.safety",
                                   "time.scheme",
                                   "time.dt_max",
                                   "time.growth_limit",
                                   "blowup.theta_cap",
                                   "blowup.w12_cap",
                                   "blowup.dt_min",
                                   "diagnostics.interval",
                                   "diagnostics.B"};
  for (const char* f : kProfileFields) {
    for (const char* k : kProfileKeys) keys.push_back(std::string(f) + "." + k);
  }
  return keys;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::string unquote(std::string_view s) {
  if (s.size() >= 2 && ((s.front() == '"' && s.back() == '"') ||
                        (s.front() == '\'' && s.back() == '\''))) {
    s = s.substr(1, s.size() - 2);
  }
  return std::string(s);
}

std::string location(const std::string& key, int line) {
  if (line > 0) return "line " + std::to_string(line) + ": " + key;
  if (key.rfind("--", 0) == 0 || key == "preset" || key == "name") return key;
  return "--set " + key;
}

struct Entry {
  std::string value;
  int line = 0;
};

class Entries {
 public:
  void add(const std::string& key, std::string value, int line, bool replace) {
    const auto& keys = config_keys();
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw ConfigError(key, line, "unknown key");
    }
    auto it = map_.find(key);
    if (it != map_.end() && !replace) {
      throw ConfigError(key, line,
                        "duplicate key (first set on line " + std::to_string(it->second.line) + ")");
    }
    map_[key] = {std::move(value), line};
  }

  [[nodiscard]] const Entry* find(const std::string& key) const {
    auto it = map_.find(key);
    return it == map_.end() ? nullptr : &it->second;
  }

  [[nodiscard]] int line_of(const std::string& key) const {
    const Entry* e = find(key);
    return e ? e->line : 0;
  }

  [[nodiscard]] std::optional<double> number(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    auto v = parse_double(e->value);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError(key, e->line, "expected a finite number, got '" + e->value + "'");
    }
    return v;
  }

  [[nodiscard]] std::optional<int> integer(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    int v = 0;
    const char* b = e->value.data();
    const char* end = b + e->value.size();
    auto [p, ec] = std::from_chars(b, end, v);
    if (ec != std::errc() || p != end) {
      throw ConfigError(key, e->line, "expected an integer, got '" + e->value + "'");
    }
    return v;
  }

  [[nodiscard]] std::optional<std::vector<double>> list(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    std::vector<double> out;
    std::string_view rest = e->value;
    while (!rest.empty()) {
      const auto comma = rest.find(',');
      const auto item = trim(rest.substr(0, comma));
      auto v = parse_double(item);
      if (!v || !std::isfinite(*v)) {
        throw ConfigError(key, e->line, "bad list entry '" + std::string(item) + "'");
      }
      out.push_back(*v);
      if (comma == std::string_view::npos) break;
      rest = rest.substr(comma + 1);
    }
    if (out.empty()) throw ConfigError(key, e->line, "empty list");
    return out;
  }

  [[nodiscard]] std::optional<std::string> text(const std::string& key) const {
    const Entry* e = find(key);
    if (!e) return std::nullopt;
    return e->value;
  }

  [[nodiscard]] bool any_with_prefix(const std::string& prefix) const {
    auto it = map_.lower_bound(prefix);
    return it != map_.end() && it->first.compare(0, prefix.size(), prefix) == 0;
  }

 private:
  std::map<std::string, Entry> map_;
};

void positive(const Entries& e, const std::string& key, double& target) {
  if (auto v = e.number(key)) {
    if (!(*v > 0.0)) throw ConfigError(key, e.line_of(key), "must be > 0");
    target = *v;
  }
}

std::vector<double> read_vector_file(const std::string& path, const std::string& key, int line) {
  std::ifstream in(path);
  if (!in) throw ConfigError(key, line, "cannot open '" + path + "'");
  std::vector<double> out;
  std::string row;
  int n = 0;
  while (std::getline(in, row)) {
    ++n;
    const auto t = trim(row);
    if (t.empty() || t.front() == '#') continue;
    auto v = parse_double(t);
    if (!v || !std::isfinite(*v)) {
      throw ConfigError(key, line, "'" + path + "' line " + std::to_string(n) + ": not a number");
    }
    out.push_back(*v);
  }
  return out;
}

void apply_profile(const Entries& e, const std::string& field, FieldProfile& p) {
  const std::string pre = field + ".";
  if (auto kind = e.text(pre + "profile")) {
    try {
      p.kind = profile_kind_from_string(*kind);
    } catch (const std::invalid_argument& ex) {
      throw ConfigError(pre + "profile", e.line_of(pre + "profile"), ex.what());
    }
    if (p.kind != FieldProfile::Kind::Tabulated) p.values.clear();
  }
  if (auto v = e.number(pre + "mean")) p.mean = *v;
  if (auto v = e.number(pre + "amplitude")) p.amplitude = *v;
  if (auto v = e.integer(pre + "mode")) {
    if (*v < 0) throw ConfigError(pre + "mode", e.line_of(pre + "mode"), "must be >= 0");
    p.mode = *v;
  }
  if (e.text(pre + "center") == "auto") {
    p.center = -1.0;
  } else if (auto v = e.number(pre + "center")) {
    if (*v < 0.0) throw ConfigError(pre + "center", e.line_of(pre + "center"), "must be >= 0");
    p.center = *v;
  }
  if (e.text(pre + "width") == "auto") {
    p.width = -1.0;
  } else if (auto v = e.number(pre + "width")) {
    if (!(*v > 0.0)) throw ConfigError(pre + "width", e.line_of(pre + "width"), "must be > 0");
    p.width = *v;
  }
  if (e.find(pre + "values") && e.find(pre + "file")) {
    throw ConfigError(pre + "file", e.line_of(pre + "file"), "give either values or file, not both");
  }
  if (auto v = e.list(pre + "values")) p.values = *v;
  if (auto f = e.text(pre + "file")) p.values = read_vector_file(*f, pre + "file", e.line_of(pre + "file"));
  if ((e.find(pre + "values") || e.find(pre + "file")) && p.kind != FieldProfile::Kind::Tabulated) {
    const std::string key = e.find(pre + "values") ? pre + "values" : pre + "file";
    throw ConfigError(key, e.line_of(key), "only used with profile = tabulated");
  }
}

// Line of the entry a gamma factory complaint is about ("... requires B < A").
std::string gamma_error_key(const Entries& e, const std::string& message) {
  const auto pos = message.find("requires ");
  if (pos != std::string::npos) {
    std::string word;
    for (std::size_t i = pos + 9; i < message.size() && std::isalpha(static_cast<unsigned char>(message[i])); ++i) {
      word += message[i];
    }
    if (word == "matching" || word == "at") word = "xi";
    if (e.find("gamma." + word)) return "gamma." + word;
  }
  if (message.find("knots") != std::string::npos && e.find("gamma.xi")) return "gamma.xi";
  if (message.find("values") != std::string::npos && e.find("gamma.values")) return "gamma.values";
  return "gamma.family";
}

GammaModel apply_gamma(const Entries& e, const GammaModel& base) {
  if (!e.any_with_prefix("gamma.")) return base;
  const std::string family = e.text("gamma.family").value_or(base.family_name());
  const bool same = family == base.family_name();
  auto coeff = [&](const std::string& name, double from_base) {
    if (auto v = e.number("gamma." + name)) return *v;
    if (same) return from_base;
    throw ConfigError("gamma." + name, e.line_of("gamma.family"),
                      "missing coefficient for family " + family);
  };
  const std::vector<std::string> allowed = [&]() -> std::vector<std::string> {
    if (family == "constant") return {"c"};
    if (family == "saturating_exp") return {"A", "B", "alpha"};
    if (family == "logarithmic") return {"A", "B"};
    if (family == "power") return {"c", "p"};
    if (family == "tabulated") return {"xi", "values"};
    throw ConfigError("gamma.family", e.line_of("gamma.family"),
                      "unknown family '" + family +
                          "' (constant, saturating_exp, logarithmic, power, tabulated)");
  }();
  for (const char* k : {"A", "B", "alpha", "c", "p", "xi", "values"}) {
    const std::string key = std::string("gamma.") + k;
    if (e.find(key) && std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError(key, e.line_of(key), "does not apply to family " + family);
    }
  }
  try {
    const auto& v = base.variant();
    if (family == "constant") {
      const auto* b = std::get_if<gamma_family::Constant>(&v);
      return GammaModel::constant(coeff("c", b ? b->c : 0.0));
    }
    if (family == "saturating_exp") {
      const auto* b = std::get_if<gamma_family::SaturatingExp>(&v);
      return GammaModel::saturating_exp(coeff("A", b ? b->A : 0.0), coeff("B", b ? b->B : 0.0),
                                        coeff("alpha", b ? b->alpha : 0.0));
    }
    if (family == "logarithmic") {
      const auto* b = std::get_if<gamma_family::Logarithmic>(&v);
      return GammaModel::logarithmic(coeff("A", b ? b->A : 0.0), coeff("B", b ? b->B : 0.0));
    }
    if (family == "power") {
      const auto* b = std::get_if<gamma_family::Power>(&v);
      return GammaModel::power(coeff("c", b ? b->c : 0.0), coeff("p", b ? b->p : 0.0));
    }
    const auto* b = std::get_if<gamma_family::Tabulated>(&v);
    auto xi = e.list("gamma.xi");
    auto values = e.list("gamma.values");
    if (!xi && !(same && b)) throw ConfigError("gamma.xi", e.line_of("gamma.family"), "missing knots");
    if (!values && !(same && b)) {
      throw ConfigError("gamma.values", e.line_of("gamma.family"), "missing knot values");
    }
    return GammaModel::tabulated(xi ? *xi : b->xi, values ? *values : b->values);
  } catch (const std::invalid_argument& ex) {
    const std::string key = gamma_error_key(e, ex.what());
    throw ConfigError(key, e.line_of(key), ex.what());
  }
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += format_double(v[i]);
  }
  return out;
}

}  // namespace

ConfigError::ConfigError(std::string key, int line, const std::string& message)
    : std::runtime_error(location(key, line) + ": " + message), key_(std::move(key)), line_(line) {}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = build_keys();
  return keys;
}

ParsedConfig parse_config(std::string_view text, const std::vector<std::string>& overrides,
                          const SimulationConfig& base) {
  Entries e;
  int line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    std::string_view line = text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos) {
        throw ConfigError(std::string(line), line_no, "expected 'key = value'");
      }
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty()) throw ConfigError("", line_no, "missing key before '='");
      e.add(key, unquote(trim(line.substr(eq + 1))), line_no, false);
    }
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos) throw ConfigError(o, 0, "expected key=value");
    const std::string key(trim(std::string_view(o).substr(0, eq)));
    e.add(key, unquote(trim(std::string_view(o).substr(eq + 1))), 0, true);
  }

  ParsedConfig out;
  out.preset = e.text("preset");
  SimulationConfig& c = out.config;
  c = base;

  positive(e, "a", c.a);
  positive(e, "D", c.D);

  double length = base.grid.length();
  int n_cells = base.grid.n_cells();
  positive(e, "grid.length", length);
  if (auto n = e.integer("grid.n_cells")) {
    if (*n < Grid::kMinCells) throw ConfigError("grid.n_cells", e.line_of("grid.n_cells"), "must be >= 8");
    n_cells = *n;
  }
  c.grid = Grid(length, n_cells);

  positive(e, "time.t_end", c.t_end);
  if (auto v = e.number("time.safety")) {
    if (!(*v > 0.0 && *v <= 1.0)) throw ConfigError("time.safety", e.line_of("time.safety"), "must lie in (0, 1]");
    c.safety = *v;
  }
  if (auto s = e.text("time.scheme")) {
    if (*s == "rk4") {
      c.scheme = Scheme::RK4;
    } else if (*s == "imex") {
      c.scheme = Scheme::IMEX;
    } else {
      throw ConfigError("time.scheme", e.line_of("time.scheme"), "expected rk4 or imex, got '" + *s + "'");
    }
  }
  positive(e, "time.dt_max", c.dt_max);
  positive(e, "time.growth_limit", c.growth_limit);

  positive(e, "blowup.theta_cap", c.blowup.theta_cap);
  positive(e, "blowup.w12_cap", c.blowup.w12_cap);
  if (e.text("blowup.dt_min") == std::optional<std::string>("auto")) {
    c.blowup.dt_min = -1.0;
  } else {
    positive(e, "blowup.dt_min", c.blowup.dt_min);
  }
  positive(e, "diagnostics.interval", c.diag_interval);
  if (e.text("diagnostics.B") == std::optional<std::string>("auto")) {
    c.B.reset();
  } else if (e.find("diagnostics.B")) {
    double B = 0.0;
    positive(e, "diagnostics.B", B);
    c.B = B;
  }

  c.gamma = apply_gamma(e, base.gamma);

  FieldProfile* profiles[] = {&c.u0, &c.ut0, &c.theta0};
  for (int k = 0; k < 3; ++k) {
    const std::string field = kProfileFields[k];
    apply_profile(e, field, *profiles[k]);
    std::vector<double> sampled;
    try {
      sampled = profiles[k]->sample(c.grid);
    } catch (const std::invalid_argument& ex) {
      std::string key = field + ".profile";
      for (const char* s : {"values", "file", "center", "width", "mode"}) {
        if (e.find(field + "." + s)) key = field + "." + s;
      }
      throw ConfigError(key, e.line_of(key), ex.what());
    }
    if (k == 2) {
      for (const double th : sampled) {
        if (th < 0.0) {
          const std::string key = e.find("theta0.mean") ? "theta0.mean" : "theta0.profile";
          throw ConfigError(key, e.line_of(key), "initial temperature must be >= 0 everywhere");
        }
      }
    }
  }

  try {
    validate(c);
  } catch (const std::invalid_argument& ex) {
    const std::string message = ex.what();
    const std::string key = message.substr(0, message.find(' '));
    throw ConfigError(key, e.line_of(key), message);
  }
  return out;
}

std::string canonical_config(const SimulationConfig& c) {
  std::ostringstream o;
  auto line = [&o](const std::string& key, const std::string& value) {
    o << key << " = " << value << '\n';
  };
  line("a", format_double(c.a));
  line("D", format_double(c.D));
  line("gamma.family", c.gamma.family_name());
  std::visit(
      [&](const auto& g) {
        using T = std::decay_t<decltype(g)>;
        if constexpr (std::is_same_v<T, gamma_family::Constant>) {
          line("gamma.c", format_double(g.c));
        } else if constexpr (std::is_same_v<T, gamma_family::SaturatingExp>) {
          line("gamma.A", format_double(g.A));
          line("gamma.B", format_double(g.B));
          line("gamma.alpha", format_double(g.alpha));
        } else if constexpr (std::is_same_v<T, gamma_family::Logarithmic>) {
          line("gamma.A", format_double(g.A));
          line("gamma.B", format_double(g.B));
        } else if constexpr (std::is_same_v<T, gamma_family::Power>) {
          line("gamma.c", format_double(g.c));
          line("gamma.p", format_double(g.p));
        } else {
          line("gamma.xi", join(g.xi));
          line("gamma.values", join(g.values));
        }
      },
      c.gamma.variant());
  line("grid.length", format_double(c.grid.length()));
  line("grid.n_cells", std::to_string(c.grid.n_cells()));
  line("time.t_end", format_double(c.t_end));
  line("time.safety", format_double(c.safety));
  line("time.scheme", to_string(c.scheme));
  line("time.dt_max", format_double(c.dt_max));
  line("time.growth_limit", format_double(c.growth_limit));
  line("blowup.theta_cap", format_double(c.blowup.theta_cap));
  line("blowup.w12_cap", format_double(c.blowup.w12_cap));
  line("blowup.dt_min", c.blowup.dt_min > 0.0 ? format_double(c.blowup.dt_min) : "auto");
  line("diagnostics.interval", format_double(c.diag_interval));
  line("diagnostics.B", c.B ? format_double(*c.B) : "auto");
  const FieldProfile* profiles[] = {&c.u0, &c.ut0, &c.theta0};
  for (int k = 0; k < 3; ++k) {
    const std::string pre = std::string(kProfileFields[k]) + ".";
    const FieldProfile& p = *profiles[k];
    line(pre + "profile", to_string(p.kind));
    line(pre + "mean", format_double(p.mean));
    line(pre + "amplitude", format_double(p.amplitude));
    line(pre + "mode", std::to_string(p.mode));
    line(pre + "center", p.center < 0.0 ? std::string("auto") : format_double(p.center));
    line(pre + "width", p.width < 0.0 ? std::string("auto") : format_double(p.width));
    if (p.kind == FieldProfile::Kind::Tabulated) line(pre + "values", join(p.values));
  }
  return o.str();
}

std::string stable_hash(std::string_view text) {
  std::uint64_t h = 14695981039346656037ull;
  for (const unsigned char ch : text) {
    h ^= ch;
    h *= 1099511628211ull;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<std::size_t>(i)] = digits[h & 0xF];
    h >>= 4;
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::optional<double> parse_double(std::string_view s) {
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::string format_series(const DiagnosticsSeries& series) {
  std::string out(kSeriesHeader);
  out += '\n';
  for (const auto& row : series.rows) {
    for (std::size_t k = 0; k < kSeriesColumns.size(); ++k) {
      if (k > 0) out += ',';
      out += format_double(column_value(row, k));
    }
    out += '\n';
  }
  return out;
}

DiagnosticsSeries parse_series(std::string_view text) {
  DiagnosticsSeries series;
  std::size_t start = 0;
  int line_no = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    start = end + 1;
    ++line_no;
    if (line_no == 1) {
      if (line != kSeriesHeader) throw std::invalid_argument("series: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    DiagnosticsRow row;
    std::size_t col = 0;
    std::size_t pos = 0;
    while (true) {
      const auto comma = line.find(',', pos);
      const auto field = line.substr(pos, comma == std::string_view::npos ? std::string_view::npos : comma - pos);
      if (col >= kSeriesColumns.size()) {
        throw std::invalid_argument("series line " + std::to_string(line_no) + ": too many columns");
      }
      const auto v = parse_double(field);
      if (!v) {
        throw std::invalid_argument("series line " + std::to_string(line_no) + ": bad number '" +
                                    std::string(field) + "'");
      }
      column_value(row, col++) = *v;
      if (comma == std::string_view::npos) break;
      pos = comma + 1;
    }
    if (col != kSeriesColumns.size()) {
      throw std::invalid_argument("series line " + std::to_string(line_no) + ": too few columns");
    }
    series.rows.push_back(row);
  }
  if (line_no == 0) throw std::invalid_argument("series: missing header");
  return series;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write to '" + path.string() + "' failed");
}

std::string read_text(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void emit_series(const DiagnosticsSeries& series, const std::filesystem::path& path) {
  write_text(path, format_series(series));
}

DiagnosticsSeries read_series(const std::filesystem::path& path) {
  return parse_series(read_text(path));
}

std::string format_plot_data(const DiagnosticsSeries& series) {
  std::string out = "#";
  for (const auto name : kSeriesColumns) {
    out += ' ';
    out += name;
  }
  out += '\n';
  for (const auto& row : series.rows) {
    for (std::size_t k = 0; k < kSeriesColumns.size(); ++k) {
      if (k > 0) out += ' ';
      out += format_double(column_value(row, k));
    }
    out += '\n';
  }
  return out;
}

std::string format_profile_plot(const State& state, const SimulationConfig& config) {
  std::string out = "# x u u_t theta  (t = " + format_double(state.t) + ")\n";
  for (int i = 0; i < config.grid.n_cells(); ++i) {
    const auto k = static_cast<std::size_t>(i);
    out += format_double(config.grid.x(i)) + ' ' + format_double(state.u[k]) + ' ' +
           format_double(state.v[k] - config.a * state.u[k]) + ' ' + format_double(state.theta[k]) +
           '\n';
  }
  return out;
}

std::string format_profile_trace(const std::vector<ProfileSample>& profile) {
  std::string out = "t,theta_min,theta_max,theta_mean,theta_osc\n";
  for (const auto& p : profile) {
    out += format_double(p.t) + ',' + format_double(p.theta_min) + ',' + format_double(p.theta_max) +
           ',' + format_double(p.theta_mean) + ',' + format_double(p.oscillation()) + '\n';
  }
  return out;
}

}  // namespace thermovisco
