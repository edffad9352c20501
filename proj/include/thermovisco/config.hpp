#pragma once

// Line-oriented `key = value` configuration, canonical snapshots, and the
// CSV / plot-data formats of a run.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "thermovisco/functionals.hpp"
#include "thermovisco/solver.hpp"

namespace thermovisco {

/// Located configuration error. line is 0 for command-line overrides.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string key, int line, const std::string& message);
  [[nodiscard]] const std::string& key() const { return key_; }
  [[nodiscard]] int line() const { return line_; }

 private:
  std::string key_;
  int line_;
};

struct ParsedConfig {
  SimulationConfig config;
  std::optional<std::string> preset;  // value of the `preset` key
};

/// Every key parse_config accepts.
const std::vector<std::string>& config_keys();

/// Parses text on top of base, then applies overrides ("key=value", later
/// wins). Gamma coefficients not given are taken from base when the family
/// is unchanged. The result is validated; every failure is a ConfigError.
ParsedConfig parse_config(std::string_view text, const std::vector<std::string>& overrides = {},
                          const SimulationConfig& base = {});

/// Stable text form: one `key = value` line per field in config_keys() order,
/// shortest round-trip numbers. Parsing it reproduces the config.
std::string canonical_config(const SimulationConfig& config);

/// 64-bit FNV-1a digest as 16 lowercase hex digits.
std::string stable_hash(std::string_view text);

/// Shortest decimal string that parses back to the same double.
std::string format_double(double x);
/// Locale-independent full-string parse; nullopt on any trailing garbage.
std::optional<double> parse_double(std::string_view s);

inline constexpr std::string_view kSeriesHeader =
    "t,dt,ux_l2,ux_linf,vx_l2,vx_linf,theta_linf,thetax_l2,mass_u,mass_ut,mass_theta,y_B,diss_vxx,"
    "heat_in";

std::string format_series(const DiagnosticsSeries& series);
/// Inverse of format_series. Throws std::invalid_argument on a bad header,
/// wrong column count or unparsable number.
DiagnosticsSeries parse_series(std::string_view text);

/// Writes format_series to path. Throws std::runtime_error on I/O failure.
void emit_series(const DiagnosticsSeries& series, const std::filesystem::path& path);
DiagnosticsSeries read_series(const std::filesystem::path& path);

/// Whitespace-separated columns with a '#' header, for gnuplot.
std::string format_plot_data(const DiagnosticsSeries& series);
/// Columns x, u, u_t, theta of one state.
std::string format_profile_plot(const State& state, const SimulationConfig& config);
/// Columns t, theta_min, theta_max, theta_mean, oscillation.
std::string format_profile_trace(const std::vector<ProfileSample>& profile);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace thermovisco
