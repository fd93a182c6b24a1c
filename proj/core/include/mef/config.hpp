#pragma once

// Plain-text run configuration: one `key = value` per line, dotted keys,
// `#` comments. Angles and other numbers accept a trailing `pi` factor
// (`0.99pi`, `pi`, `-0.5pi`).

#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "mef/sim_harness.hpp"

namespace mef::config {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct CheckSettings {
  double dt = 1e-3;                   // oracle / observer step
  double relative_tolerance = 1e-4;   // (eta, H) vs oracle gradient and Hessian
  double critical_tolerance = 1e-5;   // oracle tangential derivative at xi0
  double hjb_tolerance = 1e-12;       // worst HJB minimizer violation
};

struct AppConfig {
  quat::AttitudeScenario scenario = quat::reference_scenario();
  bool noise_enabled = false;
  std::uint64_t seed = 0;
  double gyro_sigma = 0.01;
  double vector_sigma = 1.0;
  double error_angle = 0.0;
  quat::Vector3 error_axis = quat::Vector3::UnitX();
  double hessian_scale = 0.1;
  FilterConfig filter;
  CheckSettings check;

  /// Initial estimate q0 * exp(error_angle about error_axis), gains from the
  /// noise sigmas.
  sim::RunConfig run_config() const;
};

struct KeyInfo {
  std::string key;
  std::string description;
  bool numeric = true;
  std::function<void(AppConfig&, const std::string&)> set;
  std::function<std::string(const AppConfig&)> get;
};

/// Every recognised key, in documentation order.
const std::vector<KeyInfo>& keys();
const KeyInfo* find_key(const std::string& key);

/// Reference scenario: 100 s, 0.99 pi initial error, noise off.
AppConfig defaults();
/// One-second noisy run with a stiff prior, used by `check` when no config
/// file is given.
AppConfig check_defaults();

/// Parses a real number with an optional trailing `pi` factor.
double parse_number(const std::string& text);

void set(AppConfig& config, const std::string& key, const std::string& value);
/// `key=value`.
void apply_override(AppConfig& config, const std::string& assignment);

AppConfig parse(std::istream& in, const std::string& source_name = "<input>");
AppConfig load_file(const std::string& path);

/// Canonical `key = value` dump of every key.
void write(std::ostream& os, const AppConfig& config);
/// Aligned key/description listing for --help.
std::string describe_keys();

}  // namespace mef::config
