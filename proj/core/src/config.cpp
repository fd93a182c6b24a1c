#include "mef/config.hpp"

#include <algorithm>
#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

namespace mef::config {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

// Shortest representation that round-trips.
std::string format(double v) {
  char buf[40];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_positive(const std::string& text) {
  const double v = parse_number(text);
  if (!(v > 0.0)) throw ConfigError("expected a positive number, got '" + text + "'");
  return v;
}

double parse_non_negative(const std::string& text) {
  const double v = parse_number(text);
  if (!(v >= 0.0)) throw ConfigError("expected a non-negative number, got '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  const std::string t = trim(text);
  if (t == "true" || t == "1" || t == "yes" || t == "on") return true;
  if (t == "false" || t == "0" || t == "no" || t == "off") return false;
  throw ConfigError("expected a boolean, got '" + text + "'");
}

std::uint64_t parse_seed(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty() || t.find_first_not_of("0123456789") != std::string::npos) {
    throw ConfigError("expected a non-negative integer seed, got '" + text + "'");
  }
  errno = 0;
  const unsigned long long v = std::strtoull(t.c_str(), nullptr, 10);
  if (errno == ERANGE) throw ConfigError("seed out of range: '" + text + "'");
  return v;
}

quat::Vector3 parse_vector3(const std::string& text) {
  std::stringstream ss(text);
  std::string part;
  std::vector<double> values;
  while (std::getline(ss, part, ',')) values.push_back(parse_number(part));
  if (values.size() != 3) throw ConfigError("expected three comma-separated numbers, got '" + text + "'");
  const quat::Vector3 v(values[0], values[1], values[2]);
  if (!(v.norm() > 0.0)) throw ConfigError("axis must be non-zero");
  return v;
}

std::vector<KeyInfo> build_keys() {
  std::vector<KeyInfo> k;
  auto num = [&](std::string key, std::string desc, std::function<double&(AppConfig&)> ref,
                 double (*parser)(const std::string&)) {
    k.push_back({std::move(key), std::move(desc), true,
                 [ref, parser](AppConfig& c, const std::string& v) { ref(c) = parser(v); },
                 [ref](const AppConfig& c) { return format(ref(const_cast<AppConfig&>(c))); }});
  };

  num("scenario.duration", "simulated time span [s]; integer multiple of sensor_dt",
      [](AppConfig& c) -> double& { return c.scenario.duration; }, parse_non_negative);
  num("scenario.sensor_dt", "sensor sampling interval [s]; measurements are held over it",
      [](AppConfig& c) -> double& { return c.scenario.sensor_dt; }, parse_positive);

  k.push_back({"noise.enabled", "add Gaussian noise to gyro and vector measurements", false,
               [](AppConfig& c, const std::string& v) { c.noise_enabled = parse_bool(v); },
               [](const AppConfig& c) { return std::string(c.noise_enabled ? "true" : "false"); }});
  k.push_back({"noise.seed", "seed of the counter-based noise generator", true,
               [](AppConfig& c, const std::string& v) { c.seed = parse_seed(v); },
               [](const AppConfig& c) { return std::to_string(c.seed); }});
  num("noise.gyro_sigma", "gyro noise standard deviation per axis [rad/s]; also sets Q",
      [](AppConfig& c) -> double& { return c.gyro_sigma; }, parse_non_negative);
  num("noise.vector_sigma", "reference-vector noise standard deviation per axis; also sets R",
      [](AppConfig& c) -> double& { return c.vector_sigma; }, parse_positive);

  num("estimate.error_angle", "initial attitude error [rad]; accepts a pi suffix",
      [](AppConfig& c) -> double& { return c.error_angle; }, parse_number);
  k.push_back({"estimate.error_axis", "rotation axis of the initial error (x,y,z)", false,
               [](AppConfig& c, const std::string& v) { c.error_axis = parse_vector3(v); },
               [](const AppConfig& c) {
                 return format(c.error_axis.x()) + "," + format(c.error_axis.y()) + "," +
                        format(c.error_axis.z());
               }});
  num("estimate.hessian_scale", "s in H0 = s^2 X0^-T U U^T X0^-1 (U: tangent basis at q0)",
      [](AppConfig& c) -> double& { return c.hessian_scale; }, parse_positive);

  num("filter.delta_step_cap", "substep bound |Delta| dt <= cap",
      [](AppConfig& c) -> double& { return c.filter.delta_step_cap; }, parse_positive);
  num("filter.dt_max", "largest observer substep [s]",
      [](AppConfig& c) -> double& { return c.filter.dt_max; }, parse_positive);
  num("filter.p_solve_tolerance", "largest accepted relative residual of the Delta solve",
      [](AppConfig& c) -> double& { return c.filter.p_solve_tolerance; }, parse_positive);
  num("filter.hessian_regularization", "epsilon added as epsilon*I to the Delta system",
      [](AppConfig& c) -> double& { return c.filter.hessian_regularization; },
      parse_non_negative);
  k.push_back({"filter.reject_curvature_loss",
               "halve substeps that would make a positive curvature indefinite", false,
               [](AppConfig& c, const std::string& v) {
                 c.filter.reject_curvature_loss = parse_bool(v);
               },
               [](const AppConfig& c) {
                 return std::string(c.filter.reject_curvature_loss ? "true" : "false");
               }});
  num("filter.min_substep", "smallest substep the rejection rule may reach [s]",
      [](AppConfig& c) -> double& { return c.filter.min_substep; }, parse_positive);

  num("check.dt", "observer and oracle step for `check` [s]",
      [](AppConfig& c) -> double& { return c.check.dt; }, parse_positive);
  num("check.relative_tolerance", "bound on relative (eta, H) vs oracle mismatch",
      [](AppConfig& c) -> double& { return c.check.relative_tolerance; }, parse_positive);
  num("check.critical_tolerance", "bound on the oracle tangential derivative at xi0",
      [](AppConfig& c) -> double& { return c.check.critical_tolerance; }, parse_positive);
  num("check.hjb_tolerance", "bound on the sampled HJB minimizer violation",
      [](AppConfig& c) -> double& { return c.check.hjb_tolerance; }, parse_positive);
  return k;
}

}  // namespace

sim::RunConfig AppConfig::run_config() const {
  sim::RunConfig rc;
  rc.scenario = scenario;
  rc.inject_noise = noise_enabled;
  rc.noise.seed = seed;
  rc.noise.gyro_cov = gyro_sigma * gyro_sigma * quat::Matrix3::Identity();
  rc.noise.vector_cov = vector_sigma * vector_sigma * quat::Matrix3::Identity();
  rc.filter = filter;
  rc.initial_estimate =
      scenario.q0 * quat::Quaternion::from_axis_angle(error_axis.normalized(), error_angle);
  rc.initial_hessian_scale = hessian_scale;
  return rc;
}

const std::vector<KeyInfo>& keys() {
  static const std::vector<KeyInfo> table = build_keys();
  return table;
}

const KeyInfo* find_key(const std::string& key) {
  for (const auto& k : keys()) {
    if (k.key == key) return &k;
  }
  return nullptr;
}

AppConfig defaults() {
  AppConfig c;
  c.error_angle = 0.99 * std::numbers::pi;
  return c;
}

AppConfig check_defaults() {
  AppConfig c;
  c.scenario.duration = 1.0;
  c.noise_enabled = true;
  c.seed = 1;
  c.vector_sigma = 3.0;
  c.error_angle = 0.01 * std::numbers::pi;
  c.error_axis = quat::Vector3(1.0, 2.0, -1.0);
  c.hessian_scale = 10.0;
  return c;
}

double parse_number(const std::string& text) {
  std::string t = trim(text);
  double factor = 1.0;
  if (t.size() >= 2 && t.compare(t.size() - 2, 2, "pi") == 0) {
    factor = std::numbers::pi;
    t = trim(t.substr(0, t.size() - 2));
    if (t.empty() || t == "+") return factor;
    if (t == "-") return -factor;
    if (t.back() == '*') t = trim(t.substr(0, t.size() - 1));
  }
  if (t.empty()) throw ConfigError("expected a number, got '" + text + "'");
  char* end = nullptr;
  errno = 0;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v)) {
    throw ConfigError("expected a number, got '" + text + "'");
  }
  return v * factor;
}

void set(AppConfig& config, const std::string& key, const std::string& value) {
  const KeyInfo* info = find_key(key);
  if (info == nullptr) throw ConfigError("unknown key '" + key + "'");
  try {
    info->set(config, value);
  } catch (const ConfigError& e) {
    throw ConfigError(key + ": " + e.what());
  }
}

void apply_override(AppConfig& config, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  set(config, trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

AppConfig parse(std::istream& in, const std::string& source_name) {
  AppConfig config = defaults();
  std::string line;
  int number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(source_name + ":" + std::to_string(number) + ": expected key = value");
    }
    try {
      set(config, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    } catch (const ConfigError& e) {
      throw ConfigError(source_name + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return config;
}

AppConfig load_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse(in, path);
}

void write(std::ostream& os, const AppConfig& config) {
  for (const auto& k : keys()) os << k.key << " = " << k.get(config) << '\n';
}

std::string describe_keys() {
  std::size_t width = 0;
  for (const auto& k : keys()) width = std::max(width, k.key.size());
  const AppConfig d = defaults();
  std::ostringstream os;
  for (const auto& k : keys()) {
    os << "  " << k.key << std::string(width - k.key.size() + 2, ' ') << k.description
       << " (default " << k.get(d) << ")\n";
  }
  return os.str();
}

}  // namespace mef::config
