// mef: simulate, verify and sweep the attitude minimum-energy observer.

#include <atomic>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "mef/check_suite.hpp"
#include "mef/config.hpp"
#include "mef/sim_harness.hpp"

namespace fs = std::filesystem;
using mef::config::AppConfig;
using mef::config::ConfigError;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitConfig = 2;
constexpr int kExitSingular = 3;

struct CommonOptions {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out_dir = ".";
  std::uint64_t seed = 0;
  bool seed_given = false;
};

AppConfig load(const CommonOptions& opts, const AppConfig& fallback) {
  AppConfig config = opts.config_path.empty() ? fallback : mef::config::load_file(opts.config_path);
  for (const auto& o : opts.overrides) mef::config::apply_override(config, o);
  if (opts.seed_given) config.seed = opts.seed;
  mef::sim::epoch_count(config.scenario);  // rejects a non-integer epoch count early
  return config;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void write_text_file(const fs::path& target, const std::string& text) {
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    out << text;
    if (!out.flush()) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

int cmd_simulate(const CommonOptions& opts) {
  AppConfig config;
  try {
    config = load(opts, mef::config::defaults());
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  const auto start = std::chrono::steady_clock::now();
  const mef::sim::RunResult result = mef::sim::run_partial(config.run_config());
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  const fs::path csv = fs::path(opts.out_dir) / "trajectory.csv";
  mef::sim::write_csv_file(csv.string(), result.records);
  mef::sim::write_summary(std::cout, result.summary);
  std::cout << "wall_time_s: " << format_double(wall) << '\n';
  std::cout << "csv: " << csv.string() << '\n';
  if (result.failure) {
    std::cout << "status: singular_p\n";
    std::cerr << "run aborted: " << *result.failure << '\n';
    return kExitSingular;
  }
  std::cout << "status: ok\n";
  return kExitOk;
}

int cmd_check(const CommonOptions& opts, double dt, bool dt_given, bool sabotage) {
  AppConfig config;
  try {
    config = load(opts, mef::config::check_defaults());
    if (dt_given) {
      if (!(dt > 0.0)) throw ConfigError("--dt must be > 0");
      config.check.dt = dt;
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  config.filter.negate_correction = sabotage;

  mef::check::CheckReport report;
  try {
    report = mef::check::run_suite(config);
  } catch (const mef::sim::RunFailure& e) {
    std::cout << "check aborted: " << e.what() << '\n' << "result: FAIL\n";
    return kExitCheckFailed;
  }
  std::cout << "horizon_s: " << format_double(config.scenario.duration) << '\n';
  std::cout << "dt: " << format_double(config.check.dt) << '\n';
  mef::check::print_report(std::cout, report);
  const bool ok = report.all_pass();
  std::cout << "result: " << (ok ? "PASS" : "FAIL") << '\n';
  return ok ? kExitOk : kExitCheckFailed;
}

std::vector<std::string> split_values(const std::string& list) {
  std::vector<std::string> out;
  std::stringstream ss(list);
  std::string part;
  while (std::getline(ss, part, ',')) {
    const auto first = part.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = part.find_last_not_of(" \t");
    out.push_back(part.substr(first, last - first + 1));
  }
  return out;
}

int cmd_sweep(const CommonOptions& opts, const std::string& param, const std::string& values,
              int jobs) {
  AppConfig base;
  std::vector<AppConfig> configs;
  const std::vector<std::string> list = split_values(values);
  try {
    base = load(opts, mef::config::defaults());
    const auto* key = mef::config::find_key(param);
    if (key == nullptr) throw ConfigError("unknown parameter '" + param + "'");
    if (!key->numeric) throw ConfigError("parameter '" + param + "' is not numeric");
    if (list.empty()) throw ConfigError("empty value list");
    if (jobs < 1) throw ConfigError("--jobs must be >= 1");
    for (const auto& v : list) {
      AppConfig c = base;
      mef::config::set(c, param, v);
      mef::sim::epoch_count(c.scenario);
      configs.push_back(c);
    }
  } catch (const std::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }

  std::vector<mef::sim::RunResult> results(configs.size());
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::string worker_error;
  auto worker = [&] {
    for (std::size_t i = next++; i < configs.size(); i = next++) {
      try {
        results[i] = mef::sim::run_partial(configs[i].run_config());
        const fs::path csv = fs::path(opts.out_dir) / ("run_" + std::to_string(i) + ".csv");
        mef::sim::write_csv_file(csv.string(), results[i].records);
      } catch (const std::exception& e) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (worker_error.empty()) worker_error = e.what();
      }
    }
  };
  const int threads = std::min<int>(jobs, static_cast<int>(configs.size()));
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  if (!worker_error.empty()) {
    std::cerr << "sweep failed: " << worker_error << '\n';
    return kExitConfig;
  }

  std::ostringstream summary;
  summary << "index,value,status,final_error_rad,max_opt_residual,total_substeps,"
             "min_hessian_eigenvalue,csv\n";
  bool any_failure = false;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& r = results[i];
    any_failure = any_failure || r.failure.has_value();
    summary << i << ',' << list[i] << ',' << (r.failure ? "singular_p" : "ok") << ','
            << format_double(r.summary.final_error) << ','
            << format_double(r.summary.max_opt_residual) << ',' << r.summary.total_substeps
            << ',' << format_double(r.summary.min_hessian_eigenvalue) << ",run_" << i
            << ".csv\n";
    std::cout << param << '=' << list[i] << ": "
              << (r.failure ? "singular_p (" + *r.failure + ")"
                            : "final_error_rad " + format_double(r.summary.final_error))
              << '\n';
  }
  const fs::path summary_path = fs::path(opts.out_dir) / "summary.csv";
  write_text_file(summary_path, summary.str());
  std::cout << "summary: " << summary_path.string() << '\n';
  return any_failure ? kExitSingular : kExitOk;
}

void add_common(CLI::App* cmd, CommonOptions& opts) {
  cmd->add_option("--config", opts.config_path, "configuration file (key = value lines)");
  cmd->add_option("--set", opts.overrides, "override a key, e.g. --set noise.enabled=true")
      ->take_all()
      ->allow_extra_args(false);
  cmd->add_option("--out", opts.out_dir, "output directory")->capture_default_str();
  cmd->add_option_function<std::uint64_t>(
      "--seed", [&opts](std::uint64_t s) { opts.seed = s; opts.seed_given = true; },
      "noise seed (overrides noise.seed)");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Minimum-energy attitude observer: simulation, oracle checks and sweeps"};
  app.require_subcommand(1);
  app.footer("Configuration keys:\n" + mef::config::describe_keys());

  CommonOptions sim_opts;
  auto* simulate = app.add_subcommand("simulate", "run one scenario and write trajectory.csv");
  add_common(simulate, sim_opts);

  CommonOptions check_opts;
  double dt = 0.0;
  bool sabotage = false;
  auto* check = app.add_subcommand("check", "compare the observer with the brute-force oracle");
  add_common(check, check_opts);
  auto* dt_opt = check->add_option("--dt", dt, "observer and oracle step [s]");
  check->add_flag("--sabotage-delta-sign", sabotage, "negate the correction term (negative control)");

  CommonOptions sweep_opts;
  std::string param;
  std::string values;
  int jobs = 1;
  auto* sweep = app.add_subcommand("sweep", "run one scenario per value of a numeric key");
  add_common(sweep, sweep_opts);
  sweep->add_option("--param", param, "numeric configuration key")->required();
  sweep->add_option("--values", values, "comma-separated values (pi suffix allowed)")->required();
  sweep->add_option("--jobs", jobs, "parallel runs")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (*simulate) return cmd_simulate(sim_opts);
    if (*check) return cmd_check(check_opts, dt, dt_opt->count() > 0, sabotage);
    if (*sweep) return cmd_sweep(sweep_opts, param, values, jobs);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfig;
  }
  return kExitConfig;
}
