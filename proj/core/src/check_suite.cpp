#include "mef/check_suite.hpp"

#include <algorithm>
#include <cstdio>
#include <limits>
#include <ostream>

#include "mef/oracle.hpp"

namespace mef::check {

OracleComparison compare_with_oracle(const sim::RunConfig& run, double dt) {
  sim::RunConfig rc = run;
  rc.filter.dt_max = dt;
  rc.filter.delta_step_cap = std::numeric_limits<double>::infinity();
  rc.record_traces = true;
  const sim::RunResult result = sim::run(rc);

  const GeneratorBasis basis = quat::quaternion_basis();
  const Vector origin = quat::origin();
  const oracle::ValueOracle oracle(
      oracle::from_trace(basis, result.initial_hessian, origin, result.traces));
  const oracle::GradientHessian gh = oracle.gradient_hessian(origin);
  const ObserverState& state = *result.final_state;

  OracleComparison out;
  out.dt = dt;
  out.steps = static_cast<long>(oracle.problem().steps.size());
  out.gradient_relative = (state.gradient - gh.gradient).norm() / gh.gradient.norm();
  out.hessian_relative = (state.hessian - gh.hessian).norm() / gh.hessian.norm();
  out.critical_residual = oracle.critical_point_residual(basis, origin);
  out.observer_residual = result.summary.max_opt_residual;
  out.final_error = result.summary.final_error;
  if (!result.traces.empty()) {
    const SignalSample& last = result.traces.back().sample;
    out.hjb_violation =
        oracle::hjb_minimizer_check(gh.gradient, last.input_matrix, last.state_gain);
  }
  return out;
}

bool CheckReport::all_pass() const {
  return std::all_of(lines.begin(), lines.end(), [](const CheckLine& l) { return l.pass; });
}

CheckReport run_suite(const config::AppConfig& config) {
  const sim::RunConfig rc = config.run_config();
  const double dt = config.check.dt;
  const OracleComparison at_dt = compare_with_oracle(rc, dt);
  const OracleComparison coarse = compare_with_oracle(rc, 2.0 * dt);
  const OracleComparison fine = compare_with_oracle(rc, 0.5 * dt);

  CheckReport report;
  auto upper = [&](std::string name, double value, double tol) {
    report.lines.push_back({std::move(name), value, tol, value <= tol});
  };
  upper("critical_point", at_dt.critical_residual, config.check.critical_tolerance);
  upper("gradient_vs_oracle", at_dt.gradient_relative, config.check.relative_tolerance);
  upper("hessian_vs_oracle", at_dt.hessian_relative, config.check.relative_tolerance);
  upper("hjb_minimizer", at_dt.hjb_violation, config.check.hjb_tolerance);
  auto ratio_line = [&](std::string name, double num, double den) {
    const double ratio = num / den;
    report.lines.push_back({std::move(name), ratio, kLinearRatioLow,
                            ratio >= kLinearRatioLow && ratio <= kLinearRatioHigh});
  };
  ratio_line("dt_scaling_coarse", coarse.critical_residual, at_dt.critical_residual);
  ratio_line("dt_scaling_fine", at_dt.critical_residual, fine.critical_residual);
  return report;
}

void print_report(std::ostream& os, const CheckReport& report) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%-20s %-14s %-14s %s\n", "check", "value", "bound", "result");
  os << buf;
  for (const auto& l : report.lines) {
    const bool ratio = l.name.rfind("dt_scaling", 0) == 0;
    char bound[40];
    if (ratio) {
      std::snprintf(bound, sizeof(bound), "[%.1f, %.1f]", kLinearRatioLow, kLinearRatioHigh);
    } else {
      std::snprintf(bound, sizeof(bound), "<= %.3g", l.tolerance);
    }
    std::snprintf(buf, sizeof(buf), "%-20s %-14.6g %-14s %s\n", l.name.c_str(), l.value, bound,
                  l.pass ? "PASS" : "FAIL");
    os << buf;
  }
}

}  // namespace mef::check
