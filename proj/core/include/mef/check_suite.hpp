#pragma once

// Cross-checks of the observer against the brute-force oracle on a short
// horizon, run on a uniform step grid so both pipelines see the same signals.

#include <iosfwd>
#include <string>
#include <vector>

#include "mef/config.hpp"
#include "mef/sim_harness.hpp"

namespace mef::check {

struct OracleComparison {
  double dt = 0.0;
  long steps = 0;
  double gradient_relative = 0.0;  // |eta - g| / |g|
  double hessian_relative = 0.0;   // ||H - H_oracle||_F / ||H_oracle||_F
  double critical_residual = 0.0;  // oracle tangential derivative at xi0
  double observer_residual = 0.0;  // max |upsilon(xi0)^T eta| over the run
  double hjb_violation = 0.0;
  double final_error = 0.0;
};

/// Runs the observer with substeps fixed at dt and compares its final (eta, H)
/// with the oracle built from the recorded trace. Throws sim::RunFailure.
OracleComparison compare_with_oracle(const sim::RunConfig& run, double dt);

struct CheckLine {
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

struct CheckReport {
  std::vector<CheckLine> lines;
  bool all_pass() const;
};

/// Ratio band accepted as first-order convergence when dt is halved.
inline constexpr double kLinearRatioLow = 1.6;
inline constexpr double kLinearRatioHigh = 2.4;

/// Critical point, gradient and Hessian agreement and HJB minimizer at
/// check.dt, plus the residual ratio under dt in {2, 1, 1/2} x check.dt.
CheckReport run_suite(const config::AppConfig& config);

void print_report(std::ostream& os, const CheckReport& report);

}  // namespace mef::check
