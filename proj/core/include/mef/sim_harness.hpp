#pragma once

// Deterministic attitude-estimation scenario runner: truth propagation,
// seeded measurement corruption, observer execution and CSV logging.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mef/filter.hpp"
#include "mef/oracle.hpp"
#include "mef/quat_attitude.hpp"

namespace mef::sim {

using quat::Quaternion;
using quat::Vector3;

struct TruthEpoch {
  double t = 0.0;
  Quaternion q;
  Vector3 omega;  // held over [t, t + sensor_dt)
  Vector3 z_ref;
  Vector3 z;      // z_ref expressed in the body frame
};

struct MeasuredEpoch {
  double t = 0.0;
  Vector3 omega;
  Vector3 z;
};

/// Number of sensor intervals; throws if duration / sensor_dt is not a
/// non-negative integer.
int epoch_count(const quat::AttitudeScenario& scenario);

/// Lie-group Euler propagation at sensor_dt; returns epoch_count + 1 epochs.
std::vector<TruthEpoch> simulate_truth(const quat::AttitudeScenario& scenario);

/// Adds zero-mean Gaussian noise with the model's covariances. Gyro and vector
/// noise come from separate counter streams keyed by the model seed.
std::vector<MeasuredEpoch> corrupt(const std::vector<TruthEpoch>& truth,
                                   const quat::NoiseModel& noise);

/// Noise-free measurements.
std::vector<MeasuredEpoch> exact_measurements(const std::vector<TruthEpoch>& truth);

struct RunConfig {
  quat::AttitudeScenario scenario = quat::reference_scenario();
  // Covariances set the observer gains; noise is only added when
  // inject_noise is true.
  quat::NoiseModel noise;
  bool inject_noise = false;
  FilterConfig filter;  // origin is overwritten with (1, 0, 0, 0)
  Quaternion initial_estimate;
  double initial_hessian_scale = 0.1;
  std::string output_path;
  // Keep every epoch's sample and substeps (needed to build oracle problems).
  bool record_traces = false;
};

struct LogRecord {
  double t = 0.0;
  std::array<double, 4> q_true{};
  std::array<double, 4> q_est{};
  double error_angle = 0.0;
  double delta_norm = 0.0;
  std::array<double, 3> opt_residual{};
  double value_rate = 0.0;
  int substeps = 0;
};

struct RunSummary {
  int epochs = 0;
  double initial_error = 0.0;
  double final_error = 0.0;
  double max_opt_residual = 0.0;
  long total_substeps = 0;
  double min_hessian_eigenvalue = 0.0;
  double max_norm_drift = 0.0;  // max | ||q_est|| - 1 |
};

struct RunResult {
  std::vector<LogRecord> records;  // one per sensor interval, logged at its end
  RunSummary summary;
  Matrix initial_hessian;
  std::optional<ObserverState> final_state;
  std::vector<oracle::EpochTrace> traces;  // filled when record_traces is set
  // Set when the correction solve failed; records stop at the failing epoch.
  std::optional<std::string> failure;
  int failure_epoch = -1;
};

/// A run aborted because the correction solve failed.
class RunFailure : public std::runtime_error {
 public:
  RunFailure(const std::string& what, int epoch) : std::runtime_error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

/// H0 = scale^2 X0^-T upsilon(q0) upsilon(q0)^T X0^-1: the tangent-space
/// projector at the initial estimate, expressed in observer coordinates.
Matrix initial_hessian(const GeneratorBasis& basis, const GroupElement& x_hat0,
                       const Quaternion& q_hat0, double scale);

/// Throws RunFailure if the correction solve fails.
RunResult run(const RunConfig& config);
/// Same as run() but returns the records gathered before a solve failure.
RunResult run_partial(const RunConfig& config);

extern const char* const kCsvHeader;

void write_csv(std::ostream& os, const std::vector<LogRecord>& records);
/// Writes to a temporary file next to `path` and renames it into place.
void write_csv_file(const std::string& path, const std::vector<LogRecord>& records);
void write_summary(std::ostream& os, const RunSummary& summary);

}  // namespace mef::sim
