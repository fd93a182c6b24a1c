#include "mef/sim_harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "mef/noise.hpp"

namespace mef::sim {

const char* const kCsvHeader =
    "t,qw,qx,qy,qz,qhw,qhx,qhy,qhz,err_rad,delta_norm,opt_res_1,opt_res_2,opt_res_3,"
    "value_rate,substeps";

namespace {

quat::Matrix3 covariance_factor(const quat::Matrix3& cov) {
  Eigen::SelfAdjointEigenSolver<quat::Matrix3> eig(0.5 * (cov + cov.transpose()));
  const Vector3 root = eig.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return eig.eigenvectors() * root.asDiagonal();
}

double epoch_time(int k, double sensor_dt) { return k * sensor_dt; }

std::array<double, 4> to_array(const Quaternion& q) { return {q.w, q.v.x(), q.v.y(), q.v.z()}; }

void append(std::string& line, double value) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", value);
  line += buf;
}

}  // namespace

int epoch_count(const quat::AttitudeScenario& scenario) {
  if (!(scenario.sensor_dt > 0.0)) throw std::invalid_argument("sensor_dt must be > 0");
  if (!(scenario.duration >= 0.0)) throw std::invalid_argument("duration must be >= 0");
  const double ratio = scenario.duration / scenario.sensor_dt;
  const double n = std::round(ratio);
  if (std::abs(ratio - n) > 1e-9 * std::max(1.0, ratio)) {
    throw std::invalid_argument("duration must be an integer multiple of sensor_dt");
  }
  return static_cast<int>(n);
}

std::vector<TruthEpoch> simulate_truth(const quat::AttitudeScenario& scenario) {
  const int n = epoch_count(scenario);
  std::vector<TruthEpoch> out;
  out.reserve(static_cast<std::size_t>(n) + 1);
  Quaternion q = scenario.q0;
  for (int k = 0; k <= n; ++k) {
    const double t = epoch_time(k, scenario.sensor_dt);
    TruthEpoch e;
    e.t = t;
    e.q = q;
    e.omega = scenario.omega_fn(t);
    e.z_ref = scenario.ref_fn(t);
    if (std::abs(e.z_ref.norm() - 1.0) > 1e-12) {
      throw std::invalid_argument("reference vector is not unit length");
    }
    e.z = quat::rotate_to_body(q, e.z_ref);
    out.push_back(e);
    q = quat::integrate(q, e.omega, scenario.sensor_dt);
  }
  return out;
}

std::vector<MeasuredEpoch> exact_measurements(const std::vector<TruthEpoch>& truth) {
  std::vector<MeasuredEpoch> out;
  out.reserve(truth.size());
  for (const auto& e : truth) out.push_back({e.t, e.omega, e.z});
  return out;
}

std::vector<MeasuredEpoch> corrupt(const std::vector<TruthEpoch>& truth,
                                   const quat::NoiseModel& noise) {
  const CounterRng rng(noise.seed);
  const quat::Matrix3 gyro_factor = covariance_factor(noise.gyro_cov);
  const quat::Matrix3 vector_factor = covariance_factor(noise.vector_cov);
  std::vector<MeasuredEpoch> out;
  out.reserve(truth.size());
  for (std::size_t k = 0; k < truth.size(); ++k) {
    Vector3 gyro_draw;
    Vector3 vector_draw;
    for (int i = 0; i < 3; ++i) {
      const std::uint64_t index = 3 * static_cast<std::uint64_t>(k) + i;
      gyro_draw(i) = rng.normal(NoiseStream::kGyro, index);
      vector_draw(i) = rng.normal(NoiseStream::kVector, index);
    }
    out.push_back({truth[k].t, truth[k].omega + gyro_factor * gyro_draw,
                   truth[k].z + vector_factor * vector_draw});
  }
  return out;
}

Matrix initial_hessian(const GeneratorBasis& basis, const GroupElement& x_hat0,
                       const Quaternion& q_hat0, double scale) {
  const Matrix tangent = basis.upsilon(q_hat0.vector());
  const Matrix& x_inv = x_hat0.inverse();
  const Matrix h = scale * scale * x_inv.transpose() * tangent * tangent.transpose() * x_inv;
  return 0.5 * (h + h.transpose());
}

RunResult run_partial(const RunConfig& config) {
  const GeneratorBasis basis = quat::quaternion_basis();
  FilterConfig filter_config = config.filter;
  filter_config.origin = quat::origin();
  const MinimumEnergyObserver observer(basis, filter_config);

  const auto truth = simulate_truth(config.scenario);
  const auto measured = config.inject_noise ? corrupt(truth, config.noise) : exact_measurements(truth);
  const int n = static_cast<int>(truth.size()) - 1;
  const double sensor_dt = config.scenario.sensor_dt;

  const Quaternion q_hat0 = config.initial_estimate.normalized();
  const GroupElement x0 = quat::group_from_quaternion(basis, q_hat0);
  RunResult result;
  result.initial_hessian = initial_hessian(basis, x0, q_hat0, config.initial_hessian_scale);
  ObserverState state = observer.init(x0, result.initial_hessian);

  auto sample_at = [&](int k, const ObserverState& s) {
    const Quaternion q_hat = Quaternion::from_vector(observer.state_estimate(s));
    return quat::build_sample(basis, q_hat, s.x_hat, measured[k].omega, measured[k].z,
                              truth[k].z_ref, config.noise, epoch_time(k + 1, sensor_dt));
  };

  RunSummary& summary = result.summary;
  summary.epochs = n;
  summary.initial_error = quat::attitude_error_angle(
      truth.front().q, Quaternion::from_vector(observer.state_estimate(state)));
  summary.final_error = summary.initial_error;
  summary.min_hessian_eigenvalue = min_eigenvalue(state.hessian);
  result.records.reserve(static_cast<std::size_t>(n));

  SignalSample sample = sample_at(0, state);
  for (int k = 0; k < n; ++k) {
    StepTrace trace;
    try {
      state = observer.advance(state, sample, &trace);
      state.t = epoch_time(k + 1, sensor_dt);
      if (config.record_traces) result.traces.push_back({sample, trace});
      sample = sample_at(k + 1, state);

      LogRecord rec;
      rec.t = state.t;
      const Vector q_est = observer.state_estimate(state);
      const Quaternion q_hat = Quaternion::from_vector(q_est);
      rec.q_true = to_array(truth[k + 1].q);
      rec.q_est = to_array(q_hat);
      rec.error_angle = quat::attitude_error_angle(truth[k + 1].q, q_hat);
      const AlgebraVector residual = observer.optimality_residual(state);
      std::copy(residual.data(), residual.data() + 3, rec.opt_residual.begin());
      const AlgebraVector delta = observer.correction_delta(state, sample);
      rec.delta_norm = delta.norm();
      rec.value_rate = observer.value_rate(state, sample, delta);
      rec.substeps = static_cast<int>(trace.substeps.size());

      summary.total_substeps += rec.substeps;
      summary.max_opt_residual = std::max(summary.max_opt_residual, residual.norm());
      summary.max_norm_drift = std::max(summary.max_norm_drift, std::abs(q_est.norm() - 1.0));
      summary.min_hessian_eigenvalue =
          std::min(summary.min_hessian_eigenvalue, min_eigenvalue(state.hessian));
      summary.final_error = rec.error_angle;
      result.records.push_back(rec);
    } catch (const SingularP& e) {
      std::ostringstream os;
      os << "epoch " << k << ": " << e.what();
      result.failure = os.str();
      result.failure_epoch = k;
      return result;
    }
  }
  result.final_state = state;
  return result;
}

RunResult run(const RunConfig& config) {
  RunResult result = run_partial(config);
  if (result.failure) throw RunFailure(*result.failure, result.failure_epoch);
  return result;
}

void write_csv(std::ostream& os, const std::vector<LogRecord>& records) {
  os << kCsvHeader << '\n';
  std::string line;
  for (const auto& r : records) {
    line.clear();
    append(line, r.t);
    for (double v : r.q_true) { line += ','; append(line, v); }
    for (double v : r.q_est) { line += ','; append(line, v); }
    line += ','; append(line, r.error_angle);
    line += ','; append(line, r.delta_norm);
    for (double v : r.opt_residual) { line += ','; append(line, v); }
    line += ','; append(line, r.value_rate);
    line += ',';
    line += std::to_string(r.substeps);
    os << line << '\n';
  }
}

void write_csv_file(const std::string& path, const std::vector<LogRecord>& records) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    write_csv(out, records);
    out.flush();
    if (!out) throw std::runtime_error("failed writing " + tmp.string());
  }
  fs::rename(tmp, target);
}

void write_summary(std::ostream& os, const RunSummary& s) {
  char buf[64];
  auto line = [&](const char* key, double value) {
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    os << key << ": " << buf << '\n';
  };
  os << "epochs: " << s.epochs << '\n';
  line("initial_error_rad", s.initial_error);
  line("final_error_rad", s.final_error);
  line("max_opt_residual", s.max_opt_residual);
  os << "total_substeps: " << s.total_substeps << '\n';
  line("min_hessian_eigenvalue", s.min_hessian_eigenvalue);
  line("max_norm_drift", s.max_norm_drift);
}

}  // namespace mef::sim
