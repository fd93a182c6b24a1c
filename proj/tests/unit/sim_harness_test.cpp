#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "mef/sim_harness.hpp"

namespace {

using namespace mef::sim;
using mef::quat::AttitudeScenario;
using mef::quat::NoiseModel;

constexpr double kPi = std::numbers::pi;

AttitudeScenario constant_scenario(const Vector3& omega, double duration) {
  AttitudeScenario s = mef::quat::reference_scenario();
  s.omega_fn = [omega](double) { return omega; };
  s.duration = duration;
  return s;
}

RunConfig reference_run(double error_angle) {
  RunConfig rc;
  rc.initial_estimate = Quaternion::from_axis_angle(Vector3::UnitX(), error_angle);
  return rc;
}

TEST(EpochCount, ReferenceAndInvalid) {
  AttitudeScenario s = mef::quat::reference_scenario();
  EXPECT_EQ(epoch_count(s), 1000);
  s.duration = 0.0;
  EXPECT_EQ(epoch_count(s), 0);
  s.duration = 0.15;
  EXPECT_THROW(epoch_count(s), std::invalid_argument);
  s.duration = -1.0;
  EXPECT_THROW(epoch_count(s), std::invalid_argument);
  s.duration = 1.0;
  s.sensor_dt = 0.0;
  EXPECT_THROW(epoch_count(s), std::invalid_argument);
}

TEST(SimulateTruth, ReferenceScenarioEpochsAndNorm) {
  const auto truth = simulate_truth(mef::quat::reference_scenario());
  ASSERT_EQ(truth.size(), 1001u);
  EXPECT_DOUBLE_EQ(truth.back().t, 100.0);
  for (const auto& e : truth) {
    ASSERT_LE(std::abs(e.q.norm() - 1.0), 1e-9);
    ASSERT_LE((e.z - mef::quat::rotate_to_body(e.q, e.z_ref)).norm(), 0.0);
  }
}

TEST(SimulateTruth, ZeroRateKeepsAttitude) {
  AttitudeScenario s = constant_scenario(Vector3::Zero(), 5.0);
  s.q0 = Quaternion::from_axis_angle(Vector3(1, 1, 0), 0.4);
  for (const auto& e : simulate_truth(s)) {
    ASSERT_EQ(e.q.vector(), s.q0.vector());
  }
}

TEST(SimulateTruth, FullRevolution) {
  const auto truth = simulate_truth(constant_scenario(Vector3(0, 0, 2.0 * kPi / 10.0), 10.0));
  EXPECT_LE(mef::quat::attitude_error_angle(truth.back().q, truth.front().q), 1e-6);
}

TEST(SimulateTruth, RejectsNonUnitReference) {
  AttitudeScenario s = mef::quat::reference_scenario();
  s.ref_fn = [](double) { return Vector3(0, 0, 2); };
  EXPECT_THROW(simulate_truth(s), std::invalid_argument);
}

TEST(Corrupt, ZeroCovarianceIsExact) {
  const auto truth = simulate_truth(mef::quat::reference_scenario());
  NoiseModel zero;
  zero.gyro_cov.setZero();
  zero.vector_cov.setZero();
  const auto measured = corrupt(truth, zero);
  const auto exact = exact_measurements(truth);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    ASSERT_EQ(measured[k].omega, exact[k].omega);
    ASSERT_EQ(measured[k].z, exact[k].z);
  }
}

TEST(Corrupt, SeedDeterminesDraws) {
  const auto truth = simulate_truth(constant_scenario(Vector3(0.1, 0, 0), 10.0));
  NoiseModel a;
  a.seed = 5;
  NoiseModel b = a;
  NoiseModel c = a;
  c.seed = 6;
  const auto ma = corrupt(truth, a);
  const auto mb = corrupt(truth, b);
  const auto mc = corrupt(truth, c);
  for (std::size_t k = 0; k < truth.size(); ++k) {
    ASSERT_EQ(ma[k].omega, mb[k].omega);
    ASSERT_EQ(ma[k].z, mb[k].z);
    ASSERT_NE(ma[k].z, mc[k].z);
  }
}

TEST(Corrupt, StreamsAreIndependent) {
  const auto truth = simulate_truth(constant_scenario(Vector3(0.1, 0, 0), 10.0));
  NoiseModel both;
  NoiseModel vector_only = both;
  vector_only.gyro_cov.setZero();
  const auto mb = corrupt(truth, both);
  const auto mv = corrupt(truth, vector_only);
  for (std::size_t k = 0; k < truth.size(); ++k) ASSERT_EQ(mb[k].z, mv[k].z);
}

TEST(Corrupt, GyroSampleVariance) {
  const auto truth = simulate_truth(constant_scenario(Vector3(0.1, 0.2, 0.3), 3333.4));
  NoiseModel noise;
  noise.seed = 9;
  const auto measured = corrupt(truth, noise);
  double sum_sq = 0.0;
  int count = 0;
  for (std::size_t k = 0; k < truth.size(); ++k) {
    const Vector3 d = measured[k].omega - truth[k].omega;
    sum_sq += d.squaredNorm();
    count += 3;
  }
  ASSERT_GE(count, 100000);
  EXPECT_NEAR(sum_sq / count / (0.01 * 0.01), 1.0, 0.05);
}

TEST(InitialHessian, RankThreeWithOriginInKernel) {
  const mef::GeneratorBasis basis = mef::quat::quaternion_basis();
  const Quaternion q = Quaternion::from_axis_angle(Vector3::UnitX(), 0.99 * kPi);
  const mef::GroupElement x0 = mef::quat::group_from_quaternion(basis, q);
  const mef::Matrix h0 = initial_hessian(basis, x0, q, 0.1);
  EXPECT_LE((h0 * mef::quat::origin()).norm(), 1e-15);
  Eigen::SelfAdjointEigenSolver<mef::Matrix> eig(h0);
  EXPECT_NEAR(eig.eigenvalues()(0), 0.0, 1e-15);
  for (int i = 1; i < 4; ++i) EXPECT_NEAR(eig.eigenvalues()(i), 0.01, 1e-15);
}

TEST(Run, ZeroInitialErrorStaysAtTruth) {
  const RunResult r = run(reference_run(0.0));
  ASSERT_EQ(r.records.size(), 1000u);
  for (const auto& rec : r.records) ASSERT_LE(rec.error_angle, 1e-9);
}

TEST(Run, NoiselessReferenceConverges) {
  const RunResult r = run(reference_run(0.99 * kPi));
  EXPECT_NEAR(r.summary.initial_error, 0.99 * kPi, 1e-12);
  EXPECT_LT(r.summary.final_error, 0.05);
  EXPECT_LE(r.summary.final_error * 100.0, r.summary.initial_error);
  EXPECT_LE(r.summary.max_opt_residual, 1e-6);
  EXPECT_LE(r.summary.max_norm_drift, 1e-9);
  EXPECT_GE(r.summary.min_hessian_eigenvalue, -1e-8);
  ASSERT_TRUE(r.final_state.has_value());
}

TEST(Run, RecordsAreConsistent) {
  RunConfig rc = reference_run(0.5 * kPi);
  rc.scenario.duration = 2.0;
  rc.record_traces = true;
  const RunResult r = run(rc);
  ASSERT_EQ(r.records.size(), 20u);
  ASSERT_EQ(r.traces.size(), 20u);
  long substeps = 0;
  for (std::size_t k = 0; k < r.records.size(); ++k) {
    const LogRecord& rec = r.records[k];
    EXPECT_NEAR(rec.t, 0.1 * static_cast<double>(k + 1), 1e-12);
    EXPECT_EQ(rec.substeps, static_cast<int>(r.traces[k].trace.substeps.size()));
    substeps += rec.substeps;
    const Quaternion q_est{rec.q_est[0], Vector3(rec.q_est[1], rec.q_est[2], rec.q_est[3])};
    const Quaternion q_true{rec.q_true[0], Vector3(rec.q_true[1], rec.q_true[2], rec.q_true[3])};
    EXPECT_DOUBLE_EQ(rec.error_angle, mef::quat::attitude_error_angle(q_true, q_est));
  }
  EXPECT_EQ(substeps, r.summary.total_substeps);
  EXPECT_TRUE(run(reference_run(0.5 * kPi)).traces.empty());
}

TEST(Run, SingularSolveReportsEpoch) {
  // A coarse substep cap drives the first epoch into a degenerate curvature.
  RunConfig rc = reference_run(0.99 * kPi);
  rc.filter.delta_step_cap = 0.01;
  const RunResult partial = run_partial(rc);
  ASSERT_TRUE(partial.failure.has_value());
  EXPECT_EQ(static_cast<int>(partial.records.size()), partial.failure_epoch);
  EXPECT_FALSE(partial.final_state.has_value());
  try {
    run(rc);
    FAIL() << "expected RunFailure";
  } catch (const RunFailure& e) {
    EXPECT_EQ(e.epoch(), partial.failure_epoch);
  }
}

TEST(Run, DeterministicAcrossRepeats) {
  RunConfig rc = reference_run(0.99 * kPi);
  rc.inject_noise = true;
  rc.noise.seed = 3;
  rc.scenario.duration = 20.0;
  std::ostringstream a;
  std::ostringstream b;
  write_csv(a, run(rc).records);
  write_csv(b, run(rc).records);
  EXPECT_EQ(a.str(), b.str());
}

TEST(Csv, HeaderAndFormatting) {
  LogRecord rec;
  rec.t = 0.1;
  rec.q_true = {1.0, 0.0, 0.0, 0.0};
  rec.q_est = {1.0 / 3.0, 0.0, 0.0, 0.0};
  rec.substeps = 7;
  std::ostringstream os;
  write_csv(os, {rec});
  std::istringstream in(os.str());
  std::string header;
  std::string line;
  std::getline(in, header);
  std::getline(in, line);
  EXPECT_EQ(header,
            "t,qw,qx,qy,qz,qhw,qhx,qhy,qhz,err_rad,delta_norm,opt_res_1,opt_res_2,opt_res_3,"
            "value_rate,substeps");
  EXPECT_EQ(line.substr(0, 20), "0.10000000000000001,");
  EXPECT_NE(line.find("0.33333333333333331"), std::string::npos);
  EXPECT_EQ(line.substr(line.size() - 2), ",7");
  EXPECT_EQ(std::count(line.begin(), line.end(), ','), 15);
}

TEST(Csv, FileWriteLeavesNoTemporary) {
  const auto dir = std::filesystem::temp_directory_path() / "mef_csv_test";
  std::filesystem::remove_all(dir);
  const auto path = dir / "sub" / "out.csv";
  write_csv_file(path.string(), {});
  std::ifstream in(path);
  std::string header;
  std::getline(in, header);
  EXPECT_EQ(header.rfind("t,qw", 0), 0u);
  int files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir / "sub")) ++files;
  EXPECT_EQ(files, 1);
  std::filesystem::remove_all(dir);
}

}  // namespace
