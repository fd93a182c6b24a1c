#include <numbers>
#include <random>

#include <benchmark/benchmark.h>

#include "mef/filter.hpp"
#include "mef/lie_core.hpp"
#include "mef/oracle.hpp"
#include "mef/quat_attitude.hpp"
#include "mef/sim_harness.hpp"

namespace {

using mef::Matrix;
using mef::Vector;

Vector random_vector(std::mt19937_64& gen, int n) {
  std::normal_distribution<double> normal;
  Vector v(n);
  for (int i = 0; i < n; ++i) v(i) = normal(gen);
  return v;
}

void BM_ExpClosedForm(benchmark::State& state) {
  const mef::GeneratorBasis basis = mef::quat::quaternion_basis();
  std::mt19937_64 gen(1);
  const Vector u = random_vector(gen, 3);
  for (auto _ : state) benchmark::DoNotOptimize(basis.exp(u));
}
BENCHMARK(BM_ExpClosedForm);

void BM_ExpSeries(benchmark::State& state) {
  const mef::GeneratorBasis basis = mef::quat::quaternion_basis();
  std::mt19937_64 gen(1);
  const Vector u = random_vector(gen, 3);
  for (auto _ : state) benchmark::DoNotOptimize(basis.exp_series(u));
}
BENCHMARK(BM_ExpSeries);

void BM_Adjoint(benchmark::State& state) {
  const mef::GeneratorBasis basis = mef::quat::quaternion_basis();
  std::mt19937_64 gen(2);
  const mef::GroupElement x = basis.exp(random_vector(gen, 3));
  for (auto _ : state) benchmark::DoNotOptimize(basis.adjoint(x));
}
BENCHMARK(BM_Adjoint);

mef::FilterConfig quaternion_config() {
  mef::FilterConfig fc;
  fc.origin = mef::quat::origin();
  return fc;
}

// One observer and one held sample at a moderate attitude error.
struct EpochFixture {
  mef::GeneratorBasis basis = mef::quat::quaternion_basis();
  mef::MinimumEnergyObserver observer{basis, quaternion_config()};
  mef::quat::Quaternion q = mef::quat::Quaternion::from_axis_angle(mef::quat::Vector3(1, 2, -1), 0.7);
  mef::GroupElement x = mef::quat::group_from_quaternion(basis, q);
  mef::ObserverState state = observer.init(
      x, mef::sim::initial_hessian(basis, x, q, 1.0) + 0.1 * Matrix::Identity(4, 4));
  mef::SignalSample sample = mef::quat::build_sample(
      basis, q, x, mef::quat::Vector3(0.1, 0.0, 0.2), mef::quat::Vector3(0.0, 0.6, 0.8),
      mef::quat::Vector3(0.0, 0.0, 1.0), mef::quat::NoiseModel{}, 0.1);
};

void BM_CorrectionDelta(benchmark::State& state) {
  EpochFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.observer.correction_delta(f.state, f.sample));
}
BENCHMARK(BM_CorrectionDelta);

void BM_ObserverEpoch(benchmark::State& state) {
  EpochFixture f;
  for (auto _ : state) benchmark::DoNotOptimize(f.observer.advance(f.state, f.sample));
}
BENCHMARK(BM_ObserverEpoch);

void BM_OracleFactorization(benchmark::State& state) {
  const int steps = static_cast<int>(state.range(0));
  std::mt19937_64 gen(3);
  mef::oracle::DiscretizedProblem p;
  p.h0 = Matrix::Identity(4, 4);
  p.prior_mean = mef::quat::origin();
  for (int k = 0; k < steps; ++k) {
    mef::oracle::DiscreteStep s;
    s.dt = 1e-3;
    s.delta = Matrix::Random(4, 4);
    s.input = Matrix::Random(4, 3);
    s.state_gain = Matrix::Identity(3, 3);
    s.output = Matrix::Random(4, 4);
    s.x_hat_inv = Matrix::Identity(4, 4);
    s.measurement = random_vector(gen, 4);
    s.output_gain = Matrix::Identity(4, 4);
    p.steps.push_back(s);
  }
  for (auto _ : state) {
    const mef::oracle::ValueOracle oracle(p);
    benchmark::DoNotOptimize(oracle.value(mef::quat::origin()));
  }
  state.SetComplexityN(steps);
}
BENCHMARK(BM_OracleFactorization)->RangeMultiplier(4)->Range(64, 4096)->Complexity();

void BM_ReferenceRun(benchmark::State& state) {
  mef::sim::RunConfig rc;
  rc.initial_estimate = mef::quat::Quaternion::from_axis_angle(mef::quat::Vector3::UnitX(),
                                                               0.99 * std::numbers::pi);
  rc.inject_noise = state.range(0) != 0;
  rc.noise.seed = 3;
  for (auto _ : state) benchmark::DoNotOptimize(mef::sim::run_partial(rc));
}
BENCHMARK(BM_ReferenceRun)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
