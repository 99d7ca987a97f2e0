// Copyright 2026 The qdmd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "qdmd/simulate.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdmd/bloch.hpp"
#include "qdmd/control.hpp"
#include "qdmd/trajectory.hpp"
#include "test_util.hpp"

namespace qdmd {
namespace {

constexpr double kPi = 3.14159265358979323846;

CMatrix pauli(int k) {
  const Complex kI(0.0, 1.0);
  CMatrix s(2, 2);
  switch (k) {
    case 1:
      s << 0, 1, 1, 0;
      break;
    case 2:
      s << 0, -kI, kI, 0;
      break;
    default:
      s << 1, 0, 0, -1;
      break;
  }
  return s;
}

// Qubit system used throughout: drift pi*sigma3 plus a sigma1 drive.
struct QubitSystem {
  HermitianBasis basis = build_basis(2, BasisConvention::kStandardPauli);
  VectorizedGenerator drift;
  VectorizedGenerator ctrl;

  QubitSystem() {
    drift = vectorize_hamiltonian(kPi * pauli(3), basis);
    ctrl = vectorize_hamiltonian(pauli(1), basis);
  }
};

Vector north_pole() {
  Vector x0(3);
  x0 << 0.0, 0.0, 1.0;
  return x0;
}

// Midpoint-rule Fourier projection over one period; independent of the
// library's coefficient fitting.
std::pair<Vector, Vector> project_fourier_oracle(const ControlSignal& u, double omega, int K,
                                                 int nodes) {
  const double T = 2.0 * kPi / omega;
  Vector a = Vector::Zero(K), b = Vector::Zero(K);
  const double h = T / nodes;
  for (int i = 0; i < nodes; ++i) {
    const double t = (i + 0.5) * h;
    const double ut = u(t);
    for (int k = 1; k <= K; ++k) {
      a(k - 1) += ut * std::cos(k * omega * t);
      b(k - 1) += ut * std::sin(k * omega * t);
    }
  }
  a *= 2.0 * h / T;
  b *= 2.0 * h / T;
  return {a, b};
}

TEST(ControlSignalTest, ConstructorsEvaluate) {
  const ControlSignal tone = ControlSignal::pure_tone(1.1, 1.0);
  EXPECT_DOUBLE_EQ(tone(0.0), 1.0);
  EXPECT_NEAR(tone(1.0 / 4.4), 0.0, 1e-12);  // quarter period

  const ControlSignal four =
      ControlSignal::fourier({1, 0, 0, 0, 0}, {0, 0, 0, 0, 0}, kPi);
  EXPECT_NEAR(four(1.0), -1.0, 1e-12);

  const ControlSignal pw = ControlSignal::piecewise({0.5, -1.0, 2.0}, 0.1);
  EXPECT_DOUBLE_EQ(pw(0.05), 0.5);
  EXPECT_DOUBLE_EQ(pw(0.15), -1.0);
  EXPECT_DOUBLE_EQ(pw(0.95), 2.0);  // clamped past the record
}

TEST(ControlSignalTest, PeriodicityInvariant) {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  const ControlSignal tone = ControlSignal::pure_tone(1.3, 0.7);
  const ControlSignal four = ControlSignal::fourier(
      {amp(rng), amp(rng), amp(rng)}, {amp(rng), amp(rng), amp(rng)}, 2.0 * kPi / 1.7);
  for (const auto& u : {tone, four}) {
    const double P = u.period();
    for (double t : {0.0, 0.31, 2.9, 7.77}) {
      EXPECT_NEAR(u(t + P), u(t), 1e-12);
      EXPECT_NEAR(u(t + 3 * P), u(t), 1e-12);
    }
  }
  EXPECT_THROW(ControlSignal::piecewise({1.0}, 0.1).period(), ConfigError);
}

TEST(ControlSignalTest, SawtoothFourierProjection) {
  const double T = 2.0;
  const double omega = 2.0 * kPi / T;
  const ControlSignal saw = ControlSignal::sawtooth(1.0, T);
  EXPECT_NEAR(saw(0.5 * T), 0.0, 1e-12);
  EXPECT_NEAR(saw(0.999999 * T), 1.0, 1e-5);

  const auto [a, b] = project_fourier_oracle(saw, omega, 5, 1 << 20);
  for (int k = 1; k <= 5; ++k) {
    EXPECT_NEAR(a(k - 1), 0.0, 1e-8) << "k = " << k;
    EXPECT_NEAR(b(k - 1), -2.0 / (k * kPi), 1e-8) << "k = " << k;
  }
}

TEST(ControlSignalTest, RejectsBadParameters) {
  EXPECT_THROW(ControlSignal::pure_tone(0.0, 1.0), ConfigError);
  EXPECT_THROW(ControlSignal::fourier({}, {}, 1.0), ConfigError);
  EXPECT_THROW(ControlSignal::fourier({1.0}, {1.0, 2.0}, 1.0), ConfigError);
  EXPECT_THROW(ControlSignal::fourier({1.0}, {0.0}, -1.0), ConfigError);
  EXPECT_THROW(ControlSignal::sawtooth(1.0, 0.0), ConfigError);
  EXPECT_THROW(ControlSignal::piecewise({}, 0.1), ConfigError);
}

TEST(IntegrateBilinearTest, NormConservedForClosedSystems) {
  const QubitSystem sys;
  Vector x0(3);
  x0 << 0.6, 0.0, 0.8;
  // Undriven flow.
  const BlochTrajectory undriven =
      integrate_bilinear(sys.drift, {}, {}, x0, 0.0, 10.0, 1.0 / 16);
  for (int m = 0; m < undriven.samples(); ++m) {
    EXPECT_NEAR(undriven.states.col(m).norm(), x0.norm(), 1e-9);
  }
  // Driven flow over ten drive periods.
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  const BlochTrajectory driven =
      integrate_bilinear(sys.drift, {sys.ctrl}, {u}, x0, 0.0, 10.0 / 1.1, 1.0 / 17.6);
  for (int m = 0; m < driven.samples(); ++m) {
    EXPECT_NEAR(driven.states.col(m).norm(), x0.norm(), 1e-8);
  }
}

TEST(IntegrateBilinearTest, MatchesMatrixExponentialWhenUndriven) {
  std::mt19937_64 rng(7);
  const HermitianBasis basis = build_basis(3, BasisConvention::kOrthonormal);
  const VectorizedGenerator gen =
      vectorize_hamiltonian(test::random_hermitian_traceless(3, rng), basis);
  Vector x0 = Vector::Zero(8);
  x0(0) = 0.4;
  x0(5) = -0.5;
  x0(7) = 0.3;
  IntegratorOptions opts;
  opts.substeps = 256;
  const BlochTrajectory traj = integrate_bilinear(gen, {}, {}, x0, 0.0, 10.0, 0.25, opts);
  for (int m = 0; m < traj.samples(); ++m) {
    const Vector want = (gen.L * traj.times(m)).exp() * x0;
    EXPECT_LE((traj.states.col(m) - want).norm(), 1e-9) << "t = " << traj.times(m);
  }
}

TEST(IntegrateBilinearTest, OffResonantDriveSweepsBlochSphere) {
  const QubitSystem sys;
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  const BlochTrajectory traj =
      integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(), 0.0, 5.0, 1.0 / 16);
  ASSERT_EQ(traj.samples(), 81);
  double min_x3 = 1.0, max_x3 = -1.0;
  for (int m = 0; m < traj.samples(); ++m) {
    min_x3 = std::min(min_x3, traj.states(2, m));
    max_x3 = std::max(max_x3, traj.states(2, m));
    EXPECT_LE(traj.states.col(m).norm(), 1.0 + 1e-9);
  }
  // Slightly detuned drive produces deep (near-full) population swings.
  EXPECT_GT(max_x3, 0.999);
  EXPECT_LT(min_x3, -0.3);
  // Control column records u(t_m).
  for (int m = 0; m < traj.samples(); ++m) {
    EXPECT_DOUBLE_EQ(traj.controls(0, m), u(traj.times(m)));
  }
}

TEST(IntegrateBilinearTest, FourthOrderConvergence) {
  const QubitSystem sys;
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  const auto run = [&](int substeps) {
    IntegratorOptions opts;
    opts.substeps = substeps;
    return integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(), 0.0, 2.0, 1.0 / 16,
                              opts);
  };
  const BlochTrajectory ref = run(160);
  const BlochTrajectory coarse = run(8);
  const BlochTrajectory fine = run(16);
  double err_coarse = 0.0, err_fine = 0.0;
  for (int m = 0; m < ref.samples(); ++m) {
    err_coarse = std::max(err_coarse, (coarse.states.col(m) - ref.states.col(m)).norm());
    err_fine = std::max(err_fine, (fine.states.col(m) - ref.states.col(m)).norm());
  }
  EXPECT_GE(err_coarse / err_fine, 8.0);
}

TEST(IntegrateBilinearTest, RejectsMismatchedShapes) {
  const QubitSystem sys;
  const ControlSignal u = ControlSignal::pure_tone(1.0, 1.0);
  EXPECT_THROW(
      integrate_bilinear(sys.drift, {sys.ctrl}, {}, north_pole(), 0.0, 1.0, 0.1),
      DataError);
  EXPECT_THROW(
      integrate_bilinear(sys.drift, {sys.ctrl}, {u}, Vector::Zero(4), 0.0, 1.0, 0.1),
      DataError);
  EXPECT_THROW(
      integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(), 0.0, 1.0, 0.0),
      DataError);
}

TEST(ZeroOrderHoldTest, AutonomousLimit) {
  const QubitSystem sys;
  Vector x0(3);
  x0 << 0.3, -0.4, 0.2;
  const Matrix L_B = Matrix::Zero(3, 1);
  const Matrix u = Matrix::Zero(1, 10);
  const double dt = 0.17;
  const BlochTrajectory traj = zero_order_hold_propagate(sys.drift, L_B, u, x0, dt);
  const Matrix E = (sys.drift.L * dt).exp();
  Vector want = x0;
  for (int n = 0; n < traj.samples(); ++n) {
    EXPECT_LE((traj.states.col(n) - want).norm(), 1e-12);
    want = E * want;
  }
}

TEST(ZeroOrderHoldTest, ZeroDriftCollapsesToEulerStep) {
  VectorizedGenerator L0{Matrix::Zero(3, 3), Vector::Zero(3)};
  Matrix L_B(3, 2);
  L_B << 1, 0, 0, 1, 2, -1;
  Matrix u(2, 3);
  u << 0.5, -1.0, 2.0, 1.0, 0.0, -0.5;
  Vector x0(3);
  x0 << 0.0, 1.0, 0.0;
  const double dt = 0.2;
  const BlochTrajectory traj = zero_order_hold_propagate(L0, L_B, u, x0, dt);
  Vector want = x0;
  for (int n = 0; n < traj.samples(); ++n) {
    EXPECT_LE((traj.states.col(n) - want).norm(), 1e-14);
    if (n < 3) want += dt * L_B * u.col(n);
  }
}

TEST(ZeroOrderHoldTest, MatchesOdeOracle) {
  std::mt19937_64 rng(13);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix A(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) A(i, j) = dist(rng);
  }
  // Stable drift: antisymmetric part plus contraction.
  const Matrix L = 0.5 * (A - A.transpose()) - 0.3 * Matrix::Identity(4, 4);
  Vector c(4);
  c << 0.1, -0.2, 0.05, 0.0;
  Matrix L_B(4, 2);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 2; ++j) L_B(i, j) = dist(rng);
  }
  const int n_steps = 25;
  Matrix u(2, n_steps);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < n_steps; ++j) u(i, j) = dist(rng);
  }
  Vector x0(4);
  x0 << 1.0, 0.0, -1.0, 0.5;
  const double dt = 0.15;

  const BlochTrajectory traj = zero_order_hold_propagate({L, c}, L_B, u, x0, dt);

  // Independent fine-step RK4 with the control held constant per interval.
  Vector x = x0;
  for (int n = 0; n < n_steps; ++n) {
    const Vector force = L_B * u.col(n) + c;
    const auto rhs = [&](const Vector& y) -> Vector { return L * y + force; };
    const int sub = 400;
    const double h = dt / sub;
    for (int i = 0; i < sub; ++i) {
      const Vector k1 = rhs(x);
      const Vector k2 = rhs(x + 0.5 * h * k1);
      const Vector k3 = rhs(x + 0.5 * h * k2);
      const Vector k4 = rhs(x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    EXPECT_LE((traj.states.col(n + 1) - x).norm(), 1e-8) << "step " << n;
  }

  EXPECT_THROW(zero_order_hold_propagate({L, c}, L_B, u, x0, 0.0), DataError);
  EXPECT_THROW(zero_order_hold_propagate({L, c}, L_B.topRows(3), u, x0, dt), DataError);
}

TEST(AddNoiseTest, ZeroSigmaIsIdentity) {
  const QubitSystem sys;
  const BlochTrajectory traj =
      integrate_bilinear(sys.drift, {}, {}, north_pole(), 0.0, 1.0, 0.125);
  const BlochTrajectory noisy = add_noise(traj, {0.0, 99});
  EXPECT_EQ(noisy.states, traj.states);
  EXPECT_EQ(noisy.seed, 99u);
}

TEST(AddNoiseTest, SampleStatistics) {
  BlochTrajectory traj;
  const int M = 4000;  // 12000 scalar entries
  traj.dt = 0.01;
  traj.times = Vector::LinSpaced(M, 0.0, (M - 1) * 0.01);
  traj.states = Matrix::Zero(3, M);
  traj.controls.resize(0, M);
  const BlochTrajectory noisy = add_noise(traj, {0.01, 1234});
  const double n = static_cast<double>(noisy.states.size());
  const double mean = noisy.states.sum() / n;
  const double var = (noisy.states.array() - mean).square().sum() / (n - 1.0);
  const double std = std::sqrt(var);
  EXPECT_GE(std, 0.009);
  EXPECT_LE(std, 0.011);
}

TEST(AddNoiseTest, DeterministicGivenSeed) {
  const QubitSystem sys;
  const BlochTrajectory traj =
      integrate_bilinear(sys.drift, {}, {}, north_pole(), 0.0, 2.0, 0.125);
  const BlochTrajectory a = add_noise(traj, {0.05, 42});
  const BlochTrajectory b = add_noise(traj, {0.05, 42});
  EXPECT_EQ(a.states, b.states);
  const BlochTrajectory other = add_noise(traj, {0.05, 43});
  EXPECT_NE(other.states, a.states);
}

TEST(StroboscopicTest, SubsamplesOnCommensurateGrid) {
  const QubitSystem sys;
  const double T = 1.0 / 1.1;
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  // Fine trajectory at 16 samples per period, 4 periods minus one sample:
  // stroboscopic reduction at s=4 yields the 16-sample record.
  const BlochTrajectory fine = integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(),
                                                  0.0, 4.0 * T - T / 16, T / 16);
  ASSERT_EQ(fine.samples(), 64);
  const BlochTrajectory strobe = sample_stroboscopic(fine, T, 4);
  EXPECT_EQ(strobe.samples(), 16);
  EXPECT_NEAR(strobe.dt, T / 4, 1e-15);
  EXPECT_DOUBLE_EQ(strobe.period, T);
  for (int m = 0; m < strobe.samples(); ++m) {
    EXPECT_EQ(strobe.states.col(m), fine.states.col(4 * m));
  }

  const BlochTrajectory per_period = sample_stroboscopic(fine, T, 1);
  EXPECT_EQ(per_period.samples(), 4);

  EXPECT_THROW(sample_stroboscopic(fine, T * 1.01, 4), DataError);
}

// Sampling a T-periodic flow at T/2 makes the even and odd subsequences
// follow fixed linear recurrences given by the phase-shifted monodromy
// matrices.
TEST(StroboscopicTest, InterleavedMonodromyRecurrence) {
  const QubitSystem sys;
  const double T = 1.0 / 1.1;
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  const BlochTrajectory fine = integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(),
                                                  0.0, 6.0 * T, T / 8);
  const BlochTrajectory strobe = sample_stroboscopic(fine, T, 2);

  const auto L_of_t = [&](double t) -> Matrix { return sys.drift.L + u(t) * sys.ctrl.L; };
  const Matrix phi0 = test::monodromy_oracle(L_of_t, 0.0, T);
  const Matrix phi1 = test::monodromy_oracle(L_of_t, T / 2, T);
  for (int m = 0; m + 2 < strobe.samples(); ++m) {
    const Matrix& phi = (m % 2 == 0) ? phi0 : phi1;
    EXPECT_LE((strobe.states.col(m + 2) - phi * strobe.states.col(m)).norm(), 1e-8)
        << "m = " << m;
  }
}

TEST(TrajectoryCsvTest, RoundTripIsBitExact) {
  const QubitSystem sys;
  const ControlSignal u = ControlSignal::pure_tone(1.1, 1.0);
  BlochTrajectory traj =
      integrate_bilinear(sys.drift, {sys.ctrl}, {u}, north_pole(), 0.0, 2.0, 1.0 / 16);
  traj = add_noise(traj, {0.01, 7});
  traj.period = 1.0;

  const std::string path =
      (std::filesystem::path(::testing::TempDir()) / "qdmd_traj_roundtrip.csv").string();
  write_trajectory_csv(traj, path);
  const BlochTrajectory back = read_trajectory_csv(path);

  ASSERT_EQ(back.samples(), traj.samples());
  ASSERT_EQ(back.dim(), traj.dim());
  ASSERT_EQ(back.num_controls(), traj.num_controls());
  EXPECT_EQ(back.states, traj.states);
  EXPECT_EQ(back.controls, traj.controls);
  EXPECT_EQ(back.times, traj.times);
  EXPECT_DOUBLE_EQ(back.dt, traj.dt);
  EXPECT_DOUBLE_EQ(back.sigma, traj.sigma);
  EXPECT_EQ(back.seed, traj.seed);
  EXPECT_DOUBLE_EQ(back.period, traj.period);
  std::filesystem::remove(path);
}

TEST(TrajectoryCsvTest, RejectsMalformedFiles) {
  namespace fs = std::filesystem;
  const fs::path dir = fs::path(::testing::TempDir());
  {
    std::ofstream out(dir / "qdmd_bad1.csv");
    out << "# dt=0.1\nt, x1\n";  // header but no samples
  }
  EXPECT_THROW(read_trajectory_csv((dir / "qdmd_bad1.csv").string()), DataError);
  {
    std::ofstream out(dir / "qdmd_bad2.csv");
    out << "# dt=0.1\nt, x1, u1\n0.0, 1.0\n";  // short row
  }
  EXPECT_THROW(read_trajectory_csv((dir / "qdmd_bad2.csv").string()), DataError);
  EXPECT_THROW(read_trajectory_csv((dir / "qdmd_missing.csv").string()), DataError);
  fs::remove(dir / "qdmd_bad1.csv");
  fs::remove(dir / "qdmd_bad2.csv");
}

// Projecting an evaluated Fourier signal back onto its span recovers the
// coefficients.
TEST(ControlSignalTest, FourierProjectionRoundTrip) {
  std::mt19937_64 rng(29);
  std::uniform_real_distribution<double> amp(-1.0, 1.0);
  std::vector<double> a(5), b(5);
  for (int k = 0; k < 5; ++k) {
    a[k] = amp(rng);
    b[k] = amp(rng);
  }
  const double omega = kPi;
  const ControlSignal u = ControlSignal::fourier(a, b, omega);
  const auto [ar, br] = project_fourier_oracle(u, omega, 5, 4096);
  for (int k = 0; k < 5; ++k) {
    EXPECT_NEAR(ar(k), a[k], 1e-10);
    EXPECT_NEAR(br(k), b[k], 1e-10);
  }
}

}  // namespace
}  // namespace qdmd
