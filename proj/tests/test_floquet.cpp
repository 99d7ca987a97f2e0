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

#include "qdmd/floquet.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <vector>

#include <gtest/gtest.h>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdmd/bloch.hpp"
#include "qdmd/control.hpp"
#include "qdmd/model_io.hpp"
#include "qdmd/simulate.hpp"
#include "test_util.hpp"

namespace qdmd {
namespace {

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

// Off-resonance driven qubit measured stroboscopically: drive frequency 1.1,
// four samples per drive period.
struct StroboscopicQubit {
  HermitianBasis basis = build_basis(2, BasisConvention::kStandardPauli);
  VectorizedGenerator drift;
  VectorizedGenerator ctrl;
  double nu = 1.1;
  double T = 1.0 / 1.1;
  ControlSignal drive = ControlSignal::pure_tone(1.1, 1.0);

  StroboscopicQubit() {
    drift = vectorize_hamiltonian(kPi * pauli(3), basis);
    ctrl = vectorize_hamiltonian(pauli(1), basis);
  }

  Matrix generator_at(double t) const { return drift.L + drive(t) * ctrl.L; }

  // Fine simulation over n_periods, stroboscopically reduced to s samples
  // per period.
  BlochTrajectory strobe(int s, int n_periods) const {
    Vector x0(3);
    x0 << 0.0, 0.0, 1.0;
    const int fine_per_strobe = 16;
    const double dt_fine = T / (s * fine_per_strobe);
    const int total = n_periods * s * fine_per_strobe;
    const BlochTrajectory fine = integrate_bilinear(
        drift, {ctrl}, {drive}, x0, 0.0, (total - 1) * dt_fine, dt_fine);
    return sample_stroboscopic(fine, T, s);
  }
};

std::vector<double> sorted_imag(const CVector& v) {
  std::vector<double> out(v.size());
  for (int j = 0; j < v.size(); ++j) out[j] = v(j).imag();
  std::sort(out.begin(), out.end());
  return out;
}

TEST(ReshapeStroboscopicTest, SinglePerPeriodMatchesPlainSnapshots) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(1, 5);
  ASSERT_EQ(strobe.samples(), 5);
  const SnapshotSet reshaped = reshape_stroboscopic(strobe, sys.T, 1);
  BlochTrajectory no_u = strobe;
  no_u.controls.resize(0, strobe.samples());
  const SnapshotSet plain = assemble_snapshots(no_u);
  EXPECT_EQ(reshaped.X, plain.X);
  EXPECT_EQ(reshaped.Xp, plain.Xp);
}

TEST(ReshapeStroboscopicTest, FourPerPeriodShape) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  ASSERT_EQ(strobe.samples(), 16);
  const SnapshotSet snap = reshape_stroboscopic(strobe, sys.T, 4);
  EXPECT_EQ(snap.X.rows(), 12);
  EXPECT_EQ(snap.X.cols(), 3);
  EXPECT_EQ(snap.Xp.rows(), 12);
  EXPECT_EQ(snap.Xp.cols(), 3);

  // Un-stacking X's columns reproduces the original measurement order.
  for (int n = 0; n < snap.cols(); ++n) {
    for (int r = 0; r < 4; ++r) {
      EXPECT_EQ(snap.X.col(n).segment(3 * r, 3), strobe.states.col(4 * n + r))
          << "period " << n << " offset " << r;
    }
  }
}

TEST(ReshapeStroboscopicTest, ColumnsAdvanceByPhaseShiftedMonodromy) {
  const StroboscopicQubit sys;
  const int s = 4;
  const BlochTrajectory strobe = sys.strobe(s, 5);
  const SnapshotSet snap = reshape_stroboscopic(strobe, sys.T, s);
  const auto L_of_t = [&](double t) -> Matrix { return sys.generator_at(t); };
  for (int r = 0; r < s; ++r) {
    const Matrix P_r = test::monodromy_oracle(L_of_t, r * sys.T / s, sys.T);
    for (int n = 0; n < snap.cols(); ++n) {
      EXPECT_LE(
          (snap.Xp.col(n).segment(3 * r, 3) - P_r * snap.X.col(n).segment(3 * r, 3))
              .norm(),
          1e-8)
          << "offset " << r << " period " << n;
    }
  }
}

TEST(ReshapeStroboscopicTest, RejectsBadGrids) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  EXPECT_THROW(reshape_stroboscopic(strobe, sys.T * 1.001, 4), DataError);
  EXPECT_THROW(reshape_stroboscopic(strobe, sys.T, 0), ConfigError);
  EXPECT_THROW(reshape_stroboscopic(strobe, -sys.T, 4), ConfigError);

  BlochTrajectory short_rec = strobe;
  short_rec.times = strobe.times.head(7);
  short_rec.states = strobe.states.leftCols(7);
  short_rec.controls = strobe.controls.leftCols(7);
  EXPECT_THROW(reshape_stroboscopic(short_rec, sys.T, 4), DataError);
}

TEST(FloquetFitTest, UndrivenQubitAliasesToUnitEigenvalues) {
  // Intrinsic frequency 1 sampled once per unit "period": the per-period map
  // is the identity, so quasi-energies wrap to zero.
  const StroboscopicQubit sys;
  Vector x0(3);
  x0 << 0.6, 0.0, 0.8;
  IntegratorOptions opts;
  opts.substeps = 512;  // a full turn per output sample needs a fine step
  const BlochTrajectory traj =
      integrate_bilinear(sys.drift, {}, {}, x0, 0.0, 6.0, 1.0, opts);
  const SnapshotSet snap = reshape_stroboscopic(traj, 1.0, 1);
  const FloquetModel model = floquet_dmd_fit(snap, 1.0, 1);
  ASSERT_GE(model.quasi_energies.size(), 1);
  for (int j = 0; j < model.quasi_energies.size(); ++j) {
    // The point is branch selection: the intrinsic 2*pi rotation must alias
    // to ~0, not to +-2*pi*i. The nearly repeated snapshot columns make the
    // small eigenvalue directions sensitive at the 1e-7 level, so keep the
    // bound comfortably above that but far below 2*pi.
    EXPECT_LE(std::abs(model.quasi_energies(j)), 1e-6) << "mode " << j;
    EXPECT_LE(std::abs(std::exp(model.quasi_energies(j) * model.period) -
                       model.lambdas(j)),
              1e-10);
  }
}

TEST(FloquetFitTest, QuasiEnergiesMatchMonodromyOracle) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  const SnapshotSet snap = reshape_stroboscopic(strobe, sys.T, 4);
  const FloquetModel model = floquet_dmd_fit(snap, sys.T, 4);
  ASSERT_EQ(model.quasi_energies.size(), 3);

  const auto L_of_t = [&](double t) -> Matrix { return sys.generator_at(t); };
  const Matrix P = test::monodromy_oracle(L_of_t, 0.0, sys.T);
  Eigen::EigenSolver<Matrix> eig(P);
  CVector exact(3);
  for (int j = 0; j < 3; ++j) exact(j) = std::log(eig.eigenvalues()(j)) / sys.T;

  const std::vector<double> got = sorted_imag(model.quasi_energies);
  const std::vector<double> want = sorted_imag(exact);
  for (int j = 0; j < 3; ++j) {
    EXPECT_NEAR(got[j], want[j], 1e-6) << "mode " << j;
  }
  for (int j = 0; j < model.quasi_energies.size(); ++j) {
    EXPECT_LE(std::abs(model.quasi_energies(j).real()), 1e-6);
  }
}

TEST(FloquetFitTest, PrincipalBranchInvariant) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  const FloquetModel model =
      floquet_dmd_fit(reshape_stroboscopic(strobe, sys.T, 4), sys.T, 4);
  for (int j = 0; j < model.quasi_energies.size(); ++j) {
    EXPECT_LE(std::abs(std::exp(model.quasi_energies(j) * model.period) -
                       model.lambdas(j)),
              1e-12);
    EXPECT_GT(model.quasi_energies(j).imag(), -kPi / model.period - 1e-12);
    EXPECT_LE(model.quasi_energies(j).imag(), kPi / model.period + 1e-12);
  }
}

TEST(FloquetFitTest, QuasiEnergiesNearRwaPrediction) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  const FloquetModel model =
      floquet_dmd_fit(reshape_stroboscopic(strobe, sys.T, 4), sys.T, 4);
  const RWAReference ref = rwa_reference(sys.nu, 1.0);
  const std::vector<double> got = sorted_imag(model.quasi_energies);
  const std::vector<double> want = sorted_imag(ref.eigenvalues);
  ASSERT_EQ(got.size(), want.size());
  // Near resonance the constant rotating-frame model captures the
  // quasi-energies up to the neglected fast terms (measured gap ~0.02).
  for (std::size_t j = 0; j < got.size(); ++j) {
    EXPECT_NEAR(got[j], want[j], 0.05) << "mode " << j;
  }
}

TEST(FloquetFitTest, GaugeShiftLeavesQuasiEnergiesUnchanged) {
  const StroboscopicQubit sys;
  const int s = 4;
  const BlochTrajectory strobe = sys.strobe(s, 5);  // 20 samples
  ASSERT_EQ(strobe.samples(), 20);

  const auto slice = [&](int from, int count) {
    BlochTrajectory out;
    out.dt = strobe.dt;
    out.times = strobe.times.segment(from, count);
    out.states = strobe.states.middleCols(from, count);
    out.controls = strobe.controls.middleCols(from, count);
    return out;
  };
  const FloquetModel a =
      floquet_dmd_fit(reshape_stroboscopic(slice(0, 16), sys.T, s), sys.T, s);
  const FloquetModel b =
      floquet_dmd_fit(reshape_stroboscopic(slice(1, 16), sys.T, s), sys.T, s);
  const std::vector<double> ga = sorted_imag(a.quasi_energies);
  const std::vector<double> gb = sorted_imag(b.quasi_energies);
  ASSERT_EQ(ga.size(), gb.size());
  for (std::size_t j = 0; j < ga.size(); ++j) {
    EXPECT_NEAR(ga[j], gb[j], 1e-6) << "mode " << j;
  }
}

TEST(FloquetFitTest, RandomPeriodicSystemMatchesMonodromy) {
  // Four-dimensional periodically driven linear system; stroboscopic DMD
  // eigenvalues must coincide with the monodromy spectrum.
  std::mt19937_64 rng(71);
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix A(4, 4), B(4, 4);
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      A(i, j) = dist(rng);
      B(i, j) = 0.5 * dist(rng);
    }
  }
  const Matrix L_a = 0.5 * (A - A.transpose());
  const Matrix L_b = 0.5 * (B - B.transpose());
  VectorizedGenerator drift{L_a, Vector::Zero(4)};
  VectorizedGenerator ctrl{L_b, Vector::Zero(4)};
  const double T = 0.7;
  const ControlSignal u = ControlSignal::pure_tone(1.0 / T, 1.0);

  Vector x0(4);
  x0 << 1.0, 0.2, -0.4, 0.6;
  const int s = 2;
  const double dt_fine = T / 32;
  const BlochTrajectory fine = integrate_bilinear(drift, {ctrl}, {u}, x0, 0.0,
                                                  9 * T - dt_fine, dt_fine);
  const BlochTrajectory strobe = sample_stroboscopic(fine, T, s);
  const FloquetModel model =
      floquet_dmd_fit(reshape_stroboscopic(strobe, T, s), T, s);

  const auto L_of_t = [&](double t) -> Matrix { return drift.L + u(t) * ctrl.L; };
  const Matrix P = test::monodromy_oracle(L_of_t, 0.0, T);
  Eigen::EigenSolver<Matrix> eig(P);
  ASSERT_EQ(model.lambdas.size(), 4);
  for (int j = 0; j < 4; ++j) {
    double best = 1e9;
    for (int k = 0; k < model.lambdas.size(); ++k) {
      best = std::min(best, std::abs(model.lambdas(k) - eig.eigenvalues()(j)));
    }
    EXPECT_LE(best, 1e-8) << "monodromy eigenvalue " << j;
  }
}

TEST(FloquetFitTest, ExcludesZeroEigenvalueWithWarning) {
  // One direction dies in a single step: the per-period map has a zero
  // eigenvalue whose logarithm is undefined.
  Matrix A0(2, 2);
  A0 << 0.9, 0.0, 0.0, 0.0;
  BlochTrajectory traj;
  const int M = 8;
  traj.dt = 1.0;
  traj.times = Vector::LinSpaced(M, 0.0, M - 1.0);
  traj.states.resize(2, M);
  traj.states.col(0) << 1.0, 1.0;
  for (int n = 1; n < M; ++n) traj.states.col(n) = A0 * traj.states.col(n - 1);
  traj.controls.resize(0, M);
  const FloquetModel model =
      floquet_dmd_fit(reshape_stroboscopic(traj, 1.0, 1), 1.0, 1);
  EXPECT_EQ(model.quasi_energies.size(), 1);
  EXPECT_NEAR(model.quasi_energies(0).real(), std::log(0.9), 1e-9);
  bool mentioned = false;
  for (const auto& w : model.warnings) {
    mentioned = mentioned || w.find("logarithm is undefined") != std::string::npos;
  }
  EXPECT_TRUE(mentioned);
}

TEST(FloquetPredictTest, ReconstructsAndPropagatesExactly) {
  const StroboscopicQubit sys;
  const int s = 4;
  const BlochTrajectory strobe = sys.strobe(s, 11);
  const SnapshotSet train = reshape_stroboscopic(strobe, sys.T, s);
  // Train on the first four periods only.
  SnapshotSet head = train;
  head.X = train.X.leftCols(3);
  head.Xp = train.Xp.leftCols(3);
  head.U.resize(0, 3);
  const FloquetModel model = floquet_dmd_fit(head, sys.T, s);

  const Vector y0 = train.X.col(0);
  const Matrix pred = floquet_predict(model, y0, 10);
  EXPECT_LE((pred.col(0) - y0).norm(), 1e-9);
  for (int n = 0; n < 10; ++n) {
    // Column n of the reshaped X is the stacked state of period n.
    EXPECT_LE((pred.col(n) - train.X.col(n)).norm(), 1e-8) << "period " << n;
  }
}

TEST(FloquetPredictTest, HeldOutFifthPeriodWithinTwoPercent) {
  const StroboscopicQubit sys;
  const int s = 4;
  const BlochTrajectory strobe = sys.strobe(s, 6);
  const SnapshotSet all = reshape_stroboscopic(strobe, sys.T, s);
  SnapshotSet head = all;  // first 4 periods: 16 samples = 3 columns
  head.X = all.X.leftCols(3);
  head.Xp = all.Xp.leftCols(3);
  head.U.resize(0, 3);
  const FloquetModel model = floquet_dmd_fit(head, sys.T, s);

  const Matrix pred = floquet_predict(model, all.X.col(0), 4);
  // Period 4 (the fifth period) was never seen during training.
  const Vector truth = all.X.col(4);
  EXPECT_LE((pred.col(4) - truth).norm() / truth.norm(), 0.02);
}

TEST(FloquetPredictTest, RankDeficientModesWarn) {
  FloquetModel model;
  model.period = 1.0;
  model.samples_per_period = 1;
  model.dim = 2;
  model.stacked_modes.resize(2, 2);
  model.stacked_modes.col(0) = CVector::Ones(2);
  model.stacked_modes.col(1) = CVector::Ones(2);  // duplicate column
  model.lambdas = CVector::Ones(2);
  model.quasi_energies = CVector::Zero(2);
  Vector y0(2);
  y0 << 1.0, 0.0;
  std::vector<std::string> warnings;
  const Matrix pred = floquet_predict(model, y0, 1, &warnings);
  EXPECT_FALSE(warnings.empty());
  EXPECT_EQ(pred.cols(), 2);
  EXPECT_THROW(floquet_predict(model, Vector::Zero(3), 1), DataError);
}

TEST(RwaReferenceTest, LimitsAndEigenstructure) {
  // Zero drive: pure detuning about the third axis.
  const RWAReference pure = rwa_reference(1.1, 0.0);
  EXPECT_NEAR(pure.detuning, kPi * (1.0 - 1.1), 1e-15);
  EXPECT_NEAR(pure.drive, 0.0, 1e-15);
  Matrix want = Matrix::Zero(3, 3);
  want(0, 1) = -2.0 * pure.detuning;
  want(1, 0) = 2.0 * pure.detuning;
  EXPECT_LE((pure.generator - want).norm(), 1e-12);

  // Resonant drive: rotation about the first axis at rate u0.
  const RWAReference res = rwa_reference(1.0, 1.0);
  const std::vector<double> imags = sorted_imag(res.eigenvalues);
  EXPECT_NEAR(imags[0], -1.0, 1e-12);
  EXPECT_NEAR(imags[1], 0.0, 1e-12);
  EXPECT_NEAR(imags[2], 1.0, 1e-12);
  // The zero mode is the rotation axis (1, 0, 0).
  int zero_idx = 0;
  for (int j = 0; j < 3; ++j) {
    if (std::abs(res.eigenvalues(j)) < 1e-10) zero_idx = j;
  }
  CVector axis = res.eigenmodes.col(zero_idx);
  axis /= axis(0);
  EXPECT_LE(std::abs(axis(1)), 1e-10);
  EXPECT_LE(std::abs(axis(2)), 1e-10);

  EXPECT_THROW(rwa_reference(0.0, 1.0), ConfigError);
  EXPECT_THROW(rwa_reference(-1.0, 1.0), ConfigError);
}

TEST(FloquetIoTest, QuasiEnergyCsvAndModelJson) {
  const StroboscopicQubit sys;
  const BlochTrajectory strobe = sys.strobe(4, 4);
  const FloquetModel model =
      floquet_dmd_fit(reshape_stroboscopic(strobe, sys.T, 4), sys.T, 4);

  namespace fs = std::filesystem;
  const std::string csv = (fs::path(::testing::TempDir()) / "qdmd_qe.csv").string();
  write_quasi_energy_csv(model, csv);
  std::ifstream in(csv);
  std::string header;
  ASSERT_TRUE(std::getline(in, header));
  EXPECT_EQ(header, "mode_index, re_eps, im_eps, |lambda|, arg_lambda");
  int rows = 0;
  std::string line;
  while (std::getline(in, line)) {
    std::istringstream ss(line);
    std::string field;
    std::getline(ss, field, ',');
    EXPECT_EQ(std::stoi(field), rows);
    std::getline(ss, field, ',');
    EXPECT_DOUBLE_EQ(std::stod(field), model.quasi_energies(rows).real());
    std::getline(ss, field, ',');
    EXPECT_DOUBLE_EQ(std::stod(field), model.quasi_energies(rows).imag());
    std::getline(ss, field, ',');
    EXPECT_DOUBLE_EQ(std::stod(field), std::abs(model.lambdas(rows)));
    std::getline(ss, field, ',');
    EXPECT_DOUBLE_EQ(std::stod(field), std::arg(model.lambdas(rows)));
    ++rows;
  }
  EXPECT_EQ(rows, model.quasi_energies.size());
  fs::remove(csv);

  const std::string js = (fs::path(::testing::TempDir()) / "qdmd_floq.json").string();
  save_model(model.base, js, "floquet");
  const LoadedModel loaded = load_model(js);
  EXPECT_EQ(loaded.method, "floquet");
  EXPECT_EQ(std::get<DMDModel>(loaded.model).A, model.base.A);
  EXPECT_EQ(std::get<DMDModel>(loaded.model).eigenvalues, model.base.eigenvalues);
  fs::remove(js);
}

}  // namespace
}  // namespace qdmd
