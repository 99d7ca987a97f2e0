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

#ifndef QDMD_FLOQUET_HPP_
#define QDMD_FLOQUET_HPP_

/// Floquet-style DMD for stroboscopically sampled periodic systems.
///
/// A trajectory sampled s times per period T is reshaped so one snapshot
/// column stacks the s samples of a whole period; successive columns are
/// exactly one period apart. DMD on the stacked record then yields
/// per-period eigenvalues whose principal logarithms are quasi-energies,
/// and stacked modes that resolve the intra-period (fast-time) shape.

#include <cmath>
#include <complex>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qdmd/bloch.hpp"
#include "qdmd/core.hpp"
#include "qdmd/dmd.hpp"
#include "qdmd/trajectory.hpp"

namespace qdmd {

/// Reshapes a stroboscopic record (dt = T/s) into period-stacked snapshot
/// pairs: column n of X stacks samples n*s .. n*s+s-1, column n of Xp the
/// same offsets one period later. Trailing partial periods are dropped.
inline SnapshotSet reshape_stroboscopic(const BlochTrajectory& traj, double T, int s) {
  traj.validate();
  if (s < 1) throw ConfigError("reshape_stroboscopic: need s >= 1");
  if (!(T > 0.0)) throw ConfigError("reshape_stroboscopic: need T > 0");
  if (std::abs(s * traj.dt - T) > 1e-9 * T) {
    throw DataError(
        "reshape_stroboscopic: sampling grid is not commensurate with the "
        "period (need dt = T/s)");
  }
  const int M = traj.samples();
  if (M < 2 * s) {
    throw DataError("reshape_stroboscopic: need at least 2 full periods (M >= 2s)");
  }
  const int d = traj.dim();
  const int n_cols = M / s - 1;

  SnapshotSet snap;
  snap.X.resize(s * d, n_cols);
  snap.Xp.resize(s * d, n_cols);
  snap.U.resize(0, n_cols);
  snap.dt = T;
  for (int n = 0; n < n_cols; ++n) {
    for (int r = 0; r < s; ++r) {
      snap.X.col(n).segment(r * d, d) = traj.states.col(n * s + r);
      snap.Xp.col(n).segment(r * d, d) = traj.states.col((n + 1) * s + r);
    }
  }
  return snap;
}

/// DMD model of the per-period map together with its Floquet reading:
/// stacked modes (intra-period mode shapes) and quasi-energies.
struct FloquetModel {
  DMDModel base;         ///< DMD model over the stacked (s*d) space; dt = T.
  CMatrix stacked_modes; ///< s*d x r_kept, zero-eigenvalue columns removed.
  CVector quasi_energies;  ///< r_kept, principal branch of log(lambda)/T.
  CVector lambdas;         ///< r_kept per-period eigenvalues matching the above.
  double period = 0.0;
  int samples_per_period = 0;
  int dim = 0;       ///< State dimension d of the un-stacked system.
  Vector offsets;    ///< Intra-period sampling offsets r*T/s.
  std::vector<std::string> warnings;
};

/// Fits DMD on period-stacked snapshots and extracts quasi-energies on the
/// principal branch (imaginary parts in (-pi/T, pi/T]). Eigenvalues at
/// numerical zero have no logarithm and are excluded with a warning.
inline FloquetModel floquet_dmd_fit(const SnapshotSet& snap, double T,
                                    int samples_per_period, int rank = -1) {
  if (!(T > 0.0)) throw ConfigError("floquet_dmd_fit: need T > 0");
  if (samples_per_period < 1) throw ConfigError("floquet_dmd_fit: need s >= 1");
  if (snap.X.rows() % samples_per_period != 0) {
    throw DataError("floquet_dmd_fit: stacked row count is not a multiple of s");
  }

  FloquetModel model;
  model.base = dmd_fit(snap, rank);
  model.base.dt = T;
  model.period = T;
  model.samples_per_period = samples_per_period;
  model.dim = static_cast<int>(snap.X.rows()) / samples_per_period;
  model.offsets = Vector::LinSpaced(samples_per_period, 0.0,
                                    (samples_per_period - 1) * T / samples_per_period);
  model.warnings = model.base.warnings;

  const double lam_max = model.base.eigenvalues.size() > 0
                             ? model.base.eigenvalues.cwiseAbs().maxCoeff()
                             : 0.0;
  std::vector<int> keep;
  for (int j = 0; j < model.base.eigenvalues.size(); ++j) {
    if (std::abs(model.base.eigenvalues(j)) <= 1e-14 * lam_max) {
      model.warnings.push_back(
          "floquet_dmd_fit: excluded eigenvalue at numerical zero (mode " +
          std::to_string(j) + "); its logarithm is undefined");
      continue;
    }
    keep.push_back(j);
  }
  model.stacked_modes.resize(snap.X.rows(), static_cast<int>(keep.size()));
  model.quasi_energies.resize(static_cast<int>(keep.size()));
  model.lambdas.resize(static_cast<int>(keep.size()));
  for (int k = 0; k < static_cast<int>(keep.size()); ++k) {
    const Complex lam = model.base.eigenvalues(keep[k]);
    model.stacked_modes.col(k) = model.base.modes.col(keep[k]);
    model.lambdas(k) = lam;
    model.quasi_energies(k) = std::log(lam) / T;
  }
  return model;
}

/// Propagates a stacked state through n_periods of the fitted per-period
/// dynamics; returns (s*d) x (n_periods + 1) with the mode-space projection
/// of stacked_x0 in column 0. Appends to `warnings` when the mode matrix is
/// rank-deficient and the projection is only minimum-norm.
inline Matrix floquet_predict(const FloquetModel& model, const Vector& stacked_x0,
                              int n_periods,
                              std::vector<std::string>* warnings = nullptr) {
  if (stacked_x0.size() != model.stacked_modes.rows()) {
    throw DataError("floquet_predict: stacked state has wrong dimension");
  }
  if (n_periods < 0) throw ConfigError("floquet_predict: negative period count");
  if (model.stacked_modes.cols() == 0) {
    throw DataError("floquet_predict: model retained no modes");
  }

  const auto cod = model.stacked_modes.completeOrthogonalDecomposition();
  if (warnings != nullptr && cod.rank() < model.stacked_modes.cols()) {
    warnings->push_back(
        "floquet_predict: mode matrix is rank-deficient; projection is "
        "minimum-norm");
  }
  CVector amp = cod.solve(stacked_x0.cast<Complex>());
  Matrix out(stacked_x0.size(), n_periods + 1);
  for (int n = 0; n <= n_periods; ++n) {
    out.col(n) = (model.stacked_modes * amp).real();
    amp = amp.cwiseProduct(model.lambdas);
  }
  return out;
}

/// Writes the quasi-energy report: one row per retained mode with the
/// quasi-energy and the per-period eigenvalue in polar form.
inline void write_quasi_energy_csv(const FloquetModel& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "mode_index, re_eps, im_eps, |lambda|, arg_lambda\n";
  for (int j = 0; j < model.quasi_energies.size(); ++j) {
    const Complex eps = model.quasi_energies(j);
    const Complex lam = model.lambdas(j);
    out << j << ", " << detail::format_double(eps.real()) << ", "
        << detail::format_double(eps.imag()) << ", "
        << detail::format_double(std::abs(lam)) << ", "
        << detail::format_double(std::arg(lam)) << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

/// Constant rotating-frame reference model for a pure-tone drive
/// u(t) = u0 cos(2 pi nu t) on the standard driven qubit: after dropping the
/// fast-oscillating terms the frame Hamiltonian is
/// pi (1 - nu) sigma3 + (u0 / 2) sigma1 (trace part discarded).
struct RWAReference {
  double detuning = 0.0;  ///< pi (1 - nu).
  double drive = 0.0;     ///< u0 / 2.
  CMatrix hamiltonian;    ///< 2x2 constant rotating-frame Hamiltonian.
  Matrix generator;       ///< 3x3 Bloch-space generator.
  CVector eigenvalues;    ///< 3 eigenvalues of the generator.
  CMatrix eigenmodes;     ///< Matching eigenvectors.
};

inline RWAReference rwa_reference(double nu, double u0) {
  if (!(nu > 0.0)) throw ConfigError("rwa_reference: need nu > 0");
  RWAReference ref;
  ref.detuning = kPi * (1.0 - nu);
  ref.drive = 0.5 * u0;
  CMatrix sigma3(2, 2), sigma1(2, 2);
  sigma3 << 1, 0, 0, -1;
  sigma1 << 0, 1, 1, 0;
  ref.hamiltonian = ref.detuning * sigma3 + ref.drive * sigma1;
  const HermitianBasis basis = build_basis(2, BasisConvention::kStandardPauli);
  ref.generator = vectorize_hamiltonian(ref.hamiltonian, basis).L;
  Eigen::EigenSolver<Matrix> eig(ref.generator);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("rwa_reference: eigendecomposition failed");
  }
  ref.eigenvalues = eig.eigenvalues();
  ref.eigenmodes = eig.eigenvectors();
  return ref;
}

}  // namespace qdmd

#endif  // QDMD_FLOQUET_HPP_
