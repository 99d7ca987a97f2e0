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

#ifndef QDMD_DMD_HPP_
#define QDMD_DMD_HPP_

/// Regression engines for identifying discrete-time propagators from
/// Bloch-vector time series: plain DMD, DMD with additive control (DMDc),
/// and bilinear DMD (biDMD) whose control term acts multiplicatively through
/// a Khatri-Rao lifted state.

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qdmd/core.hpp"
#include "qdmd/linalg.hpp"
#include "qdmd/trajectory.hpp"

namespace qdmd {

/// How the control value for the transition x_m -> x_{m+1} is read off a
/// trajectory. kLeftEndpoint takes the recorded sample u(t_m) and is exact
/// for zero-order-hold or inherently discrete inputs. kIntervalAverage takes
/// (u(t_m) + u(t_{m+1})) / 2, the second-order-consistent choice for drives
/// that vary continuously between samples.
enum class ControlSampling { kLeftEndpoint, kIntervalAverage };

/// Averages consecutive control samples onto transition intervals:
/// Nc x M in, Nc x (M-1) out.
inline Matrix interval_average_controls(const Matrix& controls) {
  if (controls.cols() < 2) {
    throw DataError("interval_average_controls: need at least 2 samples");
  }
  const int n = static_cast<int>(controls.cols()) - 1;
  return 0.5 * (controls.leftCols(n) + controls.rightCols(n));
}

/// Paired snapshot matrices extracted from one or more trajectories.
/// Column m of Xp is the state one sample after column m of X; U carries the
/// control values aligned with the X columns.
struct SnapshotSet {
  Matrix X;   ///< d x n_pairs.
  Matrix Xp;  ///< d x n_pairs, shifted by one sample.
  Matrix U;   ///< num_controls x n_pairs (zero rows when no controls).
  double dt = 0.0;

  int dim() const { return static_cast<int>(X.rows()); }
  int cols() const { return static_cast<int>(X.cols()); }
  int num_controls() const { return static_cast<int>(U.rows()); }
  bool has_controls() const { return U.rows() > 0; }
};

/// Splits a trajectory into before/after snapshot pairs.
inline SnapshotSet assemble_snapshots(
    const BlochTrajectory& traj,
    ControlSampling sampling = ControlSampling::kLeftEndpoint) {
  traj.validate();
  const int M = traj.samples();
  if (M < 2) {
    throw DataError("assemble_snapshots: need at least 2 samples, got " +
                    std::to_string(M));
  }
  SnapshotSet snap;
  snap.X = traj.states.leftCols(M - 1);
  snap.Xp = traj.states.rightCols(M - 1);
  if (traj.controls.rows() == 0) {
    snap.U.resize(0, M - 1);
  } else if (sampling == ControlSampling::kIntervalAverage) {
    snap.U = interval_average_controls(traj.controls);
  } else {
    snap.U = traj.controls.leftCols(M - 1);
  }
  snap.dt = traj.dt;
  return snap;
}

/// Concatenates snapshot pairs from independent experiments. Pairs never
/// straddle an experiment boundary; all experiments must share d, the number
/// of controls, and dt.
inline SnapshotSet assemble_snapshots(
    const std::vector<BlochTrajectory>& trajs,
    ControlSampling sampling = ControlSampling::kLeftEndpoint) {
  if (trajs.empty()) throw DataError("assemble_snapshots: no trajectories");
  std::vector<SnapshotSet> parts;
  parts.reserve(trajs.size());
  int total = 0;
  for (const auto& traj : trajs) {
    parts.push_back(assemble_snapshots(traj, sampling));
    const SnapshotSet& p = parts.back();
    const SnapshotSet& first = parts.front();
    if (p.dim() != first.dim() || p.num_controls() != first.num_controls()) {
      throw DataError("assemble_snapshots: inconsistent dimensions across experiments");
    }
    if (std::abs(p.dt - first.dt) > 1e-12 * std::abs(first.dt)) {
      throw DataError("assemble_snapshots: inconsistent sampling intervals");
    }
    total += p.cols();
  }
  SnapshotSet snap;
  const int d = parts.front().dim();
  const int nc = parts.front().num_controls();
  snap.X.resize(d, total);
  snap.Xp.resize(d, total);
  snap.U.resize(nc, total);
  snap.dt = parts.front().dt;
  int at = 0;
  for (const auto& p : parts) {
    snap.X.middleCols(at, p.cols()) = p.X;
    snap.Xp.middleCols(at, p.cols()) = p.Xp;
    if (nc > 0) snap.U.middleCols(at, p.cols()) = p.U;
    at += p.cols();
  }
  return snap;
}

/// Linear discrete-time propagator model fitted by DMD.
struct DMDModel {
  Matrix A;                ///< d x d propagator estimate.
  CMatrix modes;           ///< d x r dynamic modes (eigenvectors of A).
  CVector eigenvalues;     ///< r discrete-time eigenvalues, per step of dt.
  int rank = 0;
  double dt = 0.0;
  /// True when the mode matrix is too ill-conditioned for modal prediction;
  /// prediction then falls back to direct matrix powers.
  bool power_fallback = false;
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(A.rows()); }
};

namespace detail {

/// Numerical rank under the automatic retention policy.
inline int numerical_rank(const Matrix& A) { return truncated_svd(A).rank; }

inline void flag_if_defective(DMDModel& model) {
  if (model.modes.cols() == 0 || condition_number(model.modes) > 1e12) {
    model.power_fallback = true;
    model.warnings.push_back(
        "dmd_fit: mode matrix is numerically defective; predictions use direct "
        "matrix powers");
  }
}

}  // namespace detail

/// Least-squares fit of x_{n+1} = A x_n with a rank-r truncated pseudoinverse.
/// `rank` <= 0 selects the automatic retention policy.
inline DMDModel dmd_fit(const SnapshotSet& snap, int rank = -1) {
  if (snap.cols() < 1) throw DataError("dmd_fit: empty snapshot set");
  if (snap.X.norm() == 0.0) throw DataError("dmd_fit: all-zero snapshot matrix");
  if (rank > 0) {
    const int data_rank = detail::numerical_rank(snap.X);
    if (rank > data_rank) {
      throw ConfigError("dmd_fit: requested rank " + std::to_string(rank) +
                        " exceeds data rank " + std::to_string(data_rank));
    }
  }

  const TruncatedSvd svd = truncated_svd(snap.X, rank);
  DMDModel model;
  model.warnings = svd.warnings;
  model.rank = svd.rank;
  model.dt = snap.dt;

  // P = Xp V S^{-1} appears in the full propagator, the reduced operator,
  // and the modes.
  const Matrix P = snap.Xp * svd.V * svd.S.cwiseInverse().asDiagonal();
  model.A = P * svd.U.transpose();
  const Matrix A_tilde = svd.U.transpose() * P;

  Eigen::EigenSolver<Matrix> eig(A_tilde);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("dmd_fit: eigendecomposition failed to converge");
  }
  model.eigenvalues = eig.eigenvalues();
  // Modes lifted through the data: these satisfy A * mode = lambda * mode
  // identically for nonzero eigenvalues, even after truncation.
  model.modes = P.cast<Complex>() * eig.eigenvectors();
  detail::flag_if_defective(model);
  return model;
}

/// Propagates x0 for n_steps through the modal expansion; returns a
/// d x (n_steps + 1) matrix whose column n is the prediction at step n.
inline Matrix dmd_predict(const DMDModel& model, const Vector& x0, int n_steps) {
  const int d = model.dim();
  if (x0.size() != d) throw DataError("dmd_predict: initial state has wrong dimension");
  if (n_steps < 0) throw ConfigError("dmd_predict: negative step count");

  Matrix out(d, n_steps + 1);
  const auto matrix_powers = [&]() {
    Vector x = x0;
    for (int n = 0; n <= n_steps; ++n) {
      out.col(n) = x;
      if (n < n_steps) x = model.A * x;
    }
  };
  if (model.power_fallback) {
    matrix_powers();
    return out;
  }

  const CVector b =
      model.modes.completeOrthogonalDecomposition().solve(x0.cast<Complex>());
  CVector amp = b;
  for (int n = 0; n <= n_steps; ++n) {
    const CVector xc = model.modes * amp;
    const double scale = std::max(1.0, xc.real().norm());
    if (xc.imag().norm() > 1e-8 * scale) {
      // A near-defective mode matrix slipped past the fit-time condition
      // check; the modal sum is no longer trustworthy, so redo the whole
      // prediction with plain matrix powers.
      matrix_powers();
      return out;
    }
    out.col(n) = xc.real();
    amp = amp.cwiseProduct(model.eigenvalues);
  }
  return out;
}

/// Linear model with additive control fitted by DMDc.
struct DMDcModel {
  Matrix A;  ///< d x d.
  Matrix B;  ///< d x num_controls.
  int rank = 0;
  double dt = 0.0;
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(A.rows()); }
  int num_controls() const { return static_cast<int>(B.cols()); }
};

/// Joint least-squares fit of x_{n+1} = A x_n + B u_n from stacked data.
inline DMDcModel dmdc_fit(const SnapshotSet& snap, int rank = -1) {
  if (!snap.has_controls()) throw DataError("dmdc_fit: snapshot set has no controls");
  if (snap.U.cols() != snap.X.cols()) {
    throw DataError("dmdc_fit: control/state column mismatch");
  }
  const int d = snap.dim();
  const int nc = snap.num_controls();
  if (snap.U.cwiseAbs().maxCoeff() == 0.0 && detail::numerical_rank(snap.X) < d) {
    throw DataError(
        "dmdc_fit: controls are identically zero and states are rank-deficient; "
        "B is not identifiable");
  }

  Matrix stacked(d + nc, snap.cols());
  stacked.topRows(d) = snap.X;
  stacked.bottomRows(nc) = snap.U;

  const TruncatedSvd svd = truncated_svd(stacked, rank);
  DMDcModel model;
  model.warnings = svd.warnings;
  model.rank = svd.rank;
  model.dt = snap.dt;
  if (svd.rank < d + nc) {
    model.warnings.push_back(
        "dmdc_fit: stacked data matrix is rank-deficient; returning the "
        "minimum-norm solution");
  }
  const Matrix G =
      snap.Xp * svd.V * svd.S.cwiseInverse().asDiagonal() * svd.U.transpose();
  model.A = G.leftCols(d);
  model.B = G.rightCols(nc);
  return model;
}

/// Propagates x_{n+1} = A x_n + B u_n; returns d x (n_cols(u) + 1).
inline Matrix dmdc_predict(const DMDcModel& model, const Vector& x0, const Matrix& u_seq) {
  if (x0.size() != model.dim()) {
    throw DataError("dmdc_predict: initial state has wrong dimension");
  }
  if (u_seq.rows() != model.num_controls()) {
    throw DataError("dmdc_predict: control sequence has wrong row count");
  }
  const int n = static_cast<int>(u_seq.cols());
  Matrix out(model.dim(), n + 1);
  out.col(0) = x0;
  for (int m = 0; m < n; ++m) {
    out.col(m + 1) = model.A * out.col(m) + model.B * u_seq.col(m);
  }
  return out;
}

/// Column-wise Kronecker (Khatri-Rao) product: column m is u_m (x) x_m with
/// entry (i*d + j) equal to U(i, m) * X(j, m).
inline Matrix khatri_rao(const Matrix& U, const Matrix& X) {
  if (U.cols() != X.cols()) throw DataError("khatri_rao: column count mismatch");
  const int nc = static_cast<int>(U.rows());
  const int d = static_cast<int>(X.rows());
  Matrix out(nc * d, X.cols());
  for (int i = 0; i < nc; ++i) {
    out.middleRows(i * d, d) = X.array().rowwise() * U.row(i).array();
  }
  return out;
}

/// Bilinear model fitted by biDMD: x_{n+1} = A x_n + B (u_n (x) x_n).
struct BiDMDModel {
  Matrix A;             ///< d x d drift estimate.
  Matrix B;             ///< d x (num_controls * d) bilinear control estimate.
  CMatrix modes;        ///< d x rank_hat drift modes.
  CVector eigenvalues;  ///< rank_hat drift eigenvalues, per step of dt.
  int rank_tilde = 0;   ///< Retained rank of the lifted data matrix.
  int rank_hat = 0;     ///< Retained rank of the output space.
  int controls = 0;
  double dt = 0.0;
  std::vector<std::string> warnings;

  int dim() const { return static_cast<int>(A.rows()); }
  int num_controls() const { return controls; }
};

/// Fits the bilinear model by a truncated least-squares regression on the
/// lifted data [X; U (x) X], then extracts drift eigenvalues and modes from
/// a reduced projection of the drift estimate.
inline BiDMDModel bidmd_fit(const SnapshotSet& snap, int r_tilde = -1, int r_hat = -1) {
  if (!snap.has_controls()) throw DataError("bidmd_fit: snapshot set has no controls");
  if (snap.U.cols() != snap.X.cols()) {
    throw DataError("bidmd_fit: control/state column mismatch");
  }
  if (r_tilde == 0 || (r_tilde < 0 && r_tilde != -1)) {
    throw ConfigError("bidmd_fit: invalid lifted rank");
  }
  if (r_hat == 0 || (r_hat < 0 && r_hat != -1)) {
    throw ConfigError("bidmd_fit: invalid output rank");
  }
  const int d = snap.dim();
  const int nc = snap.num_controls();

  Matrix lifted(d + nc * d, snap.cols());
  lifted.topRows(d) = snap.X;
  lifted.bottomRows(nc * d) = khatri_rao(snap.U, snap.X);

  const TruncatedSvd lift_svd = truncated_svd(lifted, r_tilde);
  if (lift_svd.rank == 0) throw DataError("bidmd_fit: degenerate (all-zero) data");

  BiDMDModel model;
  model.warnings = lift_svd.warnings;
  model.rank_tilde = lift_svd.rank;
  model.controls = nc;
  model.dt = snap.dt;

  const Matrix P = snap.Xp * lift_svd.V * lift_svd.S.cwiseInverse().asDiagonal();
  model.A = P * lift_svd.U.topRows(d).transpose();
  model.B = P * lift_svd.U.bottomRows(nc * d).transpose();

  const TruncatedSvd out_svd = truncated_svd(snap.Xp, r_hat);
  for (const auto& w : out_svd.warnings) model.warnings.push_back(w);
  model.rank_hat = out_svd.rank;
  if (out_svd.rank == 0) throw DataError("bidmd_fit: all-zero successor states");

  const Matrix A_hat = out_svd.U.transpose() * model.A * out_svd.U;
  Eigen::EigenSolver<Matrix> eig(A_hat);
  if (eig.info() != Eigen::Success) {
    throw NumericalError("bidmd_fit: eigendecomposition failed to converge");
  }
  model.eigenvalues = eig.eigenvalues();
  model.modes = (model.A * out_svd.U).cast<Complex>() * eig.eigenvectors();
  return model;
}

/// Iterates the fitted bilinear recurrence under a given control sequence;
/// returns d x (n_cols(u) + 1) with x0 in column 0.
inline Matrix bidmd_predict(const BiDMDModel& model, const Vector& x0, const Matrix& u_seq) {
  const int d = model.dim();
  if (x0.size() != d) throw DataError("bidmd_predict: initial state has wrong dimension");
  if (u_seq.rows() != model.num_controls()) {
    throw DataError("bidmd_predict: control sequence has wrong row count");
  }
  const int n = static_cast<int>(u_seq.cols());
  const int nc = model.num_controls();
  Matrix out(d, n + 1);
  out.col(0) = x0;
  Vector lifted(nc * d);
  for (int m = 0; m < n; ++m) {
    for (int i = 0; i < nc; ++i) {
      lifted.segment(i * d, d) = u_seq(i, m) * out.col(m);
    }
    out.col(m + 1) = model.A * out.col(m) + model.B * lifted;
  }
  return out;
}

/// Oscillation frequencies implied by a model's eigenvalue phases.
struct ResonanceEstimate {
  std::vector<double> frequencies;  ///< Cycles per unit time, one per pair.
  std::vector<double> magnitudes;   ///< |lambda| for the matching entry.
  std::vector<std::string> warnings;
};

namespace detail {

inline ResonanceEstimate resonances_from_spectrum(const CVector& eigenvalues, double dt) {
  if (dt <= 0.0) throw ConfigError("resonance_estimate: model has no sampling interval");
  ResonanceEstimate est;
  std::vector<std::pair<double, double>> found;  // (|lambda|, frequency)
  for (int j = 0; j < eigenvalues.size(); ++j) {
    const Complex lam = eigenvalues(j);
    // Keep one member of each conjugate pair; real eigenvalues carry no
    // oscillation frequency.
    if (lam.imag() <= 1e-10 * (1.0 + std::abs(lam))) continue;
    found.emplace_back(std::abs(lam), std::abs(std::arg(lam)) / (2.0 * kPi * dt));
  }
  std::stable_sort(found.begin(), found.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (const auto& [mag, freq] : found) {
    est.magnitudes.push_back(mag);
    est.frequencies.push_back(freq);
  }
  if (est.frequencies.empty()) {
    est.warnings.push_back(
        "resonance_estimate: spectrum is entirely real; no oscillation "
        "frequencies to report");
  }
  return est;
}

}  // namespace detail

inline ResonanceEstimate resonance_estimate(const DMDModel& model) {
  return detail::resonances_from_spectrum(model.eigenvalues, model.dt);
}

inline ResonanceEstimate resonance_estimate(const BiDMDModel& model) {
  return detail::resonances_from_spectrum(model.eigenvalues, model.dt);
}

}  // namespace qdmd

#endif  // QDMD_DMD_HPP_
