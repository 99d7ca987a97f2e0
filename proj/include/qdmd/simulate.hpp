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
//
// Ground-truth trajectory generation for bilinear control systems
//   xdot = (L0 + sum_j u_j(t) L_j) x + c(t),
// plus zero-order-hold propagation, additive measurement noise, and
// stroboscopic sub-sampling.
//
// Integration uses a fixed-step classical 4th-order Runge-Kutta scheme
// with a configurable number of substeps per output sample (default 64):
// deterministic and bit-reproducible, unlike adaptive stepping.

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include "qdmd/bloch.hpp"
#include "qdmd/control.hpp"
#include "qdmd/core.hpp"
#include "qdmd/trajectory.hpp"

namespace qdmd {

struct IntegratorOptions {
  int substeps = 64;  // RK4 substeps per output sample
};

struct NoiseModel {
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

/* Deterministic standard-normal sampler: mt19937_64 (fully specified by
 * the standard) plus an explicit Box-Muller transform, so noisy
 * trajectories are byte-identical across platforms and standard
 * libraries. */
class GaussianSampler {
 public:
  explicit GaussianSampler(std::uint64_t seed) : rng_(seed) {}

  double operator()() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform01();
    while (u1 <= 0.0) u1 = uniform01();
    const double u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * kPi * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

 private:
  double uniform01() { return static_cast<double>(rng_() >> 11) * 0x1.0p-53; }

  std::mt19937_64 rng_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

/* Integrates xdot = (L0 + sum_j u_j(t) L_j) x + (c0 + sum_j u_j(t) c_j)
 * from t0 to t_end, recording states and control values every dt_out.
 * The endpoint is included when (t_end - t0) is an integer multiple of
 * dt_out. */
inline BlochTrajectory integrate_bilinear(const VectorizedGenerator& L0,
                                          const std::vector<VectorizedGenerator>& L_ctrl,
                                          const std::vector<ControlSignal>& u, const Vector& x0,
                                          double t0, double t_end, double dt_out,
                                          const IntegratorOptions& opts = {}) {
  const int d = L0.dim();
  if (L0.L.cols() != d || L0.c.size() != d) {
    throw DataError("integrate_bilinear: malformed drift generator");
  }
  if (L_ctrl.size() != u.size()) {
    throw DataError("integrate_bilinear: need one control signal per control generator");
  }
  for (const auto& gen : L_ctrl) {
    if (gen.L.rows() != d || gen.L.cols() != d || gen.c.size() != d) {
      throw DataError("integrate_bilinear: control generator dimension mismatch");
    }
  }
  if (x0.size() != d) {
    throw DataError("integrate_bilinear: initial state dimension mismatch");
  }
  if (dt_out <= 0.0 || t_end < t0) {
    throw DataError("integrate_bilinear: need dt_out > 0 and t_end >= t0");
  }
  const int substeps = opts.substeps >= 1 ? opts.substeps : 1;
  const int nc = static_cast<int>(u.size());
  const int n_steps = static_cast<int>(std::floor((t_end - t0) / dt_out + 1e-9));
  const int M = n_steps + 1;

  const auto rhs = [&](double t, const Vector& x) -> Vector {
    Vector dx = L0.L * x + L0.c;
    for (int j = 0; j < nc; ++j) {
      const double uj = u[j](t);
      dx.noalias() += uj * (L_ctrl[j].L * x);
      dx += uj * L_ctrl[j].c;
    }
    return dx;
  };

  BlochTrajectory traj;
  traj.dt = dt_out;
  traj.times.resize(M);
  traj.states.resize(d, M);
  traj.controls.resize(nc, M);

  Vector x = x0;
  for (int m = 0; m < M; ++m) {
    const double tm = t0 + m * dt_out;
    traj.times(m) = tm;
    traj.states.col(m) = x;
    for (int j = 0; j < nc; ++j) traj.controls(j, m) = u[j](tm);
    if (m == M - 1) break;
    const double h = dt_out / substeps;
    for (int i = 0; i < substeps; ++i) {
      const double t = tm + i * h;
      const Vector k1 = rhs(t, x);
      const Vector k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
      const Vector k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
      const Vector k4 = rhs(t + h, x + h * k3);
      x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  }
  return traj;
}

/* Discrete-time propagation under a zero-order hold:
 *
 *   x_{n+1} = e^{L0 dt} x_n + (int_0^dt e^{L0 (dt-s)} L_B ds) u_n ,
 *
 * where u_n is constant on [t_n, t_n + dt).  The convolution integral
 * equals (int_0^dt e^{L0 s} ds) L_B, and the inner integral is evaluated
 * exactly (well below the 1e-10 contract) as the top-right block of
 * exp([[L0, I], [0, 0]] dt), which avoids any invertibility assumption on
 * L0.  An affine drift term c contributes through the same integral. */
inline BlochTrajectory zero_order_hold_propagate(const VectorizedGenerator& L0, const Matrix& L_B,
                                                 const Matrix& u_samples, const Vector& x0,
                                                 double dt) {
  const int d = L0.dim();
  if (dt <= 0.0) {
    throw DataError("zero_order_hold_propagate: dt must be > 0");
  }
  if (L_B.rows() != d) {
    throw DataError("zero_order_hold_propagate: L_B row count must match state dimension");
  }
  if (u_samples.rows() != L_B.cols()) {
    throw DataError("zero_order_hold_propagate: one u row per L_B column required");
  }
  if (x0.size() != d) {
    throw DataError("zero_order_hold_propagate: initial state dimension mismatch");
  }

  Matrix block = Matrix::Zero(2 * d, 2 * d);
  block.topLeftCorner(d, d) = L0.L * dt;
  block.topRightCorner(d, d) = Matrix::Identity(d, d) * dt;
  const Matrix eblock = block.exp();
  const Matrix E = eblock.topLeftCorner(d, d);           // e^{L0 dt}
  const Matrix I1 = eblock.topRightCorner(d, d);         // int_0^dt e^{L0 s} ds
  const Matrix G = I1 * L_B;                             // discrete input matrix
  const Vector affine = I1 * L0.c;

  const int n_steps = static_cast<int>(u_samples.cols());
  const int nc = static_cast<int>(L_B.cols());
  BlochTrajectory traj;
  traj.dt = dt;
  traj.times.resize(n_steps + 1);
  traj.states.resize(d, n_steps + 1);
  traj.controls.resize(nc, n_steps + 1);

  Vector x = x0;
  for (int n = 0; n <= n_steps; ++n) {
    traj.times(n) = n * dt;
    traj.states.col(n) = x;
    const int uc = n < n_steps ? n : n_steps - 1;
    if (nc > 0) traj.controls.col(n) = u_samples.col(uc);
    if (n == n_steps) break;
    x = E * x + G * u_samples.col(n) + affine;
  }
  return traj;
}

/* Adds i.i.d. Gaussian noise with standard deviation sigma to every state
 * entry (controls and times untouched).  Deterministic for a given seed;
 * sampling order is column-major over (sample, component). */
inline BlochTrajectory add_noise(const BlochTrajectory& traj, const NoiseModel& noise) {
  if (noise.sigma < 0.0) {
    throw ConfigError("add_noise: sigma must be >= 0");
  }
  BlochTrajectory out = traj;
  out.sigma = noise.sigma;
  out.seed = noise.seed;
  if (noise.sigma == 0.0) return out;
  GaussianSampler gauss(noise.seed);
  for (int m = 0; m < out.samples(); ++m) {
    for (int j = 0; j < out.dim(); ++j) {
      out.states(j, m) += noise.sigma * gauss();
    }
  }
  return out;
}

/* Sub-samples a trajectory at the stroboscopic grid r * (T/s): every
 * sample whose index is a multiple of (T/s)/dt.  T/s must be an integer
 * multiple of the trajectory spacing to 1e-9 relative. */
inline BlochTrajectory sample_stroboscopic(const BlochTrajectory& traj, double T, int s) {
  traj.validate();
  if (T <= 0.0 || s < 1) {
    throw ConfigError("sample_stroboscopic: need T > 0 and s >= 1");
  }
  const double step = T / s;
  const double ratio = step / traj.dt;
  const auto k = static_cast<long long>(std::llround(ratio));
  if (k < 1 || std::abs(ratio - static_cast<double>(k)) > 1e-9 * ratio) {
    throw DataError("sample_stroboscopic: T/s is not commensurate with the sample spacing");
  }
  const int M = traj.samples();
  const int M_out = static_cast<int>((M - 1) / k) + 1;

  BlochTrajectory out;
  out.dt = step;
  out.sigma = traj.sigma;
  out.seed = traj.seed;
  out.period = T;
  out.times.resize(M_out);
  out.states.resize(traj.dim(), M_out);
  out.controls.resize(traj.num_controls(), M_out);
  for (int m = 0; m < M_out; ++m) {
    const auto src = static_cast<int>(m * k);
    out.times(m) = traj.times(src);
    out.states.col(m) = traj.states.col(src);
    if (traj.num_controls() > 0) out.controls.col(m) = traj.controls.col(src);
  }
  return out;
}

}  // namespace qdmd
