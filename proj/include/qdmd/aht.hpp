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

// Average-Hamiltonian extension of the bilinear fit for stroboscopic data
// with parametric control: Fourier-coefficient control snapshots, polynomial
// feature libraries over those coefficients, the stroboscopic bilinear fit,
// and Magnus-series oracles (closed-form and quadrature) for the qubit
// benchmark system.

#ifndef QDMD_AHT_HPP_
#define QDMD_AHT_HPP_

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/MatrixFunctions>

#include "json.hpp"
#include "qdmd/control.hpp"
#include "qdmd/core.hpp"
#include "qdmd/dmd.hpp"
#include "qdmd/trajectory.hpp"

namespace qdmd {

/// 3x3 generator of Bloch-sphere rotations about the given axis (1, 2 or 3).
/// Vectorizing the matching Pauli matrix yields exactly twice this generator.
inline Matrix rotation_generator(int axis) {
  Matrix J = Matrix::Zero(3, 3);
  switch (axis) {
    case 1:
      J(1, 2) = -1.0;
      J(2, 1) = 1.0;
      break;
    case 2:
      J(0, 2) = 1.0;
      J(2, 0) = -1.0;
      break;
    case 3:
      J(0, 1) = -1.0;
      J(1, 0) = 1.0;
      break;
    default:
      throw ConfigError("rotation_generator: axis must be 1, 2 or 3");
  }
  return J;
}

/// Per-period Fourier coefficients of a control signal: column n holds
/// [a_n1 .. a_nK, b_n1 .. b_nK] for the window [n T, (n+1) T], T = 2 pi / Omega.
struct ControlCoefficients {
  int K = 0;           ///< Harmonic count; each column has length 2 K.
  double Omega = 0.0;  ///< Base frequency in rad per unit time.
  Matrix U_hat;        ///< 2K x n_periods coefficient snapshots.

  int periods() const { return static_cast<int>(U_hat.cols()); }
};

namespace detail {

/// Trapezoid node count for Fourier projections; exact (to rounding) for
/// harmonics far below the Nyquist index 256.
inline constexpr int kFourierQuadPoints = 512;

}  // namespace detail

/// Projects one period of a control signal onto the truncated Fourier basis
/// {cos(k Omega t), sin(k Omega t)}_{k=1..K} by composite-trapezoid
/// quadrature; returns [a_1..a_K, b_1..b_K] for the window starting at
/// period_index * T. Signals already inside the span are recovered exactly
/// up to rounding.
inline Vector fit_fourier_coefficients(const ControlSignal& u, double Omega, int K,
                                       int period_index = 0) {
  if (!(Omega > 0.0)) throw ConfigError("fit_fourier_coefficients: need Omega > 0");
  if (K < 1) throw ConfigError("fit_fourier_coefficients: need K >= 1");
  const double T = 2.0 * kPi / Omega;
  const double t0 = period_index * T;
  const int N = detail::kFourierQuadPoints;
  const double h = T / N;

  Vector coeffs = Vector::Zero(2 * K);
  for (int j = 0; j <= N; ++j) {
    const double t = t0 + j * h;
    const double weight = (j == 0 || j == N) ? 0.5 : 1.0;
    const double val = weight * u(t);
    for (int k = 1; k <= K; ++k) {
      coeffs(k - 1) += val * std::cos(k * Omega * t);
      coeffs(K + k - 1) += val * std::sin(k * Omega * t);
    }
  }
  return coeffs * (2.0 * h / T);
}

/// Same projection from a sampled record covering exactly one period
/// (possibly non-uniform, endpoints included); trapezoid on the given grid.
inline Vector fit_fourier_coefficients(const Vector& times, const Vector& values,
                                       double Omega, int K) {
  if (!(Omega > 0.0)) throw ConfigError("fit_fourier_coefficients: need Omega > 0");
  if (K < 1) throw ConfigError("fit_fourier_coefficients: need K >= 1");
  if (times.size() != values.size()) {
    throw DataError("fit_fourier_coefficients: times/values size mismatch");
  }
  const int M = static_cast<int>(times.size());
  if (M < 4) throw DataError("fit_fourier_coefficients: need at least 4 samples");
  const double T = 2.0 * kPi / Omega;
  const double span = times(M - 1) - times(0);
  if (std::abs(span - T) > 1e-6 * T) {
    throw DataError("fit_fourier_coefficients: samples must span one period");
  }

  Vector coeffs = Vector::Zero(2 * K);
  for (int j = 0; j + 1 < M; ++j) {
    const double dt = times(j + 1) - times(j);
    if (dt <= 0.0) throw DataError("fit_fourier_coefficients: times must increase");
    for (int k = 1; k <= K; ++k) {
      const double c0 = values(j) * std::cos(k * Omega * times(j));
      const double c1 = values(j + 1) * std::cos(k * Omega * times(j + 1));
      const double s0 = values(j) * std::sin(k * Omega * times(j));
      const double s1 = values(j + 1) * std::sin(k * Omega * times(j + 1));
      coeffs(k - 1) += 0.5 * dt * (c0 + c1);
      coeffs(K + k - 1) += 0.5 * dt * (s0 + s1);
    }
  }
  return coeffs * (2.0 / T);
}

/// Synthesizes the control signal matching a coefficient vector
/// [a_1..a_K, b_1..b_K] at base frequency Omega.
inline ControlSignal make_fourier_signal(const Vector& u_hat, double Omega) {
  if (u_hat.size() < 2 || u_hat.size() % 2 != 0) {
    throw ConfigError("make_fourier_signal: coefficient vector must have even length >= 2");
  }
  const int K = static_cast<int>(u_hat.size()) / 2;
  std::vector<double> a(K), b(K);
  for (int k = 0; k < K; ++k) {
    a[k] = u_hat(k);
    b[k] = u_hat(K + k);
  }
  return ControlSignal::fourier(std::move(a), std::move(b), Omega);
}

/// Polynomial feature library over control coefficients: every monomial of
/// total degree 1..P in the 2K coefficients, degree-major and lexicographic
/// within each degree, evaluated column-wise on U_hat.
struct PolynomialLibrary {
  Matrix theta;                    ///< n_features x n_periods.
  std::vector<std::string> names;  ///< Monomial label per row, e.g. "a1^2*b3".
  int harmonics = 0;               ///< K.
  int degree = 0;                  ///< P.

  int features() const { return static_cast<int>(theta.rows()); }
};

namespace detail {

inline std::string monomial_name(const std::vector<int>& tuple, int K) {
  std::string name;
  for (std::size_t i = 0; i < tuple.size();) {
    std::size_t j = i;
    while (j < tuple.size() && tuple[j] == tuple[i]) ++j;
    const int var = tuple[i];
    if (!name.empty()) name += "*";
    name += (var < K ? "a" : "b") + std::to_string(var % K + 1);
    if (j - i > 1) name += "^" + std::to_string(j - i);
    i = j;
  }
  return name;
}

}  // namespace detail

/// Builds the degree-P monomial library of the coefficient snapshots. Row
/// count is sum_{p=1..P} C(2K+p-1, p); rows reproduce their named monomials
/// exactly (left-to-right products in index order).
inline PolynomialLibrary build_library(const Matrix& U_hat, int P) {
  if (P < 1) throw ConfigError("build_library: need degree P >= 1");
  const int nvars = static_cast<int>(U_hat.rows());
  if (nvars < 2 || nvars % 2 != 0) {
    throw ConfigError("build_library: coefficient rows must pair up as (a_k, b_k)");
  }
  const int M = static_cast<int>(U_hat.cols());
  const int K = nvars / 2;

  PolynomialLibrary lib;
  lib.harmonics = K;
  lib.degree = P;

  std::vector<std::vector<int>> tuples;
  for (int p = 1; p <= P; ++p) {
    std::vector<int> idx(p, 0);
    while (true) {
      tuples.push_back(idx);
      int pos = p - 1;
      while (pos >= 0 && idx[pos] == nvars - 1) --pos;
      if (pos < 0) break;
      ++idx[pos];
      for (int q = pos + 1; q < p; ++q) idx[q] = idx[pos];
    }
  }

  lib.theta.resize(static_cast<int>(tuples.size()), M);
  lib.names.reserve(tuples.size());
  for (std::size_t r = 0; r < tuples.size(); ++r) {
    lib.names.push_back(detail::monomial_name(tuples[r], K));
    for (int m = 0; m < M; ++m) {
      double val = U_hat(tuples[r][0], m);
      for (std::size_t q = 1; q < tuples[r].size(); ++q) {
        val *= U_hat(tuples[r][q], m);
      }
      lib.theta(static_cast<int>(r), m) = val;
    }
  }
  return lib;
}

/// Bilinear stroboscopic fit with the polynomial features standing in for
/// the control record: X' ~ A X + B (Theta (x) X). Columns of B are indexed
/// by (feature, state) pairs in the order of the library rows.
inline BiDMDModel aht_bidmd_fit(const Matrix& X, const Matrix& Xp,
                                const PolynomialLibrary& lib, double period = 0.0,
                                int r_tilde = -1, int r_hat = -1) {
  if (X.rows() != Xp.rows() || X.cols() != Xp.cols()) {
    throw DataError("aht_bidmd_fit: X and X' shapes differ");
  }
  if (lib.theta.cols() != X.cols()) {
    throw DataError("aht_bidmd_fit: library and state snapshot column counts differ");
  }
  SnapshotSet snap;
  snap.X = X;
  snap.Xp = Xp;
  snap.U = lib.theta;
  snap.dt = period;
  return bidmd_fit(snap, r_tilde, r_hat);
}

// ---------------------------------------------------------------------------
// Magnus-series oracles for the periodically driven bilinear generator
// L(t) = L0 + u(t) Lc.
// ---------------------------------------------------------------------------

/// Leading constant terms of the one-period average generator; terms[j]
/// carries an implicit Omega^{-j} suppression.
struct MagnusExpansion {
  std::vector<Matrix> terms;
  int order = 0;  ///< Number of retained terms (1..3).

  Matrix sum() const {
    if (terms.empty()) throw DataError("MagnusExpansion: no terms");
    Matrix s = terms[0];
    for (std::size_t j = 1; j < terms.size(); ++j) s += terms[j];
    return s;
  }
};

/// Quadrature-evaluated expansion together with its brute-force reference:
/// the exact one-period propagator and its principal logarithm over T.
struct MagnusNumericResult {
  MagnusExpansion expansion;
  Matrix monodromy;        ///< Exact one-period propagator (RK4).
  Matrix exact_generator;  ///< log(monodromy) / T, principal branch.
};

struct MagnusOptions {
  int nodes_per_axis = 256;  ///< Composite Gauss-Legendre nodes per time axis.
  int panel_points = 16;     ///< Gauss points per composite panel.
  bool convergence_check = true;  ///< Re-evaluate with doubled nodes.
  int monodromy_steps = 4096;     ///< RK4 steps for the exact propagator.
};

namespace detail {

/// Gauss-Legendre nodes and weights on [-1, 1] by Newton iteration on the
/// recurrence for P_g.
inline void gauss_legendre(int g, std::vector<double>* x, std::vector<double>* w) {
  x->assign(g, 0.0);
  w->assign(g, 0.0);
  for (int i = 0; i < (g + 1) / 2; ++i) {
    double xi = std::cos(kPi * (i + 0.75) / (g + 0.5));
    double p1 = 0.0, dp = 0.0;
    for (int it = 0; it < 64; ++it) {
      double pm1 = 0.0, p = 1.0;
      for (int j = 0; j < g; ++j) {
        const double pm2 = pm1;
        pm1 = p;
        p = ((2.0 * j + 1.0) * xi * pm1 - j * pm2) / (j + 1.0);
      }
      p1 = p;
      dp = g * (xi * p - pm1) / (xi * xi - 1.0);
      const double dx = p1 / dp;
      xi -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    (*x)[i] = -xi;
    (*x)[g - 1 - i] = xi;
    (*w)[i] = 2.0 / ((1.0 - xi * xi) * dp * dp);
    (*w)[g - 1 - i] = (*w)[i];
  }
}

/// Composite Gauss-Legendre cumulative integral of a scalar function on
/// [a, b]: full() is the integral over the whole interval, at(t) the integral
/// over [a, t] (prefix over whole panels plus a partial-panel rule).
class CumulativeGauss {
 public:
  CumulativeGauss(std::function<double(double)> f, double a, double b, int nodes,
                  int panel_points)
      : f_(std::move(f)), a_(a), g_(std::max(2, panel_points)) {
    panels_ = std::max(1, (std::max(nodes, g_) + g_ - 1) / g_);
    h_ = (b - a) / panels_;
    gauss_legendre(g_, &xs_, &ws_);
    prefix_.assign(panels_ + 1, 0.0);
    for (int p = 0; p < panels_; ++p) {
      prefix_[p + 1] = prefix_[p] + segment(a_ + p * h_, a_ + (p + 1) * h_);
    }
  }

  double full() const { return prefix_.back(); }

  double at(double t) const {
    const double b = a_ + panels_ * h_;
    t = std::min(std::max(t, a_), b);
    int p = static_cast<int>((t - a_) / h_);
    p = std::min(std::max(p, 0), panels_ - 1);
    return prefix_[p] + segment(a_ + p * h_, t);
  }

 private:
  double segment(double lo, double hi) const {
    const double mid = 0.5 * (lo + hi);
    const double half = 0.5 * (hi - lo);
    double acc = 0.0;
    for (int i = 0; i < g_; ++i) acc += ws_[i] * f_(mid + half * xs_[i]);
    return acc * half;
  }

  std::function<double(double)> f_;
  double a_ = 0.0;
  int g_ = 0;
  int panels_ = 0;
  double h_ = 0.0;
  std::vector<double> xs_, ws_;
  std::vector<double> prefix_;
};

/// The three iterated-integral scalars that multiply the fixed commutators
/// of L(t) = L0 + u(t) Lc (control enters each nested commutator linearly
/// per slot, so the time integrals factor out of the operator structure):
///   mean = (1/T) int u
///   s1   = int int_{t2<t1} (u2 - u1)
///   sa   = int int int_{t3<t2<t1} (u1 + u3 - 2 u2)
///   sb   = int int int_{t3<t2<t1} (2 u1 u3 - u1 u2 - u2 u3)
struct MagnusScalars {
  double mean = 0.0;
  double s1 = 0.0;
  double sa = 0.0;
  double sb = 0.0;
};

inline MagnusScalars magnus_scalars(const ControlSignal& u, double T, int nodes,
                                    int panel_points) {
  const auto eval = [&u](double t) { return u(t); };
  const CumulativeGauss G1(eval, 0.0, T, nodes, panel_points);
  const CumulativeGauss B([&](double t) { return u(t) * t; }, 0.0, T, nodes,
                          panel_points);
  const CumulativeGauss C([&](double t) { return G1.at(t); }, 0.0, T, nodes,
                          panel_points);
  const CumulativeGauss D([&](double t) { return u(t) * G1.at(t); }, 0.0, T, nodes,
                          panel_points);

  MagnusScalars s;
  s.mean = G1.full() / T;
  s.s1 = CumulativeGauss([&](double t) { return G1.at(t) - u(t) * t; }, 0.0, T,
                         nodes, panel_points)
             .full();
  s.sa = CumulativeGauss(
             [&](double t) { return u(t) * 0.5 * t * t + C.at(t) - 2.0 * B.at(t); },
             0.0, T, nodes, panel_points)
             .full();
  s.sb = CumulativeGauss(
             [&](double t) { return 2.0 * u(t) * C.at(t) - u(t) * B.at(t) - D.at(t); },
             0.0, T, nodes, panel_points)
             .full();
  return s;
}

/// RK4 integration of the fundamental matrix of dPhi/dt = L(t) Phi over one
/// period starting at t = 0.
inline Matrix magnus_monodromy(const Matrix& L0, const Matrix& Lc, const ControlSignal& u,
                               double T, int steps) {
  const int d = static_cast<int>(L0.rows());
  Matrix phi = Matrix::Identity(d, d);
  const double h = T / steps;
  const auto L_at = [&](double t) -> Matrix { return L0 + u(t) * Lc; };
  for (int n = 0; n < steps; ++n) {
    const double t = n * h;
    const Matrix k1 = L_at(t) * phi;
    const Matrix k2 = L_at(t + 0.5 * h) * (phi + 0.5 * h * k1);
    const Matrix k3 = L_at(t + 0.5 * h) * (phi + 0.5 * h * k2);
    const Matrix k4 = L_at(t + h) * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  }
  return phi;
}

inline std::vector<Matrix> magnus_terms_from_scalars(const Matrix& L0, const Matrix& Lc,
                                                     const MagnusScalars& s, double T,
                                                     int order) {
  std::vector<Matrix> terms;
  terms.push_back(L0 + s.mean * Lc);
  if (order >= 2) {
    const Matrix C1 = L0 * Lc - Lc * L0;
    terms.push_back((s.s1 / (2.0 * T)) * C1);
    if (order >= 3) {
      const Matrix CL0 = L0 * C1 - C1 * L0;
      const Matrix CLc = Lc * C1 - C1 * Lc;
      terms.push_back((s.sa * CL0 + s.sb * CLc) / (6.0 * T));
    }
  }
  return terms;
}

}  // namespace detail

/// Closed-form expansion for the driven qubit generator
/// L(t) = 2 pi J3 + 2 u(t) J1 with u(t) = u cos(k Omega t) + v sin(k Omega t):
/// terms are { 2 pi J3, (4 pi v / k Omega) J2,
///             -(1/k^2 Omega^2) (2 pi (u^2 + 3 v^2) J3 + 8 pi^2 u J1) }.
inline MagnusExpansion magnus_floquet_analytic(double u, double v, int k, double Omega) {
  if (k <= 0) throw ConfigError("magnus_floquet_analytic: harmonic index must be positive");
  if (!(Omega > 0.0)) throw ConfigError("magnus_floquet_analytic: need Omega > 0");

  const Matrix J1 = rotation_generator(1);
  const Matrix J2 = rotation_generator(2);
  const Matrix J3 = rotation_generator(3);

  MagnusExpansion exp;
  exp.order = 3;
  exp.terms.push_back(2.0 * kPi * J3);
  exp.terms.push_back((4.0 * kPi * v / (k * Omega)) * J2);
  exp.terms.push_back(-(2.0 * kPi * (u * u + 3.0 * v * v) * J3 + 8.0 * kPi * kPi * u * J1) /
                      (static_cast<double>(k) * k * Omega * Omega));
  return exp;
}

/// Evaluates the nested commutator integrals of the one-period average
/// generator by iterated composite Gauss-Legendre quadrature (the control
/// enters each commutator slot linearly, so each term reduces to a scalar
/// iterated integral against a fixed commutator). Also integrates the exact
/// one-period propagator and its principal log for reference. Doubling the
/// node count must reproduce each term; a gross disagreement raises
/// NumericalError.
inline MagnusNumericResult magnus_floquet_numeric(const Matrix& L0, const Matrix& Lc,
                                                  const ControlSignal& u, double T,
                                                  int order = 3,
                                                  const MagnusOptions& opts = {}) {
  if (L0.rows() != L0.cols() || Lc.rows() != Lc.cols() || L0.rows() != Lc.rows()) {
    throw DataError("magnus_floquet_numeric: generators must be square and same size");
  }
  if (!(T > 0.0)) throw ConfigError("magnus_floquet_numeric: need T > 0");
  if (order < 1 || order > 3) {
    throw ConfigError("magnus_floquet_numeric: truncation order must be 1, 2 or 3");
  }
  if (opts.nodes_per_axis < 16) {
    throw ConfigError("magnus_floquet_numeric: need at least 16 nodes per axis");
  }

  const detail::MagnusScalars coarse =
      detail::magnus_scalars(u, T, opts.nodes_per_axis, opts.panel_points);
  std::vector<Matrix> terms =
      detail::magnus_terms_from_scalars(L0, Lc, coarse, T, order);

  if (opts.convergence_check) {
    const detail::MagnusScalars fine =
        detail::magnus_scalars(u, T, 2 * opts.nodes_per_axis, opts.panel_points);
    const std::vector<Matrix> fine_terms =
        detail::magnus_terms_from_scalars(L0, Lc, fine, T, order);
    for (std::size_t j = 0; j < terms.size(); ++j) {
      const double scale = std::max(1.0, fine_terms[j].norm());
      if ((terms[j] - fine_terms[j]).norm() > 0.5 * scale) {
        throw NumericalError(
            "magnus_floquet_numeric: quadrature did not converge when doubling "
            "nodes (term " +
            std::to_string(j) + ")");
      }
    }
    terms = fine_terms;
  }

  MagnusNumericResult result;
  result.expansion.terms = terms;
  result.expansion.order = order;
  result.monodromy = detail::magnus_monodromy(L0, Lc, u, T, opts.monodromy_steps);
  result.exact_generator = result.monodromy.log() / T;
  if (!result.exact_generator.allFinite()) {
    throw NumericalError(
        "magnus_floquet_numeric: principal matrix logarithm of the monodromy "
        "is undefined");
  }
  return result;
}

// ---------------------------------------------------------------------------
// Reports.
// ---------------------------------------------------------------------------

/// Writes `period_index, a1..aK, b1..bK` rows for a coefficient record.
inline void write_control_coefficients_csv(const ControlCoefficients& coeffs,
                                           const std::string& path) {
  if (coeffs.U_hat.rows() != 2 * coeffs.K) {
    throw DataError("write_control_coefficients_csv: malformed coefficient matrix");
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << "period_index";
  for (int k = 1; k <= coeffs.K; ++k) out << ", a" << k;
  for (int k = 1; k <= coeffs.K; ++k) out << ", b" << k;
  out << "\n";
  for (int n = 0; n < coeffs.periods(); ++n) {
    out << n;
    for (int i = 0; i < coeffs.U_hat.rows(); ++i) {
      out << ", " << detail::format_double(coeffs.U_hat(i, n));
    }
    out << "\n";
  }
  if (!out) throw DataError("failed writing '" + path + "'");
}

/// Writes the library's feature names as a JSON array so the columns of a
/// fitted B matrix stay interpretable.
inline void write_feature_names_json(const PolynomialLibrary& lib,
                                     const std::string& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& name : lib.names) arr.push_back(name);
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << arr.dump(2) << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

}  // namespace qdmd

#endif  // QDMD_AHT_HPP_
