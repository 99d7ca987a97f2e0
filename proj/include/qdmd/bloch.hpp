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
// Bloch vectorization of finite-dimensional quantum master equations.
//
// A density matrix rho on C^N is expanded over a traceless Hermitian basis
// {s_1, ..., s_m}, m = N^2 - 1, with Tr(s_j s_k) = g0 * delta_jk:
//
//     rho = I/N + sum_j (x_j / g0) s_j,     x_j = Tr(rho s_j),
//
// so the von Neumann / GKSL master equation becomes a real affine ODE
// xdot = (L_H + L_D) x + c on R^m.  This header builds the basis, extracts
// its structure constants by trace projection, and vectorizes Hamiltonians
// and dissipators into (L, c).

#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "qdmd/core.hpp"

namespace qdmd {

enum class BasisConvention {
  kStandardPauli,  // Tr(s_j s_k) = 2 delta_jk; qubits (N = 2) only.
  kOrthonormal,    // Tr(s_j s_k) = delta_jk; any N >= 2.
};

inline const char* to_string(BasisConvention c) {
  return c == BasisConvention::kStandardPauli ? "standard_pauli" : "orthonormal";
}

/* A traceless Hermitian operator basis of su(N), together with its
 * normalization g0 = Tr(s_j^2). */
struct HermitianBasis {
  int N = 0;
  BasisConvention convention = BasisConvention::kOrthonormal;
  double g0 = 1.0;
  std::vector<CMatrix> sigma;  // m = N^2 - 1 matrices, each N x N

  int dim() const { return N; }
  int size() const { return static_cast<int>(sigma.size()); }
};

/* Structure constants of the basis, extracted numerically:
 *
 *   [s_j, s_k] = i sum_l f_jkl s_l                      (f totally antisymmetric)
 *   {s_j, s_k} = identity_coeff * delta_jk I + sum_l g_jkl s_l   (g symmetric)
 *
 * with identity_coeff = 2 g0 / N. */
struct StructureConstants {
  int m = 0;
  double identity_coeff = 0.0;
  std::vector<double> f;
  std::vector<double> g;

  double f_at(int j, int k, int l) const { return f[idx(j, k, l)]; }
  double g_at(int j, int k, int l) const { return g[idx(j, k, l)]; }

  std::size_t idx(int j, int k, int l) const {
    return (static_cast<std::size_t>(j) * m + k) * m + l;
  }
};

/* Real affine Bloch-space generator: xdot = L x + c.  c vanishes for
 * closed systems; generators add channel-wise. */
struct VectorizedGenerator {
  Matrix L;
  Vector c;

  int dim() const { return static_cast<int>(L.rows()); }

  VectorizedGenerator& operator+=(const VectorizedGenerator& other) {
    L += other.L;
    c += other.c;
    return *this;
  }
  friend VectorizedGenerator operator+(VectorizedGenerator a, const VectorizedGenerator& b) {
    a += b;
    return a;
  }
};

/* Builds the basis for the requested convention.  The generalized
 * Gell-Mann ordering is used: for each column index k = 2..N, the
 * symmetric then antisymmetric off-diagonal pair for every j < k, followed
 * by the (k-1)-th diagonal element.  For N = 2 this is exactly
 * (sigma_x, sigma_y, sigma_z), scaled by 1/sqrt(2) in the orthonormal
 * convention. */
inline HermitianBasis build_basis(int N, BasisConvention convention) {
  if (N < 2) {
    throw ConfigError("build_basis: dimension must be >= 2, got " + std::to_string(N));
  }
  if (convention == BasisConvention::kStandardPauli && N != 2) {
    throw ConfigError("build_basis: standard_pauli convention is defined for N = 2 only, got N = " +
                      std::to_string(N));
  }

  HermitianBasis basis;
  basis.N = N;
  basis.convention = convention;
  basis.g0 = convention == BasisConvention::kStandardPauli ? 2.0 : 1.0;

  const double scale = convention == BasisConvention::kStandardPauli ? 1.0 : 1.0 / std::sqrt(2.0);
  const Complex kI(0.0, 1.0);

  for (int k = 1; k < N; ++k) {
    for (int j = 0; j < k; ++j) {
      CMatrix sym = CMatrix::Zero(N, N);
      sym(j, k) = 1.0;
      sym(k, j) = 1.0;
      basis.sigma.push_back(scale * sym);

      CMatrix asym = CMatrix::Zero(N, N);
      asym(j, k) = -kI;
      asym(k, j) = kI;
      basis.sigma.push_back(scale * asym);
    }
    CMatrix diag = CMatrix::Zero(N, N);
    const double norm = std::sqrt(2.0 / (static_cast<double>(k) * (k + 1)));
    for (int j = 0; j < k; ++j) diag(j, j) = norm;
    diag(k, k) = -norm * k;
    basis.sigma.push_back(scale * diag);
  }
  return basis;
}

namespace detail {

inline Complex trace_product(const CMatrix& a, const CMatrix& b) {
  return (a.cwiseProduct(b.transpose())).sum();  // Tr(a b)
}

}  // namespace detail

/* Extracts f and g by trace projection against the basis itself:
 * f_jkl = Tr([s_j, s_k] s_l) / (i g0), g_jkl = Tr({s_j, s_k} s_l) / g0. */
inline StructureConstants structure_constants(const HermitianBasis& basis) {
  const int m = basis.size();
  StructureConstants sc;
  sc.m = m;
  sc.identity_coeff = 2.0 * basis.g0 / basis.N;
  sc.f.assign(static_cast<std::size_t>(m) * m * m, 0.0);
  sc.g.assign(static_cast<std::size_t>(m) * m * m, 0.0);

  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      const CMatrix jk = basis.sigma[j] * basis.sigma[k];
      const CMatrix kj = basis.sigma[k] * basis.sigma[j];
      for (int l = 0; l < m; ++l) {
        const Complex t_jkl = detail::trace_product(jk, basis.sigma[l]);
        const Complex t_kjl = detail::trace_product(kj, basis.sigma[l]);
        // [s_j,s_k] is anti-Hermitian and {s_j,s_k} Hermitian, so these
        // projections are real up to round-off.
        sc.f[sc.idx(j, k, l)] = ((t_jkl - t_kjl) / (Complex(0.0, 1.0) * basis.g0)).real();
        sc.g[sc.idx(j, k, l)] = ((t_jkl + t_kjl) / basis.g0).real();
      }
    }
  }
  return sc;
}

/* Vectorizes the coherent part: xdot = L_H x for rho_dot = -i[H, rho].
 * With h_l = Tr(H s_l) / g0 the generator is (L_H)_jk = sum_l h_l f_lkj,
 * which is real antisymmetric whenever H is Hermitian. */
inline VectorizedGenerator vectorize_hamiltonian(const CMatrix& H, const HermitianBasis& basis,
                                                 const StructureConstants& sc) {
  const int N = basis.N;
  if (H.rows() != N || H.cols() != N) {
    throw ConfigError("vectorize_hamiltonian: H must be " + std::to_string(N) + "x" +
                      std::to_string(N));
  }
  const double scale = std::max(1.0, H.norm());
  if ((H - H.adjoint()).norm() > 1e-10 * scale) {
    throw ConfigError("vectorize_hamiltonian: H is not Hermitian");
  }
  if (std::abs(H.trace()) > 1e-10 * scale) {
    throw ConfigError("vectorize_hamiltonian: H must be traceless (remove the identity part)");
  }

  const int m = basis.size();
  Vector h(m);
  for (int l = 0; l < m; ++l) {
    h(l) = detail::trace_product(H, basis.sigma[l]).real() / basis.g0;
  }
  Matrix L = Matrix::Zero(m, m);
  for (int j = 0; j < m; ++j) {
    for (int k = 0; k < m; ++k) {
      double acc = 0.0;
      for (int l = 0; l < m; ++l) acc += h(l) * sc.f_at(l, k, j);
      L(j, k) = acc;
    }
  }
  return {std::move(L), Vector::Zero(m)};
}

inline VectorizedGenerator vectorize_hamiltonian(const CMatrix& H, const HermitianBasis& basis) {
  return vectorize_hamiltonian(H, basis, structure_constants(basis));
}

/* Vectorizes the dissipative part of a GKSL master equation,
 *
 *   D(rho) = sum_{mn} C_mn (D_m rho D_n^+ - 1/2 {D_n^+ D_m, rho}),
 *
 * into the affine pair (L_D, c) with xdot = L_D x + c.  C must be
 * Hermitian positive semi-definite over the given jump-operator set;
 * the D_m must be traceless and orthonormal (Tr(D_i^+ D_j) = delta_ij).
 * The projection is performed directly on the superoperator, so it is
 * exact for any such jump-operator set, not just the basis itself. */
inline VectorizedGenerator vectorize_dissipator(const CMatrix& C,
                                                const std::vector<CMatrix>& D_ops,
                                                const HermitianBasis& basis) {
  const int N = basis.N;
  const int md = static_cast<int>(D_ops.size());
  if (C.rows() != md || C.cols() != md) {
    throw ConfigError("vectorize_dissipator: C must be square with one row per jump operator");
  }
  const double cscale = std::max(1.0, C.norm());
  if ((C - C.adjoint()).norm() > 1e-10 * cscale) {
    throw ConfigError("vectorize_dissipator: C is not Hermitian");
  }
  {
    Eigen::SelfAdjointEigenSolver<CMatrix> es(C);
    if (es.eigenvalues().minCoeff() < -1e-10 * cscale) {
      throw ConfigError("vectorize_dissipator: C is not positive semi-definite");
    }
  }
  for (int i = 0; i < md; ++i) {
    if (D_ops[i].rows() != N || D_ops[i].cols() != N) {
      throw ConfigError("vectorize_dissipator: jump operator " + std::to_string(i) +
                        " has wrong dimension");
    }
    if (std::abs(D_ops[i].trace()) > 1e-8) {
      throw ConfigError("vectorize_dissipator: jump operator " + std::to_string(i) +
                        " is not traceless");
    }
    for (int j = 0; j < md; ++j) {
      const Complex overlap = detail::trace_product(D_ops[i].adjoint(), D_ops[j]);
      const double want = i == j ? 1.0 : 0.0;
      if (std::abs(overlap - want) > 1e-8) {
        throw ConfigError("vectorize_dissipator: jump operators are not orthonormal");
      }
    }
  }

  // Q = sum_mn C_mn D_n^+ D_m collects the anticommutator part once.
  CMatrix Q = CMatrix::Zero(N, N);
  for (int mi = 0; mi < md; ++mi) {
    for (int ni = 0; ni < md; ++ni) {
      Q += C(mi, ni) * (D_ops[ni].adjoint() * D_ops[mi]);
    }
  }
  const auto apply = [&](const CMatrix& X) {
    CMatrix out = CMatrix::Zero(N, N);
    for (int mi = 0; mi < md; ++mi) {
      for (int ni = 0; ni < md; ++ni) {
        out += C(mi, ni) * (D_ops[mi] * X * D_ops[ni].adjoint());
      }
    }
    out -= 0.5 * (Q * X + X * Q);
    return out;
  };

  const int m = basis.size();
  Matrix L = Matrix::Zero(m, m);
  for (int k = 0; k < m; ++k) {
    const CMatrix dk = apply(basis.sigma[k]);
    for (int j = 0; j < m; ++j) {
      L(j, k) = detail::trace_product(basis.sigma[j], dk).real() / basis.g0;
    }
  }
  const CMatrix did = apply(CMatrix::Identity(N, N));
  Vector c(m);
  for (int j = 0; j < m; ++j) {
    c(j) = detail::trace_product(basis.sigma[j], did).real() / N;
  }
  return {std::move(L), std::move(c)};
}

/* x_j = Tr(rho s_j).  rho must be Hermitian with unit trace. */
inline Vector density_to_bloch(const CMatrix& rho, const HermitianBasis& basis) {
  const int N = basis.N;
  if (rho.rows() != N || rho.cols() != N) {
    throw ConfigError("density_to_bloch: rho must be " + std::to_string(N) + "x" +
                      std::to_string(N));
  }
  if ((rho - rho.adjoint()).norm() > 1e-10 * std::max(1.0, rho.norm())) {
    throw ConfigError("density_to_bloch: rho is not Hermitian");
  }
  if (std::abs(rho.trace() - 1.0) > 1e-10) {
    throw ConfigError("density_to_bloch: rho must have unit trace");
  }
  const int m = basis.size();
  Vector x(m);
  for (int j = 0; j < m; ++j) {
    x(j) = detail::trace_product(rho, basis.sigma[j]).real();
  }
  return x;
}

/* rho = I/N + sum_j (x_j / g0) s_j.  The inverse of density_to_bloch; no
 * positivity check is applied, since noisy Bloch vectors may leave the
 * physical set. */
inline CMatrix bloch_to_density(const Vector& x, const HermitianBasis& basis) {
  const int m = basis.size();
  if (x.size() != m) {
    throw ConfigError("bloch_to_density: expected a length-" + std::to_string(m) + " Bloch vector");
  }
  CMatrix rho = CMatrix::Identity(basis.N, basis.N) / static_cast<double>(basis.N);
  for (int j = 0; j < m; ++j) {
    rho += (x(j) / basis.g0) * basis.sigma[j];
  }
  return rho;
}

}  // namespace qdmd
