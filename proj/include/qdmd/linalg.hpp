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

#ifndef QDMD_LINALG_HPP_
#define QDMD_LINALG_HPP_

/// Truncated-SVD helpers shared by every regression engine.
///
/// Rank policy (used uniformly across the library):
///  * singular values below max(m, n) * eps * sigma_max are always treated
///    as zero;
///  * when no rank is requested, all singular values above
///    1e-10 * sigma_max are retained;
///  * when a rank is requested, singular values inside that rank which fall
///    below 1e-12 * sigma_max are dropped anyway, with a warning recorded.

#include <limits>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "qdmd/core.hpp"

namespace qdmd {

/// Thin SVD truncated to a numerical or user-requested rank.
struct TruncatedSvd {
  Matrix U;  ///< m x r left singular vectors.
  Vector S;  ///< r singular values, descending.
  Matrix V;  ///< n x r right singular vectors.
  int rank = 0;
  std::vector<std::string> warnings;
};

/// Computes the thin SVD of `A` truncated per the library rank policy.
///
/// `requested_rank` <= 0 selects the automatic policy. Requesting more than
/// min(m, n) throws ConfigError; a requested rank reaching into numerically
/// zero singular values is reduced with a warning.
inline TruncatedSvd truncated_svd(const Matrix& A, int requested_rank = -1) {
  if (A.rows() == 0 || A.cols() == 0) {
    throw DataError("truncated_svd: empty matrix");
  }
  const int max_rank = static_cast<int>(std::min(A.rows(), A.cols()));
  if (requested_rank > max_rank) {
    throw ConfigError("truncated_svd: requested rank " + std::to_string(requested_rank) +
                      " exceeds matrix dimensions (max " + std::to_string(max_rank) + ")");
  }

  Eigen::BDCSVD<Matrix> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const Vector& sing = svd.singularValues();
  const double smax = sing.size() > 0 ? sing(0) : 0.0;

  TruncatedSvd out;
  if (smax == 0.0) {
    out.rank = 0;
    out.U.resize(A.rows(), 0);
    out.S.resize(0);
    out.V.resize(A.cols(), 0);
    return out;
  }

  const double eps = std::numeric_limits<double>::epsilon();
  const double hard_tol = static_cast<double>(std::max(A.rows(), A.cols())) * eps * smax;

  int r = 0;
  if (requested_rank <= 0) {
    const double auto_tol = std::max(1e-10 * smax, hard_tol);
    while (r < sing.size() && sing(r) > auto_tol) ++r;
  } else {
    r = requested_rank;
    const double floor_tol = std::max(1e-12 * smax, hard_tol);
    int kept = 0;
    while (kept < r && kept < sing.size() && sing(kept) > floor_tol) ++kept;
    if (kept < r) {
      out.warnings.push_back("truncated_svd: reduced rank from " + std::to_string(r) +
                             " to " + std::to_string(kept) +
                             " (singular values at numerical zero)");
      r = kept;
    }
  }

  out.rank = r;
  out.U = svd.matrixU().leftCols(r);
  out.S = sing.head(r);
  out.V = svd.matrixV().leftCols(r);
  return out;
}

/// Moore-Penrose pseudoinverse via the truncated SVD above.
inline Matrix pseudo_inverse(const Matrix& A, int requested_rank = -1) {
  const TruncatedSvd svd = truncated_svd(A, requested_rank);
  if (svd.rank == 0) return Matrix::Zero(A.cols(), A.rows());
  return svd.V * svd.S.cwiseInverse().asDiagonal() * svd.U.transpose();
}

/// 2-norm condition number of a complex matrix (inf when singular).
inline double condition_number(const CMatrix& A) {
  Eigen::JacobiSVD<CMatrix> svd(A);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s(s.size() - 1) == 0.0) {
    return std::numeric_limits<double>::infinity();
  }
  return s(0) / s(s.size() - 1);
}

}  // namespace qdmd

#endif  // QDMD_LINALG_HPP_
