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

#ifndef QDMD_MODEL_IO_HPP_
#define QDMD_MODEL_IO_HPP_

/// JSON serialization for fitted models.
///
/// Schema (all real matrices row-major, complex entries as {"re", "im"}):
///   {
///     "schema": "qdmd-model", "version": 1, "method": "...",
///     "d": int, "Nc": int, "dt": double, "ranks": [int...],
///     "A": [double...], "B": [double...],
///     "eigenvalues": [{"re", "im"}...], "modes": [{"re", "im"}...]
///   }
/// Doubles survive a save/load round trip bit-exactly (shortest round-trip
/// decimal representation on write, exact parse on read).

#include <cmath>
#include <fstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "qdmd/core.hpp"
#include "qdmd/dmd.hpp"

namespace qdmd {

namespace detail {

using nlohmann::ordered_json;

inline void require_finite(double v) {
  if (!std::isfinite(v)) throw DataError("model serialization: non-finite value");
}

inline ordered_json matrix_to_json(const Matrix& A) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      require_finite(A(i, j));
      out.push_back(A(i, j));
    }
  }
  return out;
}

inline Matrix matrix_from_json(const ordered_json& j, int rows, int cols,
                               const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols) {
    throw DataError("model load: field '" + name + "' has wrong length");
  }
  Matrix A(rows, cols);
  int at = 0;
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) A(i, k) = j.at(at++).get<double>();
  }
  return A;
}

inline ordered_json cmatrix_to_json(const CMatrix& A) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      require_finite(A(i, j).real());
      require_finite(A(i, j).imag());
      out.push_back({{"re", A(i, j).real()}, {"im", A(i, j).imag()}});
    }
  }
  return out;
}

inline CMatrix cmatrix_from_json(const ordered_json& j, int rows, int cols,
                                 const std::string& name) {
  if (!j.is_array() || static_cast<int>(j.size()) != rows * cols) {
    throw DataError("model load: field '" + name + "' has wrong length");
  }
  CMatrix A(rows, cols);
  int at = 0;
  for (int i = 0; i < rows; ++i) {
    for (int k = 0; k < cols; ++k) {
      const auto& e = j.at(at++);
      A(i, k) = Complex(e.at("re").get<double>(), e.at("im").get<double>());
    }
  }
  return A;
}

inline ordered_json cvector_to_json(const CVector& v) {
  return cmatrix_to_json(CMatrix(v));
}

inline ordered_json model_header(const std::string& method, int d, int nc, double dt,
                                 std::vector<int> ranks) {
  ordered_json j;
  j["schema"] = "qdmd-model";
  j["version"] = 1;
  j["method"] = method;
  j["d"] = d;
  j["Nc"] = nc;
  require_finite(dt);
  j["dt"] = dt;
  j["ranks"] = ranks;
  return j;
}

inline void write_json_file(const ordered_json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  out << j.dump(2) << "\n";
  if (!out) throw DataError("failed writing '" + path + "'");
}

inline ordered_json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "' for reading");
  try {
    return ordered_json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError("failed parsing '" + path + "': " + e.what());
  }
}

}  // namespace detail

inline nlohmann::ordered_json model_to_json(const DMDModel& m,
                                            const std::string& method = "dmd") {
  using detail::ordered_json;
  ordered_json j = detail::model_header(method, m.dim(), 0, m.dt, {m.rank});
  j["A"] = detail::matrix_to_json(m.A);
  j["B"] = ordered_json::array();
  j["eigenvalues"] = detail::cvector_to_json(m.eigenvalues);
  j["modes"] = detail::cmatrix_to_json(m.modes);
  j["power_fallback"] = m.power_fallback;
  return j;
}

inline nlohmann::ordered_json model_to_json(const DMDcModel& m) {
  using detail::ordered_json;
  ordered_json j = detail::model_header("dmdc", m.dim(), m.num_controls(), m.dt, {m.rank});
  j["A"] = detail::matrix_to_json(m.A);
  j["B"] = detail::matrix_to_json(m.B);
  j["eigenvalues"] = ordered_json::array();
  j["modes"] = ordered_json::array();
  return j;
}

inline nlohmann::ordered_json model_to_json(const BiDMDModel& m) {
  using detail::ordered_json;
  ordered_json j = detail::model_header("bidmd", m.dim(), m.num_controls(), m.dt,
                                        {m.rank_tilde, m.rank_hat});
  j["A"] = detail::matrix_to_json(m.A);
  j["B"] = detail::matrix_to_json(m.B);
  j["eigenvalues"] = detail::cvector_to_json(m.eigenvalues);
  j["modes"] = detail::cmatrix_to_json(m.modes);
  return j;
}

inline void save_model(const DMDModel& m, const std::string& path,
                       const std::string& method = "dmd") {
  detail::write_json_file(model_to_json(m, method), path);
}
inline void save_model(const DMDcModel& m, const std::string& path) {
  detail::write_json_file(model_to_json(m), path);
}
inline void save_model(const BiDMDModel& m, const std::string& path) {
  detail::write_json_file(model_to_json(m), path);
}

/// A deserialized model plus the method tag recorded in the file.
struct LoadedModel {
  std::string method;
  std::variant<DMDModel, DMDcModel, BiDMDModel> model;
};

inline LoadedModel model_from_json(const nlohmann::ordered_json& j) {
  using detail::ordered_json;
  try {
    const int d = j.at("d").get<int>();
    const int nc = j.at("Nc").get<int>();
    const double dt = j.at("dt").get<double>();
    const std::vector<int> ranks = j.at("ranks").get<std::vector<int>>();
    std::string method;
    if (j.contains("method")) {
      method = j.at("method").get<std::string>();
    } else if (ranks.size() == 2) {
      method = "bidmd";
    } else {
      method = nc > 0 ? "dmdc" : "dmd";
    }

    LoadedModel out;
    out.method = method;
    if (method == "bidmd") {
      if (ranks.size() != 2) throw DataError("model load: bidmd needs two ranks");
      BiDMDModel m;
      m.A = detail::matrix_from_json(j.at("A"), d, d, "A");
      m.B = detail::matrix_from_json(j.at("B"), d, nc * d, "B");
      m.rank_tilde = ranks[0];
      m.rank_hat = ranks[1];
      m.controls = nc;
      m.dt = dt;
      m.eigenvalues = detail::cmatrix_from_json(j.at("eigenvalues"), m.rank_hat, 1,
                                                "eigenvalues");
      m.modes = detail::cmatrix_from_json(j.at("modes"), d, m.rank_hat, "modes");
      out.model = std::move(m);
    } else if (method == "dmdc") {
      if (ranks.size() != 1) throw DataError("model load: dmdc needs one rank");
      DMDcModel m;
      m.A = detail::matrix_from_json(j.at("A"), d, d, "A");
      m.B = detail::matrix_from_json(j.at("B"), d, nc, "B");
      m.rank = ranks[0];
      m.dt = dt;
      out.model = std::move(m);
    } else if (method == "dmd" || method == "floquet") {
      if (ranks.size() != 1) throw DataError("model load: dmd needs one rank");
      DMDModel m;
      m.A = detail::matrix_from_json(j.at("A"), d, d, "A");
      m.rank = ranks[0];
      m.dt = dt;
      m.eigenvalues = detail::cmatrix_from_json(j.at("eigenvalues"), m.rank, 1,
                                                "eigenvalues");
      m.modes = detail::cmatrix_from_json(j.at("modes"), d, m.rank, "modes");
      if (j.contains("power_fallback")) {
        m.power_fallback = j.at("power_fallback").get<bool>();
      }
      out.model = std::move(m);
    } else {
      throw DataError("model load: unknown method '" + method + "'");
    }
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("model load: malformed document: ") + e.what());
  }
}

inline LoadedModel load_model(const std::string& path) {
  return model_from_json(detail::read_json_file(path));
}

}  // namespace qdmd

#endif  // QDMD_MODEL_IO_HPP_
