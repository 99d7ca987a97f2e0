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

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace qdmd {

inline constexpr const char* kVersion = "1.0.0";
inline constexpr double kPi = 3.14159265358979323846;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;
using Complex = std::complex<double>;

/* Every qdmd failure derives from Error so callers can separate library
 * failures from generic std exceptions.  The three leaf groups mirror the
 * CLI exit codes: ConfigError -> 2, DataError -> 3, NumericalError -> 4. */
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/* Malformed user input: bad dimensions, unsupported conventions, invalid
 * operators or states, out-of-range parameters. */
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(msg) {}
};

/* Structurally valid input the requested algorithm cannot digest: shape
 * mismatches, insufficient or degenerate data, incommensurate sampling
 * grids, unidentifiable fits. */
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

/* Numerical breakdown at run time: non-convergent quadrature, divergent
 * integration, accuracy loss beyond contract. */
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& msg) : Error(msg) {}
};

}  // namespace qdmd
