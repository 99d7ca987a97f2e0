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
// Time-series container for Bloch-vector measurement records plus its CSV
// external format.  CSV layout: `#`-prefixed key=value metadata lines
// (dt, sigma, seed, and T when periodic), one header row
// `t, x1..x{d}, u1..u{Nc}`, then one row per sample with doubles printed
// to 17 significant digits so values round-trip bit-exactly.

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "qdmd/core.hpp"

namespace qdmd {

struct BlochTrajectory {
  Vector times;      // M sample times, uniformly spaced
  Matrix states;     // d x M, column m = x(t_m)
  Matrix controls;   // Nc x M, column m = u(t_m); Nc may be 0
  double dt = 0.0;   // uniform spacing
  double sigma = 0.0;
  std::uint64_t seed = 0;
  double period = 0.0;  // declared period T; 0 when not set

  int samples() const { return static_cast<int>(times.size()); }
  int dim() const { return static_cast<int>(states.rows()); }
  int num_controls() const { return static_cast<int>(controls.rows()); }

  void validate() const {
    const int M = samples();
    if (M == 0 || states.cols() != M) {
      throw DataError("trajectory: states column count must match times length");
    }
    if (controls.size() > 0 && controls.cols() != M) {
      throw DataError("trajectory: controls column count must match times length");
    }
    for (int m = 1; m < M; ++m) {
      const double step = times(m) - times(m - 1);
      if (step <= 0.0 || std::abs(step - dt) > 1e-12 * std::max(1.0, std::abs(dt))) {
        throw DataError("trajectory: times must be strictly increasing and uniformly spaced");
      }
    }
  }
};

namespace detail {

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace detail

inline void write_trajectory_csv(const BlochTrajectory& traj, const std::string& path) {
  traj.validate();
  std::ofstream out(path);
  if (!out) {
    throw DataError("write_trajectory_csv: cannot open '" + path + "' for writing");
  }
  out << "# dt=" << detail::format_double(traj.dt) << "\n";
  out << "# sigma=" << detail::format_double(traj.sigma) << "\n";
  out << "# seed=" << traj.seed << "\n";
  if (traj.period > 0.0) {
    out << "# T=" << detail::format_double(traj.period) << "\n";
  }
  out << "t";
  for (int j = 0; j < traj.dim(); ++j) out << ", x" << (j + 1);
  for (int j = 0; j < traj.num_controls(); ++j) out << ", u" << (j + 1);
  out << "\n";
  for (int m = 0; m < traj.samples(); ++m) {
    out << detail::format_double(traj.times(m));
    for (int j = 0; j < traj.dim(); ++j) {
      out << ", " << detail::format_double(traj.states(j, m));
    }
    for (int j = 0; j < traj.num_controls(); ++j) {
      out << ", " << detail::format_double(traj.controls(j, m));
    }
    out << "\n";
  }
  if (!out) {
    throw DataError("write_trajectory_csv: write to '" + path + "' failed");
  }
}

inline BlochTrajectory read_trajectory_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("read_trajectory_csv: cannot open '" + path + "'");
  }
  BlochTrajectory traj;
  std::string line;
  int d = -1;
  int nc = 0;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) continue;
      std::string key = line.substr(1, eq - 1);
      key.erase(0, key.find_first_not_of(" \t"));
      key.erase(key.find_last_not_of(" \t") + 1);
      const std::string value = line.substr(eq + 1);
      if (key == "dt") {
        traj.dt = std::stod(value);
      } else if (key == "sigma") {
        traj.sigma = std::stod(value);
      } else if (key == "seed") {
        traj.seed = std::stoull(value);
      } else if (key == "T") {
        traj.period = std::stod(value);
      }
      continue;
    }
    if (d < 0) {
      // Header row: count x and u columns.
      std::istringstream hdr(line);
      std::string tok;
      d = 0;
      while (std::getline(hdr, tok, ',')) {
        tok.erase(0, tok.find_first_not_of(" \t"));
        tok.erase(tok.find_last_not_of(" \t\r") + 1);
        if (tok.empty() || tok == "t") continue;
        if (tok[0] == 'x') {
          ++d;
        } else if (tok[0] == 'u') {
          ++nc;
        } else {
          throw DataError("read_trajectory_csv: unexpected column '" + tok + "'");
        }
      }
      if (d == 0) {
        throw DataError("read_trajectory_csv: no state columns in header");
      }
      continue;
    }
    std::istringstream row(line);
    std::string tok;
    std::vector<double> values;
    while (std::getline(row, tok, ',')) {
      values.push_back(std::stod(tok));
    }
    if (static_cast<int>(values.size()) != 1 + d + nc) {
      throw DataError("read_trajectory_csv: row with " + std::to_string(values.size()) +
                      " fields, expected " + std::to_string(1 + d + nc));
    }
    rows.push_back(std::move(values));
  }
  if (d < 0 || rows.empty()) {
    throw DataError("read_trajectory_csv: no samples in '" + path + "'");
  }

  const int M = static_cast<int>(rows.size());
  traj.times.resize(M);
  traj.states.resize(d, M);
  traj.controls.resize(nc, M);
  for (int m = 0; m < M; ++m) {
    traj.times(m) = rows[m][0];
    for (int j = 0; j < d; ++j) traj.states(j, m) = rows[m][1 + j];
    for (int j = 0; j < nc; ++j) traj.controls(j, m) = rows[m][1 + d + j];
  }
  traj.validate();
  return traj;
}

}  // namespace qdmd
