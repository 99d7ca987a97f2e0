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
// Control-signal constructors for the simulator: pure tones, truncated
// Fourier series, sawtooth waves, and zero-order-hold piecewise-constant
// records.

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "qdmd/core.hpp"

namespace qdmd {

enum class ControlKind { kPureTone, kFourier, kSawtooth, kPiecewise };

inline const char* to_string(ControlKind k) {
  switch (k) {
    case ControlKind::kPureTone:
      return "pure_tone";
    case ControlKind::kFourier:
      return "fourier";
    case ControlKind::kSawtooth:
      return "sawtooth";
    default:
      return "piecewise";
  }
}

/* A scalar control u(t), evaluable at any time.  Value type; cheap to
 * copy. */
class ControlSignal {
 public:
  // u(t) = amp * cos(2 pi f t), f in cycles per unit time.
  static ControlSignal pure_tone(double freq, double amp) {
    check_finite(freq, "pure_tone frequency");
    check_finite(amp, "pure_tone amplitude");
    if (freq <= 0.0) {
      throw ConfigError("pure_tone: frequency must be > 0");
    }
    ControlSignal s;
    s.kind_ = ControlKind::kPureTone;
    s.omega_ = 2.0 * kPi * freq;
    s.a_ = {amp};
    return s;
  }

  // u(t) = sum_k a_k cos(k Omega t) + b_k sin(k Omega t), Omega in rad
  // per unit time; a and b must have equal length K >= 1.
  static ControlSignal fourier(std::vector<double> a, std::vector<double> b, double omega) {
    if (a.size() != b.size() || a.empty()) {
      throw ConfigError("fourier: a and b must be non-empty and of equal length");
    }
    check_finite(omega, "fourier base frequency");
    if (omega <= 0.0) {
      throw ConfigError("fourier: base frequency must be > 0");
    }
    for (double v : a) check_finite(v, "fourier cosine amplitude");
    for (double v : b) check_finite(v, "fourier sine amplitude");
    ControlSignal s;
    s.kind_ = ControlKind::kFourier;
    s.omega_ = omega;
    s.a_ = std::move(a);
    s.b_ = std::move(b);
    return s;
  }

  // Rising ramp from -amp to +amp over each period, with a jump at every
  // period boundary: u(t) = amp * (2 frac(t/T) - 1).
  static ControlSignal sawtooth(double amp, double period) {
    check_finite(amp, "sawtooth amplitude");
    check_finite(period, "sawtooth period");
    if (period <= 0.0) {
      throw ConfigError("sawtooth: period must be > 0");
    }
    ControlSignal s;
    s.kind_ = ControlKind::kSawtooth;
    s.period_ = period;
    s.a_ = {amp};
    return s;
  }

  // Zero-order hold over a sample record: u(t) = values[floor(t/dt)],
  // clamped to the first/last value outside the record.
  static ControlSignal piecewise(std::vector<double> values, double dt) {
    if (values.empty()) {
      throw ConfigError("piecewise: need at least one value");
    }
    check_finite(dt, "piecewise dt");
    if (dt <= 0.0) {
      throw ConfigError("piecewise: dt must be > 0");
    }
    for (double v : values) check_finite(v, "piecewise value");
    ControlSignal s;
    s.kind_ = ControlKind::kPiecewise;
    s.period_ = dt;  // reused as the hold interval
    s.a_ = std::move(values);
    return s;
  }

  double operator()(double t) const {
    switch (kind_) {
      case ControlKind::kPureTone:
        return a_[0] * std::cos(omega_ * t);
      case ControlKind::kFourier: {
        double u = 0.0;
        for (std::size_t k = 0; k < a_.size(); ++k) {
          const double phase = (k + 1) * omega_ * t;
          u += a_[k] * std::cos(phase) + b_[k] * std::sin(phase);
        }
        return u;
      }
      case ControlKind::kSawtooth: {
        double frac = t / period_ - std::floor(t / period_);
        return a_[0] * (2.0 * frac - 1.0);
      }
      default: {
        if (t <= 0.0) return a_.front();
        const auto idx = static_cast<std::size_t>(t / period_);
        return idx >= a_.size() ? a_.back() : a_[idx];
      }
    }
  }

  ControlKind kind() const { return kind_; }

  bool is_periodic() const { return kind_ != ControlKind::kPiecewise; }

  // Fundamental period of the signal; error for piecewise records.
  double period() const {
    switch (kind_) {
      case ControlKind::kPureTone:
        return 2.0 * kPi / omega_;
      case ControlKind::kFourier:
        return 2.0 * kPi / omega_;
      case ControlKind::kSawtooth:
        return period_;
      default:
        throw ConfigError("period: piecewise-constant signals are not periodic");
    }
  }

  // Base angular frequency for tone/Fourier kinds.
  double omega() const { return omega_; }
  const std::vector<double>& cos_amplitudes() const { return a_; }
  const std::vector<double>& sin_amplitudes() const { return b_; }

 private:
  static void check_finite(double v, const char* what) {
    if (!std::isfinite(v)) {
      throw ConfigError(std::string(what) + ": value must be finite");
    }
  }

  ControlKind kind_ = ControlKind::kPureTone;
  double omega_ = 0.0;   // rad/time (tone, fourier)
  double period_ = 0.0;  // sawtooth period or piecewise hold interval
  std::vector<double> a_;
  std::vector<double> b_;
};

}  // namespace qdmd
