#pragma once

#include <cmath>

namespace plsim {

inline constexpr double kPi = 3.14159265358979323846;

enum class Domain { Source, Target };

inline double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

// Wrap an angle to (-pi, pi].
inline double wrap_angle(double a) {
  a = std::remainder(a, 2.0 * kPi);
  if (a <= -kPi) a += 2.0 * kPi;
  return a;
}

}  // namespace plsim
