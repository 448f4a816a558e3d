#pragma once

#include <cmath>

namespace renormflow {

// Point of the closed quadrant [0,inf)^2: masses of type 1 and type 2.
struct Vec2 {
  double x1 = 0.0;
  double x2 = 0.0;

  constexpr double operator[](int i) const { return i == 0 ? x1 : x2; }
  constexpr double& operator[](int i) { return i == 0 ? x1 : x2; }

  friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

inline bool in_quadrant(const Vec2& x) {
  return std::isfinite(x.x1) && std::isfinite(x.x2) && x.x1 >= 0.0 &&
         x.x2 >= 0.0;
}

// h(x) = (1+x1)(1+x2), the positive harmonic function used for the
// size-biased chain and as the weight of the sup norm on the quadrant.
constexpr double h_weight(const Vec2& x) { return (1.0 + x.x1) * (1.0 + x.x2); }

}  // namespace renormflow
