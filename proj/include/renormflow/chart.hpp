#pragma once

#include "renormflow/error.hpp"
#include "renormflow/vec2.hpp"

namespace renormflow {

// Compactifying chart phi(x) = (x1/(1+x1), x2/(1+x2)) of the quadrant onto
// [0,1)^2. The points at infinity map to the edges u = 1 and v = 1.
constexpr Vec2 phi(const Vec2& x) { return {x.x1 / (1.0 + x.x1), x.x2 / (1.0 + x.x2)}; }

inline Vec2 phi_inv(const Vec2& y) {
  if (!(y.x1 >= 0.0 && y.x1 < 1.0 && y.x2 >= 0.0 && y.x2 < 1.0)) {
    throw AnchorError("phi_inv is defined on [0,1)^2 only; coordinate 1 is a point at infinity");
  }
  return {y.x1 / (1.0 - y.x1), y.x2 / (1.0 - y.x2)};
}

}  // namespace renormflow
