#pragma once

#include <stdexcept>
#include <string>

namespace renormflow {

// Base for every error raised by the library. Subclasses map onto the
// exit-code contract of the CLI (see experiment.hpp).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A diffusion function returned a negative or non-finite value.
class MalformedFunction : public Error {
 public:
  using Error::Error;
};

// Fixed-point coefficients with (b1+c1)(b2+c2) == 0.
class DegeneratePair : public Error {
 public:
  using Error::Error;
};

// Operator applied outside its domain: growth coefficient a >= c, or a
// closed-form iterate that diverges.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Start at the origin with an interior attraction point while one of the
// components vanishes on both axes; the martingale problem may be ill-posed.
class ForbiddenStart : public Error {
 public:
  using Error::Error;
};

// phi_inv asked for a point at infinity.
class AnchorError : public Error {
 public:
  using Error::Error;
};

// Lattice coordinate exceeded the overflow guard, or an unstable time step.
class BlowUp : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace renormflow
