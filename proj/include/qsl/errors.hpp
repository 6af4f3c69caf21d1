// errors.hpp - exception types shared across the library.

#pragma once

#include <stdexcept>
#include <string>

namespace qsl {

// Base for every contract violation raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Requested configuration space is larger than the desk-scale cap.
class DimensionCapExceeded : public Error {
 public:
  using Error::Error;
};

// Degenerate or inconsistent argument (bad interval, wrong sizes, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Two states/operators defined on different grids were combined.
class GridMismatch : public Error {
 public:
  using Error::Error;
};

class EmptyShell : public Error {
 public:
  using Error::Error;
};

class NotHermitian : public Error {
 public:
  using Error::Error;
};

// A diagonal that should be a probability density is significantly negative.
class PositivityViolation : public Error {
 public:
  using Error::Error;
};

// Guiding state vanishes at the evaluation point; the integrator reacts by
// shrinking the step.
class NodeEncountered : public Error {
 public:
  using Error::Error;
};

// Collapse center with zero probability weight.
class ZeroWeight : public Error {
 public:
  using Error::Error;
};

// State has weight outside the energy shell it is assumed to live in.
class ShellLeak : public Error {
 public:
  using Error::Error;
};

// Conditioning configuration lies outside the support of the marginal.
class ZeroSlice : public Error {
 public:
  using Error::Error;
};

// Support conditions of a constructed example are not met.
class SupportViolation : public Error {
 public:
  using Error::Error;
};

// Too many Bohmian trajectories had to be discarded.
class InvalidRun : public Error {
 public:
  using Error::Error;
};

}  // namespace qsl
