// subsystem.hpp - conditional and effective density matrices of a
// subsystem x given the actual configuration Y of its environment y.
//
// A universal kernel W lives on the full lattice; the x-part lives on a grid
// with |x| particles and the same axis. Kernels stay in the dx^N convention
// of their own grid.

#pragma once

#include <optional>
#include <vector>

#include "qsl/hilbert.hpp"

namespace qsl {

// 0-based particle indices.
struct Splitting {
  std::vector<int> x;
  std::vector<int> y;

  void validate(int particle_count) const;
};

struct ConditionalDM {
  DensityMatrix w;               // on the x-grid, unit trace
  std::vector<double> y;         // conditioning configuration after snapping
  std::vector<int> y_sites;
  bool effective = false;
};

// Declared coarse-graining of environment configuration space: blocks of
// `block` lattice sites per y-axis.
struct MacroCoarsening {
  int block = 4;
  double mass_threshold = 1e-8;
  double purity_epsilon = 1e-6;
};

Grid subsystem_grid(const Grid& full, std::size_t particles);

// Throws ZeroSlice when W vanishes on the Y slice.
ConditionalDM conditional_dm(const DensityMatrix& w, const Splitting& split, std::span<const double> y);

// Conditional density matrix flagged effective when (a) it is numerically
// pure, (b) the coarse cells carrying environment mass split into
// Chebyshev-connected components and the one holding Y is isolated from
// the rest by empty cells, and (c) W restricted to that component has a
// pure x-reduced state. Otherwise none.
std::optional<ConditionalDM> effective_dm(const DensityMatrix& w, const Splitting& split, std::span<const double> y,
                                          const MacroCoarsening& coarsening = {});

// Density of x given Y on the x-grid (sums to 1 with weight dx^|x|).
RealVector conditional_probability(const DensityMatrix& w, const Splitting& split, std::span<const double> y);

struct CollapseEvent {
  std::size_t index = 0;  // sample at which the conditional state became effective
  double time = 0.0;
  double magnitude = 0.0;  // ||w(t+) - w(t-)||_F as operators
};

// Transitions none -> effective along aligned series.
std::vector<CollapseEvent> effective_collapse_monitor(std::span<const DensityMatrix> w_series,
                                                      std::span<const std::vector<double>> y_series,
                                                      std::span<const double> times, const Splitting& split,
                                                      const MacroCoarsening& coarsening = {});

struct W3Example {
  DensityMatrix w1;
  DensityMatrix w2;
  DensityMatrix w3;
  DensityMatrix m3;       // block of W3 with both y slots inside the branch cell
  DensityMatrix w3_perp;  // W3 - M3
};

// psi on the x-grid, phi1/phi2 on the y-grid, psi_perp1/psi_perp2 on the full
// grid (may be zero). Psi_i = psi phi_i + Psi_i_perp is normalized before
// forming W_i. phi1 and phi2 must occupy a single common coarse cell that no
// Psi_perp occupies; otherwise SupportViolation.
W3Example build_w3_example(const WaveFunction& psi, const WaveFunction& phi1, const WaveFunction& phi2,
                           const WaveFunction& psi_perp1, const WaveFunction& psi_perp2, const Splitting& split,
                           const MacroCoarsening& coarsening = {});

// Full-lattice product psi(x) phi(y) arranged by the splitting.
WaveFunction product_state(const WaveFunction& x_part, const WaveFunction& y_part, const Splitting& split);

}  // namespace qsl
