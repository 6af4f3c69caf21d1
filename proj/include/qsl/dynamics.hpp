// dynamics.hpp - Schroedinger and von Neumann evolution through the cached
// eigenbasis, plus position distributions.

#pragma once

#include "qsl/hilbert.hpp"

namespace qsl {

WaveFunction evolve_psi(const WaveFunction& psi, const Hamiltonian& h, double t);
DensityMatrix evolve_w(const DensityMatrix& w, const Hamiltonian& h, double t);

// Diagonal negatives in [-1e-10, 0) (as probability mass per cell) are
// treated as rounding noise and clipped.
inline constexpr double kPositivityClip = 1e-10;

// Density rho(q) = |psi(q)|^2 or W(q, q); sums to 1 with weight dx^N.
RealVector position_distribution(const WaveFunction& psi);
RealVector position_distribution(const DensityMatrix& w);

// Probability of each lattice site of one particle's axis (sums to 1),
// given a configuration-space density.
RealVector particle_marginal(const Grid& grid, const RealVector& density, int particle);

}  // namespace qsl
