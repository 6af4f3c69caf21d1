// Builders from configuration blocks to library objects.
//
//   grid:          {particles, points, x_min, x_max}
//   hamiltonian:   {masses, hbar, potential}
//     potential:   {kind: none} | {kind: tilt, force} | {kind: harmonic, omega}
//                  | {kind: coupling, strength}   (strength * sum_{i<j} q_i q_j)
//   state:         {kind: eigenstates, terms: [[index, re, im], ...]}
//                  | {kind: packet, centers, widths, momenta}
//                  | {kind: compact, lo, hi}      (one particle, sine bump)
//   subspace:      {kind: eigenstates, indices}
//                  | {kind: span, states}
//                  | {kind: macro_cell, shell_size, macro_variable, counts, cell, max_ratio}
//   ensemble:      {kind: point, state} | {kind: mixture, members, weights}
//                  | {kind: uniform, subspace}
//   initial_state: {kind: iph, subspace} | {kind: pure, state} | {kind: statistical}

#pragma once

#include <optional>

#include "cli/config.hpp"
#include "qsl/equivalence.hpp"
#include "qsl/hilbert.hpp"
#include "qsl/statmech.hpp"

namespace qsl::cli {

Grid grid_from(const Json& spec);
Hamiltonian hamiltonian_from(const Grid& grid, const Json& spec);
// Operator named "kinetic", "energy" or "position".
Matrix macro_variable_from(const std::string& name, const Hamiltonian& h);
WaveFunction state_from(const Hamiltonian& h, const Json& spec);
Projector subspace_from(const Hamiltonian& h, const Json& spec);
EnsembleSpec ensemble_from(const Hamiltonian& h, const Json& spec);
DensityMatrix initial_w_from(const Hamiltonian& h, const Json& spec, const std::optional<EnsembleSpec>& ensemble);

}  // namespace qsl::cli
