// statmech.hpp - macrostate partitions of an energy shell, Boltzmann
// entropy, uniform sphere sampling and the normalized-projector state.
// Entropies are in nats (k_B = 1).

#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "qsl/hilbert.hpp"
#include "qsl/random.hpp"

namespace qsl {

// Hermitian sample-space operator whose shell-compressed spectrum is binned
// into cells. Exactly one of `edges` (ascending, half-open bins
// [e_i, e_{i+1}), last bin closed) or `counts` (group sizes along the sorted
// spectrum) is used.
struct MacroVariable {
  Matrix op;
  std::vector<double> edges;
  std::vector<Index> counts;
  // A one-cell partition has no macro-structure and is rejected by default.
  bool allow_single_cell = false;
};

// Position of one particle as a diagonal operator.
Matrix position_operator(const Grid& grid, int particle);

struct MacroCell {
  std::string label;
  Projector projector;
  Index dim() const { return projector.rank(); }
};

struct MacroPartition {
  Projector shell;
  std::vector<MacroCell> cells;
  std::size_t eq_index = 0;  // largest cell

  Index shell_dim() const { return shell.rank(); }
  const MacroCell& eq() const { return cells[eq_index]; }
  // max_{nu != mu} ||I_nu I_mu||_F and ||sum I_nu - shell||_F.
  double orthogonality_error() const;
  double completeness_error() const;
};

MacroPartition build_macro_partition(const Hamiltonian& h, double energy, double delta_e, const MacroVariable& macro);
MacroPartition build_macro_partition(const Projector& shell, const MacroVariable& macro);

// Dominance constraint dim(PH cell) <= max_ratio * dim(eq cell).
struct PastHypothesisSpec {
  std::size_t ph_index = 0;
  double max_ratio = 0.1;

  void validate(const MacroPartition& partition) const;
  const Projector& subspace(const MacroPartition& partition) const;
};

inline constexpr double kShellTolerance = 1e-6;
inline constexpr double kDefaultMembershipEpsilon = 0.1;

// Throws ShellLeak if the state has more than 1e-6 weight outside the shell.
RealVector macro_occupations(const WaveFunction& psi, const MacroPartition& partition);
RealVector macro_occupations(const DensityMatrix& w, const MacroPartition& partition);

// log dim of the cell holding at least 1 - epsilon of the state, if any.
std::optional<double> boltzmann_entropy(const RealVector& occupations, const MacroPartition& partition,
                                        double epsilon = kDefaultMembershipEpsilon);
std::optional<double> boltzmann_entropy(const WaveFunction& psi, const MacroPartition& partition,
                                        double epsilon = kDefaultMembershipEpsilon);
std::optional<double> boltzmann_entropy(const DensityMatrix& w, const MacroPartition& partition,
                                        double epsilon = kDefaultMembershipEpsilon);

WaveFunction sample_sphere_uniform(const Projector& subspace, Rng& rng);

// I / rank, trace-normalized in the dx^N convention.
DensityMatrix iph_state(const Projector& subspace);

struct DecompositionReport {
  double frobenius_error_continuous = 0.0;
  double frobenius_error_basis = 0.0;
  Index sample_count = 0;
};
DecompositionReport verify_decomposition(const Projector& subspace, Rng& rng, Index sample_count);

struct EntropyTrajectory {
  std::vector<double> times;
  std::vector<RealVector> occupations;
  std::vector<std::optional<double>> entropy;
};
EntropyTrajectory entropy_trajectory(const DensityMatrix& w0, const Hamiltonian& h, const MacroPartition& partition,
                                     std::span<const double> t_grid, double epsilon = kDefaultMembershipEpsilon);

// t, one occupation column per cell, S (NaN when no cell dominates).
void write_entropy_csv(std::ostream& out, const EntropyTrajectory& trajectory, const MacroPartition& partition);

// -tr(rho log rho) of the operator a kernel represents.
double von_neumann_entropy(const DensityMatrix& w);

// Real symmetric Gaussian matrix with off-diagonal variance 1/dim and
// diagonal variance 2/dim (semicircle of radius 2).
Matrix random_goe(Index dim, Rng& rng);

}  // namespace qsl
