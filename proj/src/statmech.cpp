#include "qsl/statmech.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>

#include "qsl/dynamics.hpp"
#include "qsl/errors.hpp"

namespace qsl {

Matrix position_operator(const Grid& grid, int particle) {
  if (particle < 0 || particle >= grid.particles) throw InvalidArgument("position_operator: bad particle");
  Matrix x = Matrix::Zero(grid.total_dim, grid.total_dim);
  for (Index q = 0; q < grid.total_dim; ++q) x(q, q) = grid.coordinate(grid.axis_index(q, particle));
  return x;
}

double MacroPartition::orthogonality_error() const {
  double worst = 0.0;
  for (std::size_t a = 0; a < cells.size(); ++a)
    for (std::size_t b = a + 1; b < cells.size(); ++b)
      worst = std::max(worst, (cells[a].projector.matrix() * cells[b].projector.matrix()).norm());
  return worst;
}

double MacroPartition::completeness_error() const {
  Matrix sum = -shell.matrix();
  for (const auto& c : cells) sum += c.projector.matrix();
  return sum.norm();
}

namespace {

// Group indices 0..n-1 of ascending eigenvalues into bins.
std::vector<std::vector<Index>> bin_spectrum(const RealVector& values, const MacroVariable& macro) {
  const Index n = values.size();
  const bool by_edges = !macro.edges.empty();
  const bool by_counts = !macro.counts.empty();
  if (by_edges == by_counts) throw InvalidArgument("macro variable: give exactly one of edges or counts");
  std::vector<std::vector<Index>> bins;
  if (by_counts) {
    Index start = 0;
    for (Index c : macro.counts) {
      if (c < 0) throw InvalidArgument("macro variable: negative count");
      std::vector<Index> bin;
      for (Index i = start; i < start + c && i < n; ++i) bin.push_back(i);
      start += c;
      bins.push_back(std::move(bin));
    }
    if (start != n) throw InvalidArgument("macro variable: counts must sum to the shell dimension");
    return bins;
  }
  const auto& e = macro.edges;
  if (e.size() < 2) throw InvalidArgument("macro variable: need at least two edges");
  for (std::size_t i = 1; i < e.size(); ++i)
    if (!(e[i] > e[i - 1])) throw InvalidArgument("macro variable: edges must increase");
  bins.resize(e.size() - 1);
  for (Index i = 0; i < n; ++i) {
    const double v = values[i];
    if (v < e.front() || v > e.back()) throw InvalidArgument("macro variable: eigenvalue outside the bin edges");
    auto it = std::upper_bound(e.begin(), e.end(), v);
    std::size_t b = static_cast<std::size_t>(it - e.begin());
    b = std::min(b, e.size() - 1) - 1;
    bins[b].push_back(i);
  }
  return bins;
}

}  // namespace

MacroPartition build_macro_partition(const Projector& shell, const MacroVariable& macro) {
  const Grid& g = shell.grid();
  if (shell.rank() == 0) throw EmptyShell("macro partition: empty shell");
  if (macro.op.rows() != g.total_dim || macro.op.cols() != g.total_dim)
    throw InvalidArgument("macro variable: operator shape mismatch");
  const double herm = (macro.op - macro.op.adjoint()).norm();
  if (herm > 1e-10 * std::max(1.0, macro.op.norm())) throw NotHermitian("macro variable must be Hermitian");

  const Matrix& b = shell.basis();
  Matrix compressed = b.adjoint() * macro.op * b;
  compressed = 0.5 * (compressed + compressed.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(compressed);
  const auto bins = bin_spectrum(solver.eigenvalues(), macro);

  std::vector<MacroCell> cells;
  for (std::size_t i = 0; i < bins.size(); ++i) {
    if (bins[i].empty()) continue;
    Matrix cols(b.rows(), static_cast<Index>(bins[i].size()));
    for (std::size_t j = 0; j < bins[i].size(); ++j) cols.col(static_cast<Index>(j)) = b * solver.eigenvectors().col(bins[i][j]);
    cells.push_back({"cell" + std::to_string(i), Projector::from_basis(g, cols)});
  }
  if (cells.size() < 2 && !macro.allow_single_cell)
    throw InvalidArgument("macro partition: a single cell has no macro-structure");
  std::size_t eq = 0;
  for (std::size_t i = 1; i < cells.size(); ++i)
    if (cells[i].dim() > cells[eq].dim()) eq = i;
  return {shell, std::move(cells), eq};
}

MacroPartition build_macro_partition(const Hamiltonian& h, double energy, double delta_e, const MacroVariable& macro) {
  return build_macro_partition(energy_shell(h, energy, delta_e), macro);
}

void PastHypothesisSpec::validate(const MacroPartition& partition) const {
  if (ph_index >= partition.cells.size()) throw InvalidArgument("past hypothesis: cell index out of range");
  if (!(max_ratio > 0.0)) throw InvalidArgument("past hypothesis: ratio bound must be positive");
  const double d_ph = static_cast<double>(partition.cells[ph_index].dim());
  const double d_eq = static_cast<double>(partition.eq().dim());
  if (d_ph < 1.0) throw InvalidArgument("past hypothesis: empty cell");
  if (d_ph > max_ratio * d_eq) throw InvalidArgument("past hypothesis: cell not small against the equilibrium cell");
}

const Projector& PastHypothesisSpec::subspace(const MacroPartition& partition) const {
  validate(partition);
  return partition.cells[ph_index].projector;
}

RealVector macro_occupations(const WaveFunction& psi, const MacroPartition& partition) {
  if (!(psi.grid() == partition.shell.grid())) throw GridMismatch("macro_occupations: grid mismatch");
  if (!psi.is_normalized(kShellTolerance)) throw InvalidArgument("macro_occupations: state not normalized");
  const Vector c = psi.coefficients();
  const double inside = (partition.shell.basis().adjoint() * c).squaredNorm();
  if (1.0 - inside > kShellTolerance) throw ShellLeak("macro_occupations: state leaks outside the shell");
  RealVector occ(static_cast<Index>(partition.cells.size()));
  for (std::size_t i = 0; i < partition.cells.size(); ++i)
    occ[static_cast<Index>(i)] = (partition.cells[i].projector.basis().adjoint() * c).squaredNorm();
  return occ;
}

RealVector macro_occupations(const DensityMatrix& w, const MacroPartition& partition) {
  if (!(w.grid() == partition.shell.grid())) throw GridMismatch("macro_occupations: grid mismatch");
  if (!w.is_normalized(kShellTolerance)) throw InvalidArgument("macro_occupations: state not normalized");
  const Matrix rho = w.operator_matrix();
  const auto trace_in = [&](const Matrix& basis) { return (basis.adjoint() * rho * basis).trace().real(); };
  if (1.0 - trace_in(partition.shell.basis()) > kShellTolerance)
    throw ShellLeak("macro_occupations: state leaks outside the shell");
  RealVector occ(static_cast<Index>(partition.cells.size()));
  for (std::size_t i = 0; i < partition.cells.size(); ++i)
    occ[static_cast<Index>(i)] = trace_in(partition.cells[i].projector.basis());
  return occ;
}

std::optional<double> boltzmann_entropy(const RealVector& occupations, const MacroPartition& partition,
                                        double epsilon) {
  if (!(epsilon > 0.0 && epsilon < 0.5)) throw InvalidArgument("boltzmann_entropy: epsilon must lie in (0, 0.5)");
  if (occupations.size() != static_cast<Index>(partition.cells.size()))
    throw InvalidArgument("boltzmann_entropy: occupation size mismatch");
  for (Index i = 0; i < occupations.size(); ++i)
    if (occupations[i] >= 1.0 - epsilon)
      return std::log(static_cast<double>(partition.cells[static_cast<std::size_t>(i)].dim()));
  return std::nullopt;
}

std::optional<double> boltzmann_entropy(const WaveFunction& psi, const MacroPartition& partition, double epsilon) {
  return boltzmann_entropy(macro_occupations(psi, partition), partition, epsilon);
}

std::optional<double> boltzmann_entropy(const DensityMatrix& w, const MacroPartition& partition, double epsilon) {
  return boltzmann_entropy(macro_occupations(w, partition), partition, epsilon);
}

WaveFunction sample_sphere_uniform(const Projector& subspace, Rng& rng) {
  const Index k = subspace.rank();
  if (k < 1) throw InvalidArgument("sample_sphere_uniform: empty subspace");
  Vector z(k);
  for (Index i = 0; i < k; ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    z[i] = cplx(re, im);
  }
  z /= z.norm();
  return WaveFunction::from_coefficients(subspace.grid(), subspace.basis() * z);
}

DensityMatrix iph_state(const Projector& subspace) {
  if (subspace.rank() < 1) throw InvalidArgument("iph_state: rank-0 projector");
  return DensityMatrix::from_operator(subspace.grid(), subspace.matrix() / static_cast<double>(subspace.rank()));
}

DecompositionReport verify_decomposition(const Projector& subspace, Rng& rng, Index sample_count) {
  if (sample_count < 100) throw InvalidArgument("verify_decomposition: need at least 100 samples");
  const DensityMatrix target = iph_state(subspace);
  const Grid& g = subspace.grid();

  Matrix avg = Matrix::Zero(g.total_dim, g.total_dim);
  for (Index s = 0; s < sample_count; ++s) {
    const Vector c = sample_sphere_uniform(subspace, rng).coefficients();
    avg.noalias() += c * c.adjoint();
  }
  avg /= static_cast<double>(sample_count);

  const Index k = subspace.rank();
  Matrix basis_mix = Matrix::Zero(g.total_dim, g.total_dim);
  for (Index n = 0; n < k; ++n) basis_mix.noalias() += subspace.basis().col(n) * subspace.basis().col(n).adjoint();
  basis_mix /= static_cast<double>(k);

  DecompositionReport r;
  r.sample_count = sample_count;
  r.frobenius_error_continuous = frobenius_distance(DensityMatrix::from_operator(g, avg), target);
  r.frobenius_error_basis = frobenius_distance(DensityMatrix::from_operator(g, basis_mix), target);
  return r;
}

EntropyTrajectory entropy_trajectory(const DensityMatrix& w0, const Hamiltonian& h, const MacroPartition& partition,
                                     std::span<const double> t_grid, double epsilon) {
  EntropyTrajectory out;
  for (double t : t_grid) {
    const DensityMatrix wt = evolve_w(w0, h, t);
    RealVector occ = macro_occupations(wt, partition);
    out.times.push_back(t);
    out.entropy.push_back(boltzmann_entropy(occ, partition, epsilon));
    out.occupations.push_back(std::move(occ));
  }
  return out;
}

void write_entropy_csv(std::ostream& out, const EntropyTrajectory& tr, const MacroPartition& partition) {
  const auto old = out.precision(17);
  out << "t";
  for (const auto& c : partition.cells) out << ",occ_" << c.label;
  out << ",S\n";
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    out << tr.times[i];
    for (Index j = 0; j < tr.occupations[i].size(); ++j) out << ',' << tr.occupations[i][j];
    out << ',';
    if (tr.entropy[i]) out << *tr.entropy[i];
    else out << "NaN";
    out << '\n';
  }
  out.precision(old);
}

double von_neumann_entropy(const DensityMatrix& w) {
  const Matrix rho = w.operator_matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (rho + rho.adjoint()), Eigen::EigenvaluesOnly);
  double s = 0.0;
  for (Index i = 0; i < solver.eigenvalues().size(); ++i) {
    const double p = solver.eigenvalues()[i];
    if (p > 1e-300) s -= p * std::log(p);
  }
  return s;
}

Matrix random_goe(Index dim, Rng& rng) {
  if (dim < 1) throw InvalidArgument("random_goe: dim must be positive");
  Eigen::MatrixXd a(dim, dim);
  for (Index i = 0; i < dim; ++i)
    for (Index j = 0; j < dim; ++j) a(i, j) = rng.normal();
  const Eigen::MatrixXd h = (a + a.transpose()) / std::sqrt(2.0 * static_cast<double>(dim));
  return h.cast<cplx>();
}

}  // namespace qsl
