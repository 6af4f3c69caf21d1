#include "qsl/dynamics.hpp"

#include <cmath>

#include "qsl/errors.hpp"

namespace qsl {

namespace {

void require_same_grid(const Grid& a, const Grid& b, const char* where) {
  if (!(a == b)) throw GridMismatch(std::string(where) + ": state and Hamiltonian live on different grids");
}

RealVector checked_density(const Grid& grid, RealVector rho) {
  const double vol = grid.cell_volume();
  for (Index q = 0; q < rho.size(); ++q) {
    if (rho[q] < 0.0) {
      if (rho[q] * vol < -kPositivityClip) throw PositivityViolation("position_distribution: negative diagonal");
      rho[q] = 0.0;
    }
  }
  if (std::abs(rho.sum() * vol - 1.0) > 1e-8) throw InvalidArgument("position_distribution: state is not normalized");
  return rho;
}

}  // namespace

WaveFunction evolve_psi(const WaveFunction& psi, const Hamiltonian& h, double t) {
  require_same_grid(psi.grid(), h.grid(), "evolve_psi");
  return WaveFunction(psi.grid(), h.evolve(psi.amplitudes(), t));
}

DensityMatrix evolve_w(const DensityMatrix& w, const Hamiltonian& h, double t) {
  require_same_grid(w.grid(), h.grid(), "evolve_w");
  return DensityMatrix(w.grid(), h.evolve_operator(w.kernel(), t));
}

RealVector position_distribution(const WaveFunction& psi) {
  return checked_density(psi.grid(), psi.amplitudes().cwiseAbs2());
}

RealVector position_distribution(const DensityMatrix& w) {
  return checked_density(w.grid(), w.kernel().diagonal().real());
}

RealVector particle_marginal(const Grid& grid, const RealVector& density, int particle) {
  if (particle < 0 || particle >= grid.particles) throw InvalidArgument("particle_marginal: bad particle index");
  if (density.size() != grid.total_dim) throw InvalidArgument("particle_marginal: size mismatch");
  RealVector m = RealVector::Zero(grid.points);
  const double vol = grid.cell_volume();
  for (Index q = 0; q < grid.total_dim; ++q) m[grid.axis_index(q, particle)] += density[q] * vol;
  return m;
}

}  // namespace qsl
