// bohm.hpp - Bohmian particle dynamics guided by a wave function or by a
// density matrix.
//
// Velocities use central differences (step dx) of the multilinearly
// interpolated guiding state; sites beyond the lattice carry the Dirichlet
// zero. For W the interpolation acts on both kernel slots, so
// W = |psi><psi| yields exactly the wave-function velocity.

#pragma once

#include <iosfwd>
#include <memory>
#include <span>
#include <vector>

#include "qsl/hilbert.hpp"
#include "qsl/random.hpp"

namespace qsl {

struct Configuration {
  std::vector<double> positions;
};

struct Trajectory {
  std::vector<double> times;
  std::vector<Configuration> configs;
  // Set when a node could not be stepped around; times/configs then stop at
  // the last output time that was reached.
  bool rejected = false;
};

struct GuidanceConstants {
  double hbar = 1.0;
  std::vector<double> masses;

  static GuidanceConstants of(const Hamiltonian& h) { return {h.hbar(), h.masses()}; }
};

// Node criterion: |psi(q)|^2 (or W(q,q)) below this fraction of its maximum.
inline constexpr double kNodeThreshold = 1e-12;

cplx interpolate(const Grid& grid, const Vector& values, std::span<const double> q);
cplx interpolate(const Grid& grid, const Matrix& kernel, std::span<const double> q, std::span<const double> qp);

// (hbar/m_i) Im(grad_i psi / psi). Throws NodeEncountered near nodes.
RealVector velocity_psi(const WaveFunction& psi, const Configuration& q, const GuidanceConstants& g);
// (hbar/m_i) Im(grad_{q_i} W(q, q') / W(q, q')) at q = q' = Q.
RealVector velocity_w(const DensityMatrix& w, const Configuration& q, const GuidanceConstants& g);

enum class Placement {
  grid_point,    // configurations sit on lattice sites
  cell_uniform,  // uniformly spread over the site's cell (clipped to the box)
};

std::vector<Configuration> sample_equilibrium(const Grid& grid, const RealVector& density, Rng& rng, Index count,
                                              Placement placement = Placement::grid_point);
std::vector<Configuration> sample_equilibrium(const WaveFunction& psi, Rng& rng, Index count,
                                              Placement placement = Placement::grid_point);
std::vector<Configuration> sample_equilibrium(const DensityMatrix& w, Rng& rng, Index count,
                                              Placement placement = Placement::grid_point);

// Equally spaced instants start + j * spacing, j = 0..count-1, at which a
// guiding state is precomputed.
struct TimeLattice {
  double start = 0.0;
  double spacing = 1.0;
  Index count = 1;

  // Lattice holding every RK4 stage time of `steps` equal steps over [t0, t1].
  static TimeLattice for_rk4(double t0, double t1, int steps);
};

// Time-dependent guiding state. Implementations are immutable and safe to
// share across threads; instants off the lattice are evaluated on demand.
class GuidingState {
 public:
  virtual ~GuidingState() = default;
  virtual const Grid& grid() const = 0;
  virtual RealVector velocity(double t, std::span<const double> q) const = 0;
};

// psi(t) = U(t - start) psi0. Keeps a reference to h.
class WaveGuide final : public GuidingState {
 public:
  WaveGuide(const WaveFunction& psi0, const Hamiltonian& h, TimeLattice lattice);
  const Grid& grid() const override { return grid_; }
  RealVector velocity(double t, std::span<const double> q) const override;

 private:
  Grid grid_;
  const Hamiltonian* h_;
  Vector initial_;
  TimeLattice lattice_;
  std::vector<Vector> states_;
  std::vector<double> max_density_;
  GuidanceConstants constants_;
};

// W(t) = U W0 U^dagger held in factored form F F^dagger, with F built from
// the eigendecomposition of W0. Keeps a reference to h.
class DensityGuide final : public GuidingState {
 public:
  DensityGuide(const DensityMatrix& w0, const Hamiltonian& h, TimeLattice lattice);
  const Grid& grid() const override { return grid_; }
  RealVector velocity(double t, std::span<const double> q) const override;
  Index rank() const { return initial_.cols(); }

 private:
  using RowMatrix = Eigen::Matrix<cplx, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  RowMatrix factor_at(double t) const;

  Grid grid_;
  const Hamiltonian* h_;
  Matrix initial_;
  TimeLattice lattice_;
  std::vector<RowMatrix> factors_;
  std::vector<double> max_density_;
  GuidanceConstants constants_;
};

struct IntegratorOptions {
  double max_step = 0.01;
  int max_halvings = 10;
};

// Fixed-step RK4 through the output instants t_grid (ascending). A step that
// meets a node is retried as two half steps, recursively up to max_halvings
// times, after which the trajectory is marked rejected. Positions leaving the
// box are reflected at the walls.
Trajectory integrate_trajectory(const GuidingState& guide, const Configuration& q0, std::span<const double> t_grid,
                                const IntegratorOptions& options);

// Final configurations of many trajectories over [t0, t1] in `steps` steps.
struct EnsembleOutcome {
  std::vector<Configuration> finals;
  std::vector<char> rejected;
  Index rejected_count = 0;
};
EnsembleOutcome run_ensemble(const GuidingState& guide, std::span<const Configuration> starts, double t0, double t1,
                             int steps, unsigned threads = 1);

// Counts per lattice site (nearest-site binning), skipping rejected entries.
RealVector histogram_on_grid(const Grid& grid, std::span<const Configuration> configs,
                             std::span<const char> rejected = {});

struct EquivarianceOptions {
  int steps = 100;
  unsigned threads = 1;
  Placement placement = Placement::cell_uniform;
  double max_rejected_fraction = 0.05;
};

struct EquivarianceReport {
  double tv_distance = 0.0;
  double rejected_fraction = 0.0;
  Index accepted = 0;
  Index rejected = 0;
  bool valid = true;
  RealVector empirical;  // normalized histogram over lattice sites
  RealVector expected;   // rho_t dx^N
};

EquivarianceReport equivariance_check(const WaveFunction& psi0, const Hamiltonian& h, double t, Index ensemble_size,
                                      Rng& rng, const EquivarianceOptions& options = {});
EquivarianceReport equivariance_check(const DensityMatrix& w0, const Hamiltonian& h, double t, Index ensemble_size,
                                      Rng& rng, const EquivarianceOptions& options = {});

// CSV with columns t,Q1..QN,rejected.
void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory);
// As above with a leading trajectory column.
void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories);

}  // namespace qsl
