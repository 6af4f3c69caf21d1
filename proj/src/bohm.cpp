#include "qsl/bohm.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>

#include "qsl/dynamics.hpp"
#include "qsl/errors.hpp"
#include "qsl/parallel.hpp"
#include "qsl/statistics.hpp"

namespace qsl {

namespace {

// Calls f(flat_index, weight) for every in-range corner of the multilinear
// stencil around q. Coordinates are clamped to one cell beyond each wall,
// where the Dirichlet zero lives.
template <class F>
void for_each_corner(const Grid& g, std::span<const double> q, F&& f) {
  const int n = g.particles;
  std::array<int, kMaxParticles> base{};
  std::array<double, kMaxParticles> frac{};
  for (int p = 0; p < n; ++p) {
    const double x = std::clamp(q[static_cast<std::size_t>(p)], g.x_min - g.dx, g.x_max + g.dx);
    const double s = (x - g.x_min) / g.dx;
    const double fl = std::floor(s);
    base[static_cast<std::size_t>(p)] = static_cast<int>(fl);
    frac[static_cast<std::size_t>(p)] = s - fl;
  }
  const unsigned corners = 1u << n;
  for (unsigned mask = 0; mask < corners; ++mask) {
    double w = 1.0;
    Index flat = 0;
    bool inside = true;
    for (int p = 0; p < n; ++p) {
      const unsigned bit = (mask >> (n - 1 - p)) & 1u;
      const int i = base[static_cast<std::size_t>(p)] + static_cast<int>(bit);
      const double fp = frac[static_cast<std::size_t>(p)];
      w *= bit ? fp : 1.0 - fp;
      if (i < 0 || i >= g.points) {
        inside = false;
        break;
      }
      flat = flat * g.points + i;
    }
    if (inside && w != 0.0) f(flat, w);
  }
}

void check_configuration(const Grid& g, std::span<const double> q) {
  if (static_cast<int>(q.size()) != g.particles) throw InvalidArgument("configuration has wrong particle count");
}

void check_constants(const Grid& g, const GuidanceConstants& c) {
  if (static_cast<int>(c.masses.size()) != g.particles) throw InvalidArgument("guidance constants: one mass per particle");
}

using Stage = std::array<double, kMaxParticles>;

// Velocity from a pure amplitude vector.
RealVector psi_velocity(const Grid& g, const Vector& amp, double max_density, std::span<const double> q,
                        const GuidanceConstants& c) {
  const cplx center = interpolate(g, amp, q);
  if (std::norm(center) < kNodeThreshold * max_density) throw NodeEncountered("velocity_psi: node");
  RealVector v(g.particles);
  Stage shifted{};
  std::copy(q.begin(), q.end(), shifted.begin());
  const std::span<const double> view(shifted.data(), q.size());
  for (int i = 0; i < g.particles; ++i) {
    const auto si = static_cast<std::size_t>(i);
    shifted[si] = q[si] + g.dx;
    const cplx plus = interpolate(g, amp, view);
    shifted[si] = q[si] - g.dx;
    const cplx minus = interpolate(g, amp, view);
    shifted[si] = q[si];
    const cplx grad = (plus - minus) / (2.0 * g.dx);
    v[i] = c.hbar / c.masses[si] * (grad / center).imag();
  }
  return v;
}

template <class Row>
void interpolate_rows(const Grid& g, const Row& f, std::span<const double> q, Eigen::VectorXcd& out) {
  out.setZero(f.cols());
  for_each_corner(g, q, [&](Index flat, double w) { out += w * f.row(flat).transpose(); });
}

}  // namespace

cplx interpolate(const Grid& grid, const Vector& values, std::span<const double> q) {
  check_configuration(grid, q);
  cplx acc = 0.0;
  for_each_corner(grid, q, [&](Index flat, double w) { acc += w * values[flat]; });
  return acc;
}

cplx interpolate(const Grid& grid, const Matrix& kernel, std::span<const double> q, std::span<const double> qp) {
  check_configuration(grid, q);
  check_configuration(grid, qp);
  cplx acc = 0.0;
  for_each_corner(grid, q, [&](Index a, double wa) {
    for_each_corner(grid, qp, [&](Index b, double wb) { acc += wa * wb * kernel(a, b); });
  });
  return acc;
}

RealVector velocity_psi(const WaveFunction& psi, const Configuration& q, const GuidanceConstants& g) {
  check_configuration(psi.grid(), q.positions);
  check_constants(psi.grid(), g);
  const double max_density = psi.amplitudes().cwiseAbs2().maxCoeff();
  return psi_velocity(psi.grid(), psi.amplitudes(), max_density, q.positions, g);
}

RealVector velocity_w(const DensityMatrix& w, const Configuration& q, const GuidanceConstants& c) {
  const Grid& g = w.grid();
  check_configuration(g, q.positions);
  check_constants(g, c);
  const double max_density = w.kernel().diagonal().real().maxCoeff();
  const std::span<const double> at(q.positions);
  const double center = interpolate(g, w.kernel(), at, at).real();
  if (center < kNodeThreshold * max_density) throw NodeEncountered("velocity_w: node");
  RealVector v(g.particles);
  std::vector<double> shifted = q.positions;
  for (int i = 0; i < g.particles; ++i) {
    const auto si = static_cast<std::size_t>(i);
    shifted[si] = q.positions[si] + g.dx;
    const cplx plus = interpolate(g, w.kernel(), shifted, at);
    shifted[si] = q.positions[si] - g.dx;
    const cplx minus = interpolate(g, w.kernel(), shifted, at);
    shifted[si] = q.positions[si];
    const cplx grad = (plus - minus) / (2.0 * g.dx);
    v[i] = c.hbar / c.masses[si] * grad.imag() / center;
  }
  return v;
}

// ---------------------------------------------------------------------------

std::vector<Configuration> sample_equilibrium(const Grid& grid, const RealVector& density, Rng& rng, Index count,
                                              Placement placement) {
  if (density.size() != grid.total_dim) throw InvalidArgument("sample_equilibrium: density size mismatch");
  if (count < 0) throw InvalidArgument("sample_equilibrium: negative count");
  std::vector<double> cdf(static_cast<std::size_t>(grid.total_dim));
  double acc = 0.0;
  for (Index q = 0; q < grid.total_dim; ++q) {
    acc += std::max(0.0, density[q]) * grid.cell_volume();
    cdf[static_cast<std::size_t>(q)] = acc;
  }
  if (!(acc > 0.0)) throw InvalidArgument("sample_equilibrium: empty distribution");
  std::vector<Configuration> out;
  out.reserve(static_cast<std::size_t>(count));
  for (Index s = 0; s < count; ++s) {
    const double u = rng.uniform() * acc;
    auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    if (it == cdf.end()) --it;
    // Skip zero-probability sites that share the cumulative value.
    const auto flat = static_cast<Index>(it - cdf.begin());
    const auto idx = grid.unflatten(flat);
    Configuration c;
    c.positions.resize(idx.size());
    for (std::size_t p = 0; p < idx.size(); ++p) {
      double x = grid.coordinate(idx[p]);
      if (placement == Placement::cell_uniform) {
        const double lo = std::max(grid.x_min, x - 0.5 * grid.dx);
        const double hi = std::min(grid.x_max, x + 0.5 * grid.dx);
        x = lo + rng.uniform() * (hi - lo);
      }
      c.positions[p] = x;
    }
    out.push_back(std::move(c));
  }
  return out;
}

std::vector<Configuration> sample_equilibrium(const WaveFunction& psi, Rng& rng, Index count, Placement placement) {
  return sample_equilibrium(psi.grid(), position_distribution(psi), rng, count, placement);
}

std::vector<Configuration> sample_equilibrium(const DensityMatrix& w, Rng& rng, Index count, Placement placement) {
  return sample_equilibrium(w.grid(), position_distribution(w), rng, count, placement);
}

// ---------------------------------------------------------------------------

TimeLattice TimeLattice::for_rk4(double t0, double t1, int steps) {
  if (steps < 1) throw InvalidArgument("TimeLattice: need at least one step");
  const double spacing = (t1 - t0) / (2.0 * steps);
  return {t0, spacing == 0.0 ? 1.0 : spacing, spacing == 0.0 ? 1 : 2 * static_cast<Index>(steps) + 1};
}

namespace {

// Lattice slot of t, or -1 when t is not (numerically) a lattice instant.
Index lattice_slot(const TimeLattice& l, double t) {
  const double s = (t - l.start) / l.spacing;
  const double r = std::round(s);
  if (std::abs(s - r) > 1e-9 || r < 0.0 || r >= static_cast<double>(l.count)) return -1;
  return static_cast<Index>(r);
}

}  // namespace

WaveGuide::WaveGuide(const WaveFunction& psi0, const Hamiltonian& h, TimeLattice lattice)
    : grid_(psi0.grid()), h_(&h), initial_(psi0.amplitudes()), lattice_(lattice), constants_(GuidanceConstants::of(h)) {
  if (!(psi0.grid() == h.grid())) throw GridMismatch("WaveGuide: state and Hamiltonian grids differ");
  states_.reserve(static_cast<std::size_t>(lattice.count));
  for (Index j = 0; j < lattice.count; ++j) {
    const double t = lattice.start + static_cast<double>(j) * lattice.spacing;
    states_.push_back(h.evolve(initial_, t));
    max_density_.push_back(states_.back().cwiseAbs2().maxCoeff());
  }
}

RealVector WaveGuide::velocity(double t, std::span<const double> q) const {
  const Index slot = lattice_slot(lattice_, t);
  if (slot >= 0) return psi_velocity(grid_, states_[static_cast<std::size_t>(slot)], max_density_[static_cast<std::size_t>(slot)], q, constants_);
  const Vector amp = h_->evolve(initial_, t);
  return psi_velocity(grid_, amp, amp.cwiseAbs2().maxCoeff(), q, constants_);
}

DensityGuide::DensityGuide(const DensityMatrix& w0, const Hamiltonian& h, TimeLattice lattice)
    : grid_(w0.grid()), h_(&h), lattice_(lattice), constants_(GuidanceConstants::of(h)) {
  if (!(w0.grid() == h.grid())) throw GridMismatch("DensityGuide: state and Hamiltonian grids differ");
  const Matrix rho = w0.operator_matrix();
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (rho + rho.adjoint()));
  const RealVector& p = solver.eigenvalues();
  const double top = p.maxCoeff();
  if (!(top > 0.0)) throw InvalidArgument("DensityGuide: zero density matrix");
  std::vector<Index> kept;
  for (Index k = 0; k < p.size(); ++k) {
    if (p[k] < -1e-10 * std::max(1.0, top)) throw PositivityViolation("DensityGuide: negative eigenvalue");
    if (p[k] > 1e-14 * top) kept.push_back(k);
  }
  // Columns sqrt(p_k) u_k / sqrt(dx^N), so that kernel = F F^dagger.
  initial_.resize(w0.dim(), static_cast<Index>(kept.size()));
  const double scale = 1.0 / std::sqrt(grid_.cell_volume());
  for (std::size_t j = 0; j < kept.size(); ++j)
    initial_.col(static_cast<Index>(j)) = std::sqrt(p[kept[j]]) * scale * solver.eigenvectors().col(kept[j]);
  factors_.reserve(static_cast<std::size_t>(lattice.count));
  for (Index j = 0; j < lattice.count; ++j) {
    factors_.push_back(factor_at(lattice.start + static_cast<double>(j) * lattice.spacing));
    max_density_.push_back(factors_.back().rowwise().squaredNorm().maxCoeff());
  }
}

DensityGuide::RowMatrix DensityGuide::factor_at(double t) const {
  RowMatrix f(initial_.rows(), initial_.cols());
  for (Index k = 0; k < initial_.cols(); ++k) f.col(k) = h_->evolve(initial_.col(k), t);
  return f;
}

RealVector DensityGuide::velocity(double t, std::span<const double> q) const {
  check_configuration(grid_, q);
  const Index slot = lattice_slot(lattice_, t);
  RowMatrix scratch;
  const RowMatrix* f = nullptr;
  double max_density = 0.0;
  if (slot >= 0) {
    f = &factors_[static_cast<std::size_t>(slot)];
    max_density = max_density_[static_cast<std::size_t>(slot)];
  } else {
    scratch = factor_at(t);
    f = &scratch;
    max_density = scratch.rowwise().squaredNorm().maxCoeff();
  }
  Eigen::VectorXcd center, plus, minus;
  interpolate_rows(grid_, *f, q, center);
  const double diag = center.squaredNorm();
  if (diag < kNodeThreshold * max_density) throw NodeEncountered("DensityGuide: node");
  RealVector v(grid_.particles);
  Stage shifted{};
  std::copy(q.begin(), q.end(), shifted.begin());
  const std::span<const double> view(shifted.data(), q.size());
  for (int i = 0; i < grid_.particles; ++i) {
    const auto si = static_cast<std::size_t>(i);
    shifted[si] = q[si] + grid_.dx;
    interpolate_rows(grid_, *f, view, plus);
    shifted[si] = q[si] - grid_.dx;
    interpolate_rows(grid_, *f, view, minus);
    shifted[si] = q[si];
    // sum_k (f+_k - f-_k) conj(f_k) = W(q + h, q) - W(q - h, q)
    const cplx numerator = center.dot(plus - minus);
    v[i] = constants_.hbar / constants_.masses[si] * numerator.imag() / (2.0 * grid_.dx * diag);
  }
  return v;
}

// ---------------------------------------------------------------------------

namespace {

void reflect_into_box(const Grid& g, std::span<double> q) {
  for (double& x : q) {
    for (int guard = 0; guard < 4 && (x < g.x_min || x > g.x_max); ++guard) {
      if (x < g.x_min) x = 2.0 * g.x_min - x;
      if (x > g.x_max) x = 2.0 * g.x_max - x;
    }
    x = std::clamp(x, g.x_min, g.x_max);
  }
}

class Stepper {
 public:
  Stepper(const GuidingState& guide, int max_halvings) : guide_(guide), g_(guide.grid()), max_halvings_(max_halvings) {}

  bool advance(std::vector<double>& q, double t, double h, int depth) const {
    std::vector<double> trial = q;
    try {
      rk4(trial, t, h);
    } catch (const NodeEncountered&) {
      if (depth >= max_halvings_) return false;
      std::vector<double> half = q;
      if (!advance(half, t, 0.5 * h, depth + 1)) return false;
      if (!advance(half, t + 0.5 * h, 0.5 * h, depth + 1)) return false;
      q = std::move(half);
      return true;
    }
    q = std::move(trial);
    return true;
  }

 private:
  void rk4(std::vector<double>& q, double t, double h) const {
    const std::size_t n = q.size();
    std::vector<double> y(n);
    const RealVector k1 = guide_.velocity(t, q);
    for (std::size_t i = 0; i < n; ++i) y[i] = q[i] + 0.5 * h * k1[static_cast<Index>(i)];
    reflect_into_box(g_, y);
    const RealVector k2 = guide_.velocity(t + 0.5 * h, y);
    for (std::size_t i = 0; i < n; ++i) y[i] = q[i] + 0.5 * h * k2[static_cast<Index>(i)];
    reflect_into_box(g_, y);
    const RealVector k3 = guide_.velocity(t + 0.5 * h, y);
    for (std::size_t i = 0; i < n; ++i) y[i] = q[i] + h * k3[static_cast<Index>(i)];
    reflect_into_box(g_, y);
    const RealVector k4 = guide_.velocity(t + h, y);
    for (std::size_t i = 0; i < n; ++i) {
      const auto k = static_cast<Index>(i);
      q[i] += h / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    reflect_into_box(g_, q);
  }

  const GuidingState& guide_;
  const Grid& g_;
  int max_halvings_;
};

}  // namespace

Trajectory integrate_trajectory(const GuidingState& guide, const Configuration& q0, std::span<const double> t_grid,
                                const IntegratorOptions& options) {
  const Grid& g = guide.grid();
  check_configuration(g, q0.positions);
  if (t_grid.empty()) throw InvalidArgument("integrate_trajectory: empty time grid");
  if (!(options.max_step > 0.0)) throw InvalidArgument("integrate_trajectory: max_step must be positive");
  for (std::size_t i = 1; i < t_grid.size(); ++i)
    if (!(t_grid[i] > t_grid[i - 1])) throw InvalidArgument("integrate_trajectory: times must increase strictly");
  for (double x : q0.positions)
    if (x < g.x_min || x > g.x_max) throw InvalidArgument("integrate_trajectory: start outside the box");

  Trajectory traj;
  traj.times.push_back(t_grid[0]);
  traj.configs.push_back(q0);
  std::vector<double> q = q0.positions;
  const Stepper stepper(guide, options.max_halvings);
  for (std::size_t i = 1; i < t_grid.size(); ++i) {
    const double ta = t_grid[i - 1];
    const double span = t_grid[i] - ta;
    const int sub = std::max(1, static_cast<int>(std::ceil(span / options.max_step - 1e-9)));
    const double h = span / sub;
    for (int s = 0; s < sub; ++s) {
      if (!stepper.advance(q, ta + s * h, h, 0)) {
        traj.rejected = true;
        return traj;
      }
    }
    traj.times.push_back(t_grid[i]);
    traj.configs.push_back(Configuration{q});
  }
  return traj;
}

EnsembleOutcome run_ensemble(const GuidingState& guide, std::span<const Configuration> starts, double t0, double t1,
                             int steps, unsigned threads) {
  if (steps < 1) throw InvalidArgument("run_ensemble: need at least one step");
  EnsembleOutcome out;
  out.finals.resize(starts.size());
  out.rejected.assign(starts.size(), 0);
  if (t1 == t0) {
    std::copy(starts.begin(), starts.end(), out.finals.begin());
    return out;
  }
  const std::array<double, 2> times{t0, t1};
  const IntegratorOptions opts{(t1 - t0) / steps, 10};
  parallel_for(starts.size(), threads, [&](std::size_t i) {
    const Trajectory tr = integrate_trajectory(guide, starts[i], times, opts);
    out.finals[i] = tr.configs.back();
    out.rejected[i] = tr.rejected ? 1 : 0;
  });
  out.rejected_count = std::count(out.rejected.begin(), out.rejected.end(), char{1});
  return out;
}

RealVector histogram_on_grid(const Grid& grid, std::span<const Configuration> configs, std::span<const char> rejected) {
  RealVector h = RealVector::Zero(grid.total_dim);
  std::vector<int> idx(static_cast<std::size_t>(grid.particles));
  for (std::size_t i = 0; i < configs.size(); ++i) {
    if (!rejected.empty() && rejected[i]) continue;
    for (int p = 0; p < grid.particles; ++p)
      idx[static_cast<std::size_t>(p)] = grid.nearest_site(configs[i].positions[static_cast<std::size_t>(p)]);
    h[grid.flatten(idx)] += 1.0;
  }
  return h;
}

namespace {

EquivarianceReport finish_equivariance(const Grid& g, const GuidingState& guide, std::span<const Configuration> starts,
                                       const RealVector& expected_density, double t, const EquivarianceOptions& opts) {
  const EnsembleOutcome run = run_ensemble(guide, starts, 0.0, t, opts.steps, opts.threads);
  EquivarianceReport rep;
  rep.rejected = run.rejected_count;
  rep.accepted = static_cast<Index>(starts.size()) - run.rejected_count;
  rep.rejected_fraction = static_cast<double>(rep.rejected) / static_cast<double>(starts.size());
  rep.valid = rep.rejected_fraction <= opts.max_rejected_fraction;
  rep.expected = expected_density * g.cell_volume();
  const RealVector counts = histogram_on_grid(g, run.finals, run.rejected);
  if (rep.accepted == 0) {
    rep.valid = false;
    rep.tv_distance = 1.0;
    rep.empirical = counts;
    return rep;
  }
  rep.empirical = counts / counts.sum();
  rep.tv_distance = tv_distance(rep.empirical, rep.expected);
  return rep;
}

}  // namespace

EquivarianceReport equivariance_check(const WaveFunction& psi0, const Hamiltonian& h, double t, Index ensemble_size,
                                      Rng& rng, const EquivarianceOptions& options) {
  if (ensemble_size < 100) throw InvalidArgument("equivariance_check: ensemble_size must be >= 100");
  const auto starts = sample_equilibrium(psi0, rng, ensemble_size, options.placement);
  const WaveGuide guide(psi0, h, TimeLattice::for_rk4(0.0, t, options.steps));
  return finish_equivariance(psi0.grid(), guide, starts, position_distribution(evolve_psi(psi0, h, t)), t, options);
}

EquivarianceReport equivariance_check(const DensityMatrix& w0, const Hamiltonian& h, double t, Index ensemble_size,
                                      Rng& rng, const EquivarianceOptions& options) {
  if (ensemble_size < 100) throw InvalidArgument("equivariance_check: ensemble_size must be >= 100");
  const auto starts = sample_equilibrium(w0, rng, ensemble_size, options.placement);
  const DensityGuide guide(w0, h, TimeLattice::for_rk4(0.0, t, options.steps));
  return finish_equivariance(w0.grid(), guide, starts, position_distribution(evolve_w(w0, h, t)), t, options);
}

// ---------------------------------------------------------------------------

namespace {

void write_header(std::ostream& out, int particles, bool with_id) {
  if (with_id) out << "trajectory,";
  out << "t";
  for (int p = 1; p <= particles; ++p) out << ",Q" << p;
  out << ",rejected\n";
}

void write_rows(std::ostream& out, const Trajectory& tr, long id) {
  for (std::size_t i = 0; i < tr.times.size(); ++i) {
    if (id >= 0) out << id << ',';
    out << tr.times[i];
    for (double x : tr.configs[i].positions) out << ',' << x;
    out << ',' << (tr.rejected ? 1 : 0) << '\n';
  }
}

}  // namespace

void write_trajectory_csv(std::ostream& out, const Trajectory& trajectory) {
  const int n = trajectory.configs.empty() ? 0 : static_cast<int>(trajectory.configs.front().positions.size());
  const auto old = out.precision(17);
  write_header(out, n, false);
  write_rows(out, trajectory, -1);
  out.precision(old);
}

void write_trajectories_csv(std::ostream& out, std::span<const Trajectory> trajectories) {
  int n = 0;
  for (const auto& tr : trajectories)
    if (!tr.configs.empty()) n = static_cast<int>(tr.configs.front().positions.size());
  const auto old = out.precision(17);
  write_header(out, n, true);
  for (std::size_t i = 0; i < trajectories.size(); ++i) write_rows(out, trajectories[i], static_cast<long>(i));
  out.precision(old);
}

}  // namespace qsl
