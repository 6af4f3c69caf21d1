#include "qsl/grw.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include "qsl/dynamics.hpp"
#include "qsl/errors.hpp"

namespace qsl {

void GrwParams::validate() const {
  if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidArgument("GRW: lambda must be finite and >= 0");
  if (!std::isfinite(sigma) || !(sigma > 0.0)) throw InvalidArgument("GRW: sigma must be positive");
}

double collapse_gaussian(double d, double sigma) {
  return std::exp(-d * d / (2.0 * sigma * sigma)) / std::sqrt(2.0 * std::numbers::pi * sigma * sigma);
}

namespace {

void check_particle(const Grid& g, int particle) {
  if (particle < 0 || particle >= g.particles) throw InvalidArgument("GRW: particle label out of range");
}

// Multiplier sqrt(Lambda_k(x)) per configuration site.
RealVector sqrt_rate(const Grid& g, int particle, double x, double sigma) {
  RealVector s = collapse_rate_operator(g, particle, x, sigma);
  return s.cwiseSqrt();
}

}  // namespace

RealVector collapse_rate_operator(const Grid& grid, int particle, double x, double sigma) {
  check_particle(grid, particle);
  if (!(sigma > 0.0)) throw InvalidArgument("GRW: sigma must be positive");
  std::vector<double> axis(static_cast<std::size_t>(grid.points));
  for (int i = 0; i < grid.points; ++i) axis[static_cast<std::size_t>(i)] = collapse_gaussian(grid.coordinate(i) - x, sigma);
  RealVector d(grid.total_dim);
  for (Index q = 0; q < grid.total_dim; ++q) d[q] = axis[static_cast<std::size_t>(grid.axis_index(q, particle))];
  return d;
}

double sample_collapse_time(int particle_count, double lambda, Rng& rng) {
  if (particle_count < 1) throw InvalidArgument("sample_collapse_time: need at least one particle");
  if (!std::isfinite(lambda) || lambda < 0.0) throw InvalidArgument("sample_collapse_time: bad rate");
  return rng.exponential(particle_count * lambda);
}

PsiCollapse collapse_psi(const WaveFunction& psi, int particle, double x, double sigma) {
  const Grid& g = psi.grid();
  const RealVector s = sqrt_rate(g, particle, x, sigma);
  Vector amp = psi.amplitudes().cwiseProduct(s.cast<cplx>());
  const double weight = amp.squaredNorm() * g.cell_volume();
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ZeroWeight("collapse_psi: zero-weight center");
  amp /= std::sqrt(weight);
  return {WaveFunction(g, std::move(amp)), weight};
}

DensityMatrix collapse_w_unnormalized(const DensityMatrix& w, int particle, double x, double sigma) {
  const RealVector s = sqrt_rate(w.grid(), particle, x, sigma);
  Matrix k = s.asDiagonal() * w.kernel() * s.asDiagonal();
  return DensityMatrix(w.grid(), std::move(k));
}

WCollapse collapse_w(const DensityMatrix& w, int particle, double x, double sigma) {
  DensityMatrix u = collapse_w_unnormalized(w, particle, x, sigma);
  const double weight = u.trace();
  if (!(weight > 0.0) || !std::isfinite(weight)) throw ZeroWeight("collapse_w: zero-weight center");
  Matrix k = u.kernel() / weight;
  return {DensityMatrix(w.grid(), std::move(k)), weight};
}

namespace {

RealVector center_density_from(const Grid& g, const RealVector& density, int particle, double sigma) {
  check_particle(g, particle);
  if (!(sigma > 0.0)) throw InvalidArgument("GRW: sigma must be positive");
  const RealVector marginal = particle_marginal(g, density, particle);
  RealVector out = RealVector::Zero(g.points);
  for (int j = 0; j < g.points; ++j) {
    double acc = 0.0;
    for (int i = 0; i < g.points; ++i) acc += marginal[i] * collapse_gaussian(g.coordinate(i) - g.coordinate(j), sigma);
    out[j] = acc;
  }
  return out;
}

}  // namespace

RealVector center_density(const WaveFunction& psi, int particle, double sigma) {
  return center_density_from(psi.grid(), position_distribution(psi), particle, sigma);
}

RealVector center_density(const DensityMatrix& w, int particle, double sigma) {
  return center_density_from(w.grid(), position_distribution(w), particle, sigma);
}

int sample_center_index(const RealVector& density, double u) {
  if (density.size() == 0) throw InvalidArgument("sample_center_index: empty density");
  const double total = density.sum();
  if (!(total > 0.0)) throw ZeroWeight("sample_center_index: zero center density");
  const double target = u * total;
  double acc = 0.0;
  for (Index j = 0; j < density.size(); ++j) {
    acc += density[j];
    if (target < acc) return static_cast<int>(j);
  }
  return static_cast<int>(density.size() - 1);
}

namespace {

WaveFunction evolve_state(const WaveFunction& s, const Hamiltonian& h, double t) { return evolve_psi(s, h, t); }
DensityMatrix evolve_state(const DensityMatrix& s, const Hamiltonian& h, double t) { return evolve_w(s, h, t); }
WaveFunction collapse_state(const WaveFunction& s, int k, double x, double sigma) {
  return collapse_psi(s, k, x, sigma).state;
}
DensityMatrix collapse_state(const DensityMatrix& s, int k, double x, double sigma) {
  return collapse_w(s, k, x, sigma).state;
}

template <class State>
GrwRun<State> run_grw_impl(const State& s0, const Hamiltonian& h, double t_end, const GrwParams& params, Rng& rng,
                           const GrwOptions& options) {
  params.validate();
  if (!(s0.grid() == h.grid())) throw GridMismatch("run_grw: state and Hamiltonian grids differ");
  if (!std::isfinite(t_end) || t_end < 0.0) throw InvalidArgument("run_grw: t_end must be finite and >= 0");
  if (!s0.is_normalized(1e-8)) throw InvalidArgument("run_grw: state not normalized");
  const Grid& g = s0.grid();
  const int n = g.particles;
  GrwRun<State> run{s0, {}, 0.0};
  double t = 0.0;
  while (true) {
    const double wait = sample_collapse_time(n, params.lambda, rng);
    if (run.history.events.size() >= options.max_flashes) break;
    if (!(t + wait <= t_end)) {
      if (t_end > t) run.final_state = evolve_state(run.final_state, h, t_end - t);
      t = t_end;
      break;
    }
    if (wait > 0.0) run.final_state = evolve_state(run.final_state, h, wait);
    t += wait;
    const int k = std::min(n - 1, static_cast<int>(rng.uniform() * n));
    const double u = rng.uniform();
    const int j = sample_center_index(center_density(run.final_state, k, params.sigma), u);
    const double x = g.coordinate(j);
    run.final_state = collapse_state(run.final_state, k, x, params.sigma);
    run.history.events.push_back({x, t, k});
  }
  run.final_time = t;
  return run;
}

template <class State>
MassDensityField mass_density_impl(const State& s, std::span<const double> masses, double t) {
  const Grid& g = s.grid();
  if (static_cast<int>(masses.size()) != g.particles) throw InvalidArgument("mass_density: one mass per particle");
  const RealVector density = position_distribution(s);
  MassDensityField f;
  f.t = t;
  f.values = RealVector::Zero(g.points);
  for (int p = 0; p < g.particles; ++p)
    f.values += masses[static_cast<std::size_t>(p)] * particle_marginal(g, density, p) / g.dx;
  f.x.resize(static_cast<std::size_t>(g.points));
  for (int i = 0; i < g.points; ++i) f.x[static_cast<std::size_t>(i)] = g.coordinate(i);
  return f;
}

}  // namespace

GrwRun<WaveFunction> run_grw(const WaveFunction& psi0, const Hamiltonian& h, double t_end, const GrwParams& params,
                             Rng& rng, const GrwOptions& options) {
  return run_grw_impl(psi0, h, t_end, params, rng, options);
}

GrwRun<DensityMatrix> run_grw(const DensityMatrix& w0, const Hamiltonian& h, double t_end, const GrwParams& params,
                              Rng& rng, const GrwOptions& options) {
  return run_grw_impl(w0, h, t_end, params, rng, options);
}

MassDensityField mass_density(const WaveFunction& psi, std::span<const double> masses, double t) {
  return mass_density_impl(psi, masses, t);
}

MassDensityField mass_density(const DensityMatrix& w, std::span<const double> masses, double t) {
  return mass_density_impl(w, masses, t);
}

void write_flash_csv(std::ostream& out, const FlashHistory& history) {
  const auto old = out.precision(17);
  out << "T,X,k\n";
  for (const Flash& f : history.events) out << f.t << ',' << f.x << ',' << f.particle + 1 << '\n';
  out.precision(old);
}

void write_mass_density_csv(std::ostream& out, const MassDensityField& field) {
  const auto old = out.precision(17);
  out << "x,m\n";
  for (std::size_t i = 0; i < field.x.size(); ++i) out << field.x[i] << ',' << field.values[static_cast<Index>(i)] << '\n';
  out.precision(old);
}

}  // namespace qsl
