#include "qsl/equivalence.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "qsl/dynamics.hpp"
#include "qsl/errors.hpp"
#include "qsl/parallel.hpp"
#include "qsl/statmech.hpp"

namespace qsl {

EnsembleSpec EnsembleSpec::uniform(const Projector& subspace) {
  if (subspace.rank() < 1) throw InvalidArgument("ensemble: empty subspace");
  EnsembleSpec e;
  e.kind_ = Kind::uniform_sphere;
  e.subspace_ = subspace;
  return e;
}

EnsembleSpec EnsembleSpec::mixture(std::vector<WaveFunction> members, std::vector<double> weights) {
  if (members.empty() || members.size() != weights.size()) throw InvalidArgument("ensemble: members and weights differ");
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0) || !std::isfinite(w)) throw InvalidArgument("ensemble: weights must be positive");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw InvalidArgument("ensemble: weights must sum to 1");
  for (const auto& m : members) {
    if (!(m.grid() == members.front().grid())) throw GridMismatch("ensemble: members on different grids");
    if (!m.is_normalized(1e-8)) throw InvalidArgument("ensemble: member not normalized");
  }
  EnsembleSpec e;
  e.kind_ = Kind::discrete_mixture;
  e.members_ = std::move(members);
  e.weights_ = std::move(weights);
  return e;
}

EnsembleSpec EnsembleSpec::point(const WaveFunction& psi) { return mixture({psi}, {1.0}); }

const Grid& EnsembleSpec::grid() const { return subspace_ ? subspace_->grid() : members_.front().grid(); }

DensityMatrix EnsembleSpec::statistical_density_matrix() const {
  if (kind_ == Kind::uniform_sphere) return iph_state(*subspace_);
  return DensityMatrix::mixture(members_, weights_);
}

WaveFunction EnsembleSpec::draw(Rng& rng) const {
  if (kind_ == Kind::uniform_sphere) return sample_sphere_uniform(*subspace_, rng);
  const double u = rng.uniform();
  double acc = 0.0;
  for (std::size_t i = 0; i < members_.size(); ++i) {
    acc += weights_[i];
    if (u < acc) return members_[i];
  }
  return members_.back();
}

// ---------------------------------------------------------------------------

Projector spectral_projector(const Grid& grid, const Matrix& observable, const EigenvalueSet& in_set) {
  if (observable.rows() != grid.total_dim || observable.cols() != grid.total_dim)
    throw InvalidArgument("observable: shape mismatch");
  if ((observable - observable.adjoint()).norm() > 1e-10 * std::max(1.0, observable.norm()))
    throw NotHermitian("observable must be Hermitian");
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (observable + observable.adjoint()));
  std::vector<Index> keep;
  for (Index i = 0; i < solver.eigenvalues().size(); ++i)
    if (in_set(solver.eigenvalues()[i])) keep.push_back(i);
  Matrix basis(grid.total_dim, static_cast<Index>(keep.size()));
  for (std::size_t j = 0; j < keep.size(); ++j) basis.col(static_cast<Index>(j)) = solver.eigenvectors().col(keep[j]);
  return Projector::from_basis(grid, basis);
}

EigenvalueSet eigenvalue_set(std::vector<double> values, double tol) {
  return [values = std::move(values), tol](double e) {
    return std::any_of(values.begin(), values.end(), [&](double v) { return std::abs(e - v) <= tol; });
  };
}

double observable_probability(const DensityMatrix& w, const Matrix& observable, const EigenvalueSet& in_set) {
  if (!w.is_normalized(1e-8)) throw InvalidArgument("observable_probability: state not normalized");
  const Projector a = spectral_projector(w.grid(), observable, in_set);
  if (a.rank() == 0) return 0.0;
  return (a.basis().adjoint() * w.operator_matrix() * a.basis()).trace().real();
}

double observable_probability(const WaveFunction& psi, const Matrix& observable, const EigenvalueSet& in_set) {
  if (!psi.is_normalized(1e-8)) throw InvalidArgument("observable_probability: state not normalized");
  const Projector a = spectral_projector(psi.grid(), observable, in_set);
  if (a.rank() == 0) return 0.0;
  return (a.basis().adjoint() * psi.coefficients()).squaredNorm();
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> first_coordinates(std::span<const Configuration> configs, std::span<const char> rejected) {
  std::vector<double> out;
  out.reserve(configs.size());
  for (std::size_t i = 0; i < configs.size(); ++i)
    if (rejected.empty() || !rejected[i]) out.push_back(configs[i].positions.front());
  return out;
}

}  // namespace

DistributionReport theorem1_experiment(const EnsembleSpec& ensemble, const Hamiltonian& h, double t,
                                       Index trajectories_per_member, Index member_count, Rng& rng,
                                       const Theorem1Options& options) {
  if (trajectories_per_member < 1 || member_count < 1) throw InvalidArgument("theorem1: sample sizes must be positive");
  if (ensemble.kind() == EnsembleSpec::Kind::uniform_sphere && member_count < 100)
    throw InvalidArgument("theorem1: continuous ensembles need at least 100 members");
  const Grid& g = ensemble.grid();
  if (!(g == h.grid())) throw GridMismatch("theorem1: ensemble and Hamiltonian grids differ");
  const std::uint64_t seed_a = rng();
  const std::uint64_t seed_b = rng();
  const TimeLattice lattice = TimeLattice::for_rk4(0.0, t, options.steps);

  // Arm A: one independent stream per member.
  const auto members = static_cast<std::size_t>(member_count);
  const auto per = static_cast<std::size_t>(trajectories_per_member);
  std::vector<Configuration> finals_a(members * per);
  std::vector<char> rejected_a(members * per, 0);
  parallel_for(members, options.threads, [&](std::size_t m) {
    Rng stream = Rng::stream(seed_a, m);
    const WaveFunction psi0 = ensemble.draw(stream);
    const auto starts = sample_equilibrium(psi0, stream, trajectories_per_member, options.placement);
    const WaveGuide guide(psi0, h, lattice);
    const EnsembleOutcome run = run_ensemble(guide, starts, 0.0, t, options.steps, 1);
    std::copy(run.finals.begin(), run.finals.end(), finals_a.begin() + static_cast<std::ptrdiff_t>(m * per));
    std::copy(run.rejected.begin(), run.rejected.end(), rejected_a.begin() + static_cast<std::ptrdiff_t>(m * per));
  });

  // Arm B: the statistical density matrix guides a single ensemble.
  const Index nb = options.w_trajectories > 0 ? options.w_trajectories : member_count * trajectories_per_member;
  const DensityMatrix w0 = ensemble.statistical_density_matrix();
  Rng stream_b = Rng::stream(seed_b, 0);
  const auto starts_b = sample_equilibrium(w0, stream_b, nb, options.placement);
  const DensityGuide guide_b(w0, h, lattice);
  const EnsembleOutcome run_b = run_ensemble(guide_b, starts_b, 0.0, t, options.steps, options.threads);

  DistributionReport rep;
  rep.threshold = options.threshold;
  const auto rejected_count_a = std::count(rejected_a.begin(), rejected_a.end(), char{1});
  rep.rejected_fraction_a = static_cast<double>(rejected_count_a) / static_cast<double>(finals_a.size());
  rep.rejected_fraction_b = static_cast<double>(run_b.rejected_count) / static_cast<double>(nb);
  if (rep.rejected_fraction_a > options.max_rejected_fraction || rep.rejected_fraction_b > options.max_rejected_fraction)
    throw InvalidRun("theorem1: too many rejected trajectories");
  rep.samples_a = static_cast<Index>(finals_a.size()) - rejected_count_a;
  rep.samples_b = nb - run_b.rejected_count;

  const RealVector ha = histogram_on_grid(g, finals_a, rejected_a);
  const RealVector hb = histogram_on_grid(g, run_b.finals, run_b.rejected);
  rep.histogram_a = ha / ha.sum();
  rep.histogram_b = hb / hb.sum();
  rep.tv_distance = tv_distance(ha, hb);
  const auto xa = first_coordinates(finals_a, rejected_a);
  const auto xb = first_coordinates(run_b.finals, run_b.rejected);
  const KsResult ks = ks_test(xa, xb);
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  rep.pass = rep.tv_distance < rep.threshold;
  return rep;
}

// ---------------------------------------------------------------------------

FlashBinning FlashBinning::make(const Grid& grid, const GrwParams& params, double t_end, int time_bins, int x_bins) {
  params.validate();
  if (time_bins < 1 || x_bins < 1) throw InvalidArgument("flash binning: need at least one bin per axis");
  FlashBinning b;
  b.particles = grid.particles;
  const double rate = grid.particles * params.lambda;
  const double mass = rate > 0.0 ? -std::expm1(-rate * t_end) : 0.0;
  b.time_edges.push_back(0.0);
  for (int i = 1; i < time_bins; ++i) {
    const double q = mass * static_cast<double>(i) / time_bins;
    b.time_edges.push_back(rate > 0.0 ? -std::log1p(-q) / rate : t_end * i / time_bins);
  }
  b.time_edges.push_back(t_end);
  for (int i = 0; i <= x_bins; ++i) b.x_edges.push_back(grid.x_min + (grid.x_max - grid.x_min) * i / x_bins);
  return b;
}

Index FlashBinning::flash_bins() const {
  return static_cast<Index>(time_edges.size() - 1) * static_cast<Index>(x_edges.size() - 1) * particles;
}

Index FlashBinning::bin_count(bool two_flash) const {
  const Index f = flash_bins();
  return two_flash ? f * (f + 1) + 1 : f + 1;
}

namespace {

Index locate(const std::vector<double>& edges, double v) {
  auto it = std::upper_bound(edges.begin(), edges.end(), v);
  Index i = static_cast<Index>(it - edges.begin()) - 1;
  return std::clamp<Index>(i, 0, static_cast<Index>(edges.size()) - 2);
}

}  // namespace

Index FlashBinning::bin_of(const FlashHistory& history, bool two_flash) const {
  const Index f = flash_bins();
  const Index nx = static_cast<Index>(x_edges.size() - 1);
  const auto single = [&](const Flash& e) {
    return (locate(time_edges, e.t) * nx + locate(x_edges, e.x)) * particles + e.particle;
  };
  const auto& ev = history.events;
  if (!two_flash) return ev.empty() ? f : single(ev[0]);
  if (ev.empty()) return f * (f + 1);
  const Index second = ev.size() > 1 ? single(ev[1]) : f;
  return single(ev[0]) * (f + 1) + second;
}

DistributionReport grw_equivalence_experiment(const EnsembleSpec& ensemble, const Hamiltonian& h,
                                              const GrwParams& params, double t_end, Index run_count, Rng& rng,
                                              const GrwEquivalenceOptions& options) {
  if (run_count < 1000) throw InvalidArgument("grw_equivalence: need at least 1000 runs");
  const Grid& g = ensemble.grid();
  if (!(g == h.grid())) throw GridMismatch("grw_equivalence: ensemble and Hamiltonian grids differ");
  const FlashBinning bins = FlashBinning::make(g, params, t_end, options.time_bins, options.x_bins);
  const GrwOptions run_opts{options.two_flash ? std::size_t{2} : std::size_t{1}};
  const DensityMatrix w0 = ensemble.statistical_density_matrix();
  const std::uint64_t seed_a = rng();
  const std::uint64_t seed_b = options.coupled ? seed_a : rng();

  const auto n = static_cast<std::size_t>(run_count);
  std::vector<Index> bin_a(n), bin_b(n);
  std::vector<char> same(n, 1);
  parallel_for(n, options.threads, [&](std::size_t i) {
    Rng ra = Rng::stream(seed_a, i);
    const WaveFunction psi0 = ensemble.draw(ra);
    const auto a = run_grw(psi0, h, t_end, params, ra, run_opts);
    Rng rb = Rng::stream(seed_b, i);
    if (options.coupled) (void)ensemble.draw(rb);
    const auto b = run_grw(w0, h, t_end, params, rb, run_opts);
    bin_a[i] = bins.bin_of(a.history, options.two_flash);
    bin_b[i] = bins.bin_of(b.history, options.two_flash);
    same[i] = a.history == b.history ? 1 : 0;
  });

  const Index nbin = bins.bin_count(options.two_flash);
  RealVector ha = RealVector::Zero(nbin), hb = RealVector::Zero(nbin);
  for (std::size_t i = 0; i < n; ++i) {
    ha[bin_a[i]] += 1.0;
    hb[bin_b[i]] += 1.0;
  }
  DistributionReport rep;
  rep.threshold = options.threshold;
  rep.samples_a = run_count;
  rep.samples_b = run_count;
  rep.histogram_a = ha / ha.sum();
  rep.histogram_b = hb / hb.sum();
  rep.tv_distance = tv_distance(ha, hb);
  std::vector<double> sa(bin_a.begin(), bin_a.end()), sb(bin_b.begin(), bin_b.end());
  const KsResult ks = ks_test(sa, sb);
  rep.ks_statistic = ks.statistic;
  rep.ks_p_value = ks.p_value;
  if (options.coupled) rep.bit_identical = std::all_of(same.begin(), same.end(), [](char c) { return c == 1; });
  rep.pass = rep.tv_distance < rep.threshold && rep.bit_identical.value_or(true);
  return rep;
}

// ---------------------------------------------------------------------------

namespace {

// Sites of each particle axis carrying any probability of the branch.
std::vector<std::vector<char>> axis_support(const WaveFunction& phi) {
  const Grid& g = phi.grid();
  const RealVector rho = position_distribution(phi);
  std::vector<std::vector<char>> s(static_cast<std::size_t>(g.particles));
  for (int p = 0; p < g.particles; ++p) {
    const RealVector m = particle_marginal(g, rho, p);
    s[static_cast<std::size_t>(p)].resize(static_cast<std::size_t>(g.points));
    for (int i = 0; i < g.points; ++i) s[static_cast<std::size_t>(p)][static_cast<std::size_t>(i)] = m[i] > 1e-300;
  }
  return s;
}

double distance_to(const Grid& g, const std::vector<char>& support, double x) {
  double best = std::numeric_limits<double>::infinity();
  for (int i = 0; i < g.points; ++i)
    if (support[static_cast<std::size_t>(i)]) best = std::min(best, std::abs(g.coordinate(i) - x));
  return best;
}

}  // namespace

PointerReport pointer_macro_check(cplx c1, cplx c2, const WaveFunction& branch1, const WaveFunction& branch2,
                                  std::span<const double> masses, const GrwParams& params, Index run_count, Rng& rng,
                                  const PointerOptions& options) {
  params.validate();
  const Grid& g = branch1.grid();
  if (!(g == branch2.grid())) throw GridMismatch("pointer_macro_check: branch grids differ");
  if (run_count < 1) throw InvalidArgument("pointer_macro_check: need runs");
  const double p1 = std::norm(c1);
  const double p2 = std::norm(c2);
  if (std::abs(p1 + p2 - 1.0) > 1e-9) throw InvalidArgument("pointer_macro_check: |c1|^2 + |c2|^2 must be 1");
  if (!branch1.is_normalized(1e-8) || !branch2.is_normalized(1e-8))
    throw InvalidArgument("pointer_macro_check: branches must be normalized");
  if ((branch1.amplitudes().cwiseAbs().cwiseProduct(branch2.amplitudes().cwiseAbs())).maxCoeff() > 0.0)
    throw SupportViolation("pointer_macro_check: branch supports overlap");

  const auto s1 = axis_support(branch1);
  const auto s2 = axis_support(branch2);
  for (int p = 0; p < g.particles; ++p) {
    const auto& a = s1[static_cast<std::size_t>(p)];
    const auto& b = s2[static_cast<std::size_t>(p)];
    bool any = false;
    for (std::size_t i = 0; i < a.size(); ++i) any = any || (a[i] && b[i]);
    if (any) throw SupportViolation("pointer_macro_check: branches overlap on a particle axis");
  }

  const WaveFunction psi(g, c1 * branch1.amplitudes() + c2 * branch2.amplitudes());
  std::vector<DensityMatrix> parts;
  std::vector<double> weights;
  if (p1 > 0.0) {
    parts.push_back(DensityMatrix::from_pure(branch1));
    weights.push_back(p1);
  }
  if (p2 > 0.0) {
    parts.push_back(DensityMatrix::from_pure(branch2));
    weights.push_back(p2);
  }
  Matrix kernel = Matrix::Zero(g.total_dim, g.total_dim);
  for (std::size_t i = 0; i < parts.size(); ++i) kernel += weights[i] * parts[i].kernel();
  const DensityMatrix w(g, std::move(kernel));

  const auto attribute = [&](int particle, double x) {
    const auto pp = static_cast<std::size_t>(particle);
    return distance_to(g, s1[pp], x) <= distance_to(g, s2[pp], x);
  };

  // First flash of each run, taken from the state as given.
  std::vector<RealVector> dens_psi, dens_w;
  for (int p = 0; p < g.particles; ++p) {
    dens_psi.push_back(center_density(psi, p, params.sigma));
    dens_w.push_back(center_density(w, p, params.sigma));
  }
  Index hits_psi = 0, hits_w = 0;
  for (Index r = 0; r < run_count; ++r) {
    (void)rng.uniform();  // waiting time, drawn for parity with run_grw
    const int k = std::min(g.particles - 1, static_cast<int>(rng.uniform() * g.particles));
    const double u = rng.uniform();
    const auto kk = static_cast<std::size_t>(k);
    if (attribute(k, g.coordinate(sample_center_index(dens_psi[kk], u)))) ++hits_psi;
    if (attribute(k, g.coordinate(sample_center_index(dens_w[kk], u)))) ++hits_w;
  }

  PointerReport rep;
  rep.expected_fraction = p1;
  rep.flash_fraction_psi = static_cast<double>(hits_psi) / static_cast<double>(run_count);
  rep.flash_fraction_w = static_cast<double>(hits_w) / static_cast<double>(run_count);
  rep.standard_error = std::sqrt(p1 * p2 / static_cast<double>(run_count));

  const auto region_mass = [&](const MassDensityField& f, int which) {
    double m = 0.0;
    for (int i = 0; i < g.points; ++i) {
      // Mass attributed by particle-0 support geometry (particles share the axis).
      const bool in1 = attribute(0, g.coordinate(i));
      if (in1 == (which == 1)) m += f.values[i] * g.dx;
    }
    return m;
  };
  const MassDensityField mp = mass_density(psi, masses);
  const MassDensityField mw = mass_density(w, masses);
  rep.mass_region1_psi = region_mass(mp, 1);
  rep.mass_region2_psi = region_mass(mp, 2);
  rep.mass_region1_w = region_mass(mw, 1);
  rep.mass_region2_w = region_mass(mw, 2);
  const double inf = std::numeric_limits<double>::infinity();
  rep.expected_mass_ratio = p2 > 0.0 ? p1 / p2 : inf;
  rep.mass_ratio_psi = rep.mass_region2_psi > 0.0 ? rep.mass_region1_psi / rep.mass_region2_psi : inf;
  rep.mass_ratio_w = rep.mass_region2_w > 0.0 ? rep.mass_region1_w / rep.mass_region2_w : inf;

  const double band = std::max(options.flash_sigmas * rep.standard_error, 0.0);
  rep.flash_pass = std::abs(rep.flash_fraction_psi - p1) <= band && std::abs(rep.flash_fraction_w - p1) <= band;
  const auto ratio_ok = [&](double got) {
    if (std::isinf(rep.expected_mass_ratio)) return std::isinf(got);
    return std::abs(got - rep.expected_mass_ratio) <= options.mass_ratio_tolerance;
  };
  rep.mass_pass = ratio_ok(rep.mass_ratio_psi) && ratio_ok(rep.mass_ratio_w);
  rep.pass = rep.flash_pass && rep.mass_pass;
  return rep;
}

}  // namespace qsl
