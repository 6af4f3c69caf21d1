#include "qsl/subsystem.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "qsl/errors.hpp"

namespace qsl {

void Splitting::validate(int particle_count) const {
  if (x.empty() || y.empty()) throw InvalidArgument("splitting: both parts must be nonempty");
  std::vector<int> seen(static_cast<std::size_t>(std::max(particle_count, 0)), 0);
  for (const auto* part : {&x, &y})
    for (int p : *part) {
      if (p < 0 || p >= particle_count) throw InvalidArgument("splitting: particle index out of range");
      if (seen[static_cast<std::size_t>(p)]++) throw InvalidArgument("splitting: parts overlap");
    }
  if (static_cast<int>(x.size() + y.size()) != particle_count) throw InvalidArgument("splitting: parts must cover all particles");
}

Grid subsystem_grid(const Grid& full, std::size_t particles) {
  return build_grid(static_cast<int>(particles), full.points, full.x_min, full.x_max);
}

namespace {

// Flat full-lattice offsets of every configuration of `part` (other
// particles at index 0), enumerated in the part-grid's flat order.
std::vector<Index> part_offsets(const Grid& full, const std::vector<int>& part) {
  const Grid sub = subsystem_grid(full, part.size());
  std::vector<Index> out(static_cast<std::size_t>(sub.total_dim));
  for (Index a = 0; a < sub.total_dim; ++a) {
    const auto idx = sub.unflatten(a);
    Index flat = 0;
    for (std::size_t j = 0; j < part.size(); ++j) flat += idx[j] * full.stride(part[j]);
    out[static_cast<std::size_t>(a)] = flat;
  }
  return out;
}

struct Slice {
  Grid x_grid;
  Matrix kernel;  // unnormalized w(x, x') = W(x, Y, x', Y)
  std::vector<double> y;
  std::vector<int> y_sites;
  Index y_offset = 0;
};

Slice take_slice(const DensityMatrix& w, const Splitting& split, std::span<const double> y) {
  const Grid& g = w.grid();
  split.validate(g.particles);
  if (y.size() != split.y.size()) throw InvalidArgument("conditional: Y has the wrong size");
  Slice s{subsystem_grid(g, split.x.size()), {}, {}, {}, 0};
  for (std::size_t j = 0; j < y.size(); ++j) {
    const int site = g.nearest_site(y[j]);
    s.y_sites.push_back(site);
    s.y.push_back(g.coordinate(site));
    s.y_offset += site * g.stride(split.y[j]);
  }
  const auto xo = part_offsets(g, split.x);
  const auto n = static_cast<Index>(xo.size());
  s.kernel.resize(n, n);
  for (Index a = 0; a < n; ++a)
    for (Index b = 0; b < n; ++b)
      s.kernel(a, b) = w.kernel()(xo[static_cast<std::size_t>(a)] + s.y_offset, xo[static_cast<std::size_t>(b)] + s.y_offset);
  const double peak = w.kernel().diagonal().real().maxCoeff();
  const double slice_peak = s.kernel.diagonal().real().maxCoeff();
  if (!(slice_peak > 1e-14 * peak)) throw ZeroSlice("conditional: W vanishes on the Y slice");
  return s;
}

double top_fraction(const Matrix& k) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(0.5 * (k + k.adjoint()), Eigen::EigenvaluesOnly);
  const double tr = k.trace().real();
  return solver.eigenvalues().maxCoeff() / tr;
}

// Coarse-cell bookkeeping on the environment lattice.
struct CoarseGrid {
  int axes = 1;
  int per_axis = 1;
  int block = 1;

  Index cell_of(std::span<const int> sites) const {
    Index c = 0;
    for (int s : sites) c = c * per_axis + s / block;
    return c;
  }
  Index count() const {
    Index n = 1;
    for (int i = 0; i < axes; ++i) n *= per_axis;
    return n;
  }
  std::vector<int> coords(Index c) const {
    std::vector<int> out(static_cast<std::size_t>(axes));
    for (int i = axes - 1; i >= 0; --i) {
      out[static_cast<std::size_t>(i)] = static_cast<int>(c % per_axis);
      c /= per_axis;
    }
    return out;
  }
};

CoarseGrid make_coarse(const Grid& g, std::size_t y_axes, const MacroCoarsening& mc) {
  if (mc.block < 1) throw InvalidArgument("coarsening: block must be positive");
  return {static_cast<int>(y_axes), (g.points + mc.block - 1) / mc.block, mc.block};
}

// Probability mass per coarse environment cell.
RealVector coarse_masses(const DensityMatrix& w, const Splitting& split, const CoarseGrid& cg) {
  const Grid& g = w.grid();
  RealVector m = RealVector::Zero(cg.count());
  std::vector<int> ys(split.y.size());
  for (Index q = 0; q < g.total_dim; ++q) {
    for (std::size_t j = 0; j < split.y.size(); ++j) ys[j] = g.axis_index(q, split.y[j]);
    m[cg.cell_of(ys)] += std::max(0.0, w.kernel()(q, q).real()) * g.cell_volume();
  }
  return m;
}

// Chebyshev-connected component of occupied cells containing `start`.
std::vector<char> component(const RealVector& mass, double threshold, const CoarseGrid& cg, Index start) {
  std::vector<char> in(static_cast<std::size_t>(cg.count()), 0);
  if (mass[start] <= threshold) return in;
  std::deque<Index> queue{start};
  in[static_cast<std::size_t>(start)] = 1;
  int offsets = 1;
  for (int i = 0; i < cg.axes; ++i) offsets *= 3;
  while (!queue.empty()) {
    const Index c = queue.front();
    queue.pop_front();
    const auto base = cg.coords(c);
    for (int o = 0; o < offsets; ++o) {
      int code = o;
      Index next = 0;
      bool ok = true;
      for (int i = 0; i < cg.axes; ++i) {
        const int v = base[static_cast<std::size_t>(i)] + code % 3 - 1;
        code /= 3;
        if (v < 0 || v >= cg.per_axis) ok = false;
        next = next * cg.per_axis + v;
      }
      if (!ok) continue;
      if (in[static_cast<std::size_t>(next)] || mass[next] <= threshold) continue;
      in[static_cast<std::size_t>(next)] = 1;
      queue.push_back(next);
    }
  }
  return in;
}

}  // namespace

ConditionalDM conditional_dm(const DensityMatrix& w, const Splitting& split, std::span<const double> y) {
  Slice s = take_slice(w, split, y);
  const double tr = s.kernel.trace().real() * s.x_grid.cell_volume();
  s.kernel /= tr;
  return {DensityMatrix(s.x_grid, std::move(s.kernel)), std::move(s.y), std::move(s.y_sites), false};
}

std::optional<ConditionalDM> effective_dm(const DensityMatrix& w, const Splitting& split, std::span<const double> y,
                                          const MacroCoarsening& coarsening) {
  ConditionalDM c = conditional_dm(w, split, y);
  if (top_fraction(c.w.kernel()) < 1.0 - coarsening.purity_epsilon) return std::nullopt;

  const Grid& g = w.grid();
  const CoarseGrid cg = make_coarse(g, split.y.size(), coarsening);
  const RealVector mass = coarse_masses(w, split, cg);
  const auto comp = component(mass, coarsening.mass_threshold, cg, cg.cell_of(c.y_sites));
  if (!std::any_of(comp.begin(), comp.end(), [](char v) { return v != 0; })) return std::nullopt;

  // x-reduced state of W restricted to environment configurations in the
  // component holding Y.
  const auto xo = part_offsets(g, split.x);
  const auto yo = part_offsets(g, split.y);
  const Grid y_grid = subsystem_grid(g, split.y.size());
  const auto n = static_cast<Index>(xo.size());
  Matrix reduced = Matrix::Zero(n, n);
  for (Index b = 0; b < y_grid.total_dim; ++b) {
    const auto sites = y_grid.unflatten(b);
    if (!comp[static_cast<std::size_t>(cg.cell_of(sites))]) continue;
    const Index off = yo[static_cast<std::size_t>(b)];
    for (Index i = 0; i < n; ++i)
      for (Index j = 0; j < n; ++j)
        reduced(i, j) += w.kernel()(xo[static_cast<std::size_t>(i)] + off, xo[static_cast<std::size_t>(j)] + off);
  }
  if (!(reduced.trace().real() > 0.0)) return std::nullopt;
  if (top_fraction(reduced) < 1.0 - coarsening.purity_epsilon) return std::nullopt;
  c.effective = true;
  return c;
}

RealVector conditional_probability(const DensityMatrix& w, const Splitting& split, std::span<const double> y) {
  const ConditionalDM c = conditional_dm(w, split, y);
  RealVector p = c.w.kernel().diagonal().real().cwiseMax(0.0);
  return p / (p.sum() * c.w.grid().cell_volume());
}

std::vector<CollapseEvent> effective_collapse_monitor(std::span<const DensityMatrix> w_series,
                                                      std::span<const std::vector<double>> y_series,
                                                      std::span<const double> times, const Splitting& split,
                                                      const MacroCoarsening& coarsening) {
  if (w_series.size() != y_series.size() || w_series.size() != times.size())
    throw InvalidArgument("collapse monitor: series are not aligned");
  std::vector<CollapseEvent> events;
  std::optional<DensityMatrix> prev_w;
  bool prev_effective = false;
  for (std::size_t i = 0; i < w_series.size(); ++i) {
    std::optional<ConditionalDM> eff;
    std::optional<DensityMatrix> now_w;
    try {
      eff = effective_dm(w_series[i], split, y_series[i], coarsening);
      now_w = eff ? eff->w : conditional_dm(w_series[i], split, y_series[i]).w;
    } catch (const ZeroSlice&) {
    }
    const bool now_effective = eff.has_value();
    if (i > 0 && now_effective && !prev_effective) {
      CollapseEvent e{i, times[i], 0.0};
      if (prev_w) e.magnitude = frobenius_distance(*now_w, *prev_w);
      events.push_back(e);
    }
    prev_effective = now_effective;
    prev_w = std::move(now_w);
  }
  return events;
}

WaveFunction product_state(const WaveFunction& x_part, const WaveFunction& y_part, const Splitting& split) {
  const Grid& gx = x_part.grid();
  const Grid& gy = y_part.grid();
  if (gx.points != gy.points || gx.x_min != gy.x_min || gx.x_max != gy.x_max)
    throw GridMismatch("product_state: part grids use different axes");
  if (static_cast<int>(split.x.size()) != gx.particles || static_cast<int>(split.y.size()) != gy.particles)
    throw InvalidArgument("product_state: splitting does not match the part grids");
  const Grid full = build_grid(gx.particles + gy.particles, gx.points, gx.x_min, gx.x_max);
  split.validate(full.particles);
  const auto xo = part_offsets(full, split.x);
  const auto yo = part_offsets(full, split.y);
  Vector amp = Vector::Zero(full.total_dim);
  for (std::size_t a = 0; a < xo.size(); ++a)
    for (std::size_t b = 0; b < yo.size(); ++b)
      amp[xo[a] + yo[b]] = x_part[static_cast<Index>(a)] * y_part[static_cast<Index>(b)];
  return WaveFunction(full, std::move(amp));
}

namespace {

std::vector<char> occupied_cells(const WaveFunction& state, const Splitting& split, const CoarseGrid& cg,
                                 double threshold) {
  const RealVector m = coarse_masses(DensityMatrix::from_pure(state), split, cg);
  std::vector<char> out(static_cast<std::size_t>(m.size()));
  for (Index i = 0; i < m.size(); ++i) out[static_cast<std::size_t>(i)] = m[i] > threshold;
  return out;
}

std::vector<char> occupied_y_cells(const WaveFunction& phi, const CoarseGrid& cg, double threshold) {
  const Grid& g = phi.grid();
  std::vector<double> m(static_cast<std::size_t>(cg.count()), 0.0);
  for (Index q = 0; q < g.total_dim; ++q) m[static_cast<std::size_t>(cg.cell_of(g.unflatten(q)))] += std::norm(phi[q]) * g.cell_volume();
  std::vector<char> out(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) out[i] = m[i] > threshold;
  return out;
}

}  // namespace

W3Example build_w3_example(const WaveFunction& psi, const WaveFunction& phi1, const WaveFunction& phi2,
                           const WaveFunction& psi_perp1, const WaveFunction& psi_perp2, const Splitting& split,
                           const MacroCoarsening& coarsening) {
  if (!(phi1.grid() == phi2.grid())) throw GridMismatch("w3: phi grids differ");
  const WaveFunction base1 = product_state(psi, phi1, split);
  const WaveFunction base2 = product_state(psi, phi2, split);
  const Grid& full = base1.grid();
  if (!(psi_perp1.grid() == full) || !(psi_perp2.grid() == full)) throw GridMismatch("w3: perpendicular parts on wrong grid");

  const CoarseGrid cg = make_coarse(full, split.y.size(), coarsening);
  const auto c1 = occupied_y_cells(phi1, cg, coarsening.mass_threshold);
  const auto c2 = occupied_y_cells(phi2, cg, coarsening.mass_threshold);
  const auto count = [](const std::vector<char>& v) { return std::count(v.begin(), v.end(), char{1}); };
  if (count(c1) != 1 || c1 != c2) throw SupportViolation("w3: phi1 and phi2 must share a single coarse cell");
  const auto cell = static_cast<std::size_t>(std::find(c1.begin(), c1.end(), char{1}) - c1.begin());
  for (const WaveFunction* perp : {&psi_perp1, &psi_perp2}) {
    if (perp->amplitudes().squaredNorm() == 0.0) continue;
    if (occupied_cells(*perp, split, cg, coarsening.mass_threshold)[cell])
      throw SupportViolation("w3: a perpendicular part occupies the branch cell");
  }

  const auto make = [&](const WaveFunction& b, const WaveFunction& perp) {
    const WaveFunction total(full, b.amplitudes() + perp.amplitudes());
    return DensityMatrix::from_pure(total.normalized());
  };
  DensityMatrix w1 = make(base1, psi_perp1);
  DensityMatrix w2 = make(base2, psi_perp2);
  DensityMatrix w3(full, 0.5 * (w1.kernel() + w2.kernel()));

  // Block with both environment slots inside the branch cell.
  std::vector<char> inside(static_cast<std::size_t>(full.total_dim));
  std::vector<int> ys(split.y.size());
  for (Index q = 0; q < full.total_dim; ++q) {
    for (std::size_t j = 0; j < split.y.size(); ++j) ys[j] = full.axis_index(q, split.y[j]);
    inside[static_cast<std::size_t>(q)] = static_cast<std::size_t>(cg.cell_of(ys)) == cell;
  }
  Matrix m3 = Matrix::Zero(full.total_dim, full.total_dim);
  for (Index a = 0; a < full.total_dim; ++a)
    for (Index b = 0; b < full.total_dim; ++b)
      if (inside[static_cast<std::size_t>(a)] && inside[static_cast<std::size_t>(b)]) m3(a, b) = w3.kernel()(a, b);
  Matrix perp = w3.kernel() - m3;
  return {std::move(w1), std::move(w2), std::move(w3), DensityMatrix(full, std::move(m3)), DensityMatrix(full, std::move(perp))};
}

}  // namespace qsl
