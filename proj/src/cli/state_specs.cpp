#include "cli/state_specs.hpp"

#include <cmath>
#include <numbers>

#include "qsl/errors.hpp"

namespace qsl::cli {

Grid grid_from(const Json& spec) {
  require_keys(spec, {"particles", "points", "x_min", "x_max"}, "grid");
  return build_grid(static_cast<int>(get_int(spec, "particles")), static_cast<int>(get_int(spec, "points")),
                    get_double(spec, "x_min"), get_double(spec, "x_max"));
}

Hamiltonian hamiltonian_from(const Grid& grid, const Json& spec) {
  require_keys(spec, {"masses", "hbar", "potential"}, "hamiltonian");
  const std::vector<double> masses = get_doubles(spec, "masses");
  const double hbar = get_double(spec, "hbar");
  const Json& pot = get_object(spec, "potential");
  const std::string kind = get_string(pot, "kind");
  Potential v;
  if (kind == "none") {
    require_keys(pot, {"kind"}, "potential");
    v = [](std::span<const double>) { return 0.0; };
  } else if (kind == "tilt") {
    require_keys(pot, {"kind", "force"}, "potential");
    const double f = get_double(pot, "force");
    v = [f](std::span<const double> q) {
      double s = 0.0;
      for (double x : q) s += f * x;
      return s;
    };
  } else if (kind == "harmonic") {
    require_keys(pot, {"kind", "omega"}, "potential");
    const double w = get_double(pot, "omega");
    v = [w, masses](std::span<const double> q) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i) s += 0.5 * masses[i] * w * w * q[i] * q[i];
      return s;
    };
  } else if (kind == "coupling") {
    require_keys(pot, {"kind", "strength"}, "potential");
    const double g = get_double(pot, "strength");
    v = [g](std::span<const double> q) {
      double s = 0.0;
      for (std::size_t i = 0; i < q.size(); ++i)
        for (std::size_t j = i + 1; j < q.size(); ++j) s += g * q[i] * q[j];
      return s;
    };
  } else {
    throw ConfigError("config: unknown potential kind '" + kind + "'");
  }
  return build_hamiltonian(grid, v, masses, hbar);
}

Matrix macro_variable_from(const std::string& name, const Hamiltonian& h) {
  if (name == "energy") return h.matrix();
  if (name == "position") return position_operator(h.grid(), 0);
  if (name == "kinetic")
    return build_hamiltonian(h.grid(), [](std::span<const double>) { return 0.0; }, h.masses(), h.hbar()).matrix();
  throw ConfigError("config: unknown macro variable '" + name + "'");
}

WaveFunction state_from(const Hamiltonian& h, const Json& spec) {
  const Grid& g = h.grid();
  const std::string kind = get_string(spec, "kind");
  if (kind == "eigenstates") {
    require_keys(spec, {"kind", "terms"}, "state");
    Vector c = Vector::Zero(h.dim());
    for (const auto& term : spec.at("terms")) {
      if (!term.is_array() || term.size() != 3) throw ConfigError("config: eigenstate terms are [index, re, im]");
      const auto k = term[0].get<Index>();
      if (k < 0 || k >= h.dim()) throw ConfigError("config: eigenstate index out of range");
      c += cplx(term[1].get<double>(), term[2].get<double>()) * h.eigenvectors().col(k);
    }
    if (c.norm() == 0.0) throw ConfigError("config: eigenstate superposition is zero");
    return WaveFunction::from_coefficients(g, c.normalized());
  }
  if (kind == "packet") {
    require_keys(spec, {"kind", "centers", "widths", "momenta"}, "state");
    const auto c = get_doubles(spec, "centers");
    const auto w = get_doubles(spec, "widths");
    const auto k = get_doubles(spec, "momenta");
    const auto n = static_cast<std::size_t>(g.particles);
    if (c.size() != n || w.size() != n || k.size() != n) throw ConfigError("config: packet needs one entry per particle");
    Vector a(g.total_dim);
    for (Index q = 0; q < g.total_dim; ++q) {
      const auto idx = g.unflatten(q);
      cplx v = 1.0;
      for (std::size_t p = 0; p < n; ++p) {
        const double x = g.coordinate(idx[p]);
        v *= std::exp(-0.25 * (x - c[p]) * (x - c[p]) / (w[p] * w[p])) * std::exp(cplx(0.0, k[p] * x));
      }
      a[q] = v;
    }
    return WaveFunction(g, a).normalized();
  }
  if (kind == "compact") {
    require_keys(spec, {"kind", "lo", "hi"}, "state");
    if (g.particles != 1) throw ConfigError("config: compact states are single-particle");
    const double lo = get_double(spec, "lo"), hi = get_double(spec, "hi");
    Vector a = Vector::Zero(g.total_dim);
    for (int i = 0; i < g.points; ++i) {
      const double x = g.coordinate(i);
      if (x > lo && x < hi) a[i] = std::sin(std::numbers::pi * (x - lo) / (hi - lo));
    }
    if (a.norm() == 0.0) throw ConfigError("config: compact state has no grid support");
    return WaveFunction(g, a).normalized();
  }
  throw ConfigError("config: unknown state kind '" + kind + "'");
}

Projector subspace_from(const Hamiltonian& h, const Json& spec) {
  const Grid& g = h.grid();
  const std::string kind = get_string(spec, "kind");
  if (kind == "eigenstates") {
    require_keys(spec, {"kind", "indices"}, "subspace");
    const auto& idx = spec.at("indices");
    Matrix b(h.dim(), static_cast<Index>(idx.size()));
    for (std::size_t j = 0; j < idx.size(); ++j) {
      const auto k = idx[j].get<Index>();
      if (k < 0 || k >= h.dim()) throw ConfigError("config: eigenstate index out of range");
      b.col(static_cast<Index>(j)) = h.eigenvectors().col(k);
    }
    return Projector::from_basis(g, b);
  }
  if (kind == "span") {
    require_keys(spec, {"kind", "states"}, "subspace");
    const auto& states = spec.at("states");
    Matrix b(h.dim(), static_cast<Index>(states.size()));
    for (std::size_t j = 0; j < states.size(); ++j) b.col(static_cast<Index>(j)) = state_from(h, states[j]).coefficients();
    return Projector::from_basis(g, b, true);
  }
  if (kind == "macro_cell") {
    require_keys(spec, {"kind", "shell_size", "macro_variable", "counts", "cell", "max_ratio"}, "subspace");
    const auto size = get_int(spec, "shell_size");
    if (size < 1 || size > h.dim()) throw ConfigError("config: shell_size out of range");
    const double lo = h.eigenvalues()[0];
    const double hi = h.eigenvalues()[size - 1];
    const double pad = 1e-9 * std::max(1.0, std::abs(hi));
    MacroVariable mv;
    mv.op = macro_variable_from(get_string(spec, "macro_variable"), h);
    for (const auto& c : spec.at("counts")) mv.counts.push_back(c.get<Index>());
    const MacroPartition part = build_macro_partition(h, lo - pad, hi - lo + 2 * pad, mv);
    const PastHypothesisSpec ph{static_cast<std::size_t>(get_int(spec, "cell")), get_double(spec, "max_ratio")};
    return ph.subspace(part);
  }
  throw ConfigError("config: unknown subspace kind '" + kind + "'");
}

EnsembleSpec ensemble_from(const Hamiltonian& h, const Json& spec) {
  const std::string kind = get_string(spec, "kind");
  if (kind == "point") {
    require_keys(spec, {"kind", "state"}, "ensemble");
    return EnsembleSpec::point(state_from(h, get_object(spec, "state")));
  }
  if (kind == "mixture") {
    require_keys(spec, {"kind", "members", "weights"}, "ensemble");
    std::vector<WaveFunction> members;
    for (const auto& m : spec.at("members")) members.push_back(state_from(h, m));
    return EnsembleSpec::mixture(std::move(members), get_doubles(spec, "weights"));
  }
  if (kind == "uniform") {
    require_keys(spec, {"kind", "subspace"}, "ensemble");
    return EnsembleSpec::uniform(subspace_from(h, get_object(spec, "subspace")));
  }
  throw ConfigError("config: unknown ensemble kind '" + kind + "'");
}

DensityMatrix initial_w_from(const Hamiltonian& h, const Json& spec, const std::optional<EnsembleSpec>& ensemble) {
  const std::string kind = get_string(spec, "kind");
  if (kind == "iph") {
    require_keys(spec, {"kind", "subspace"}, "initial_state");
    return iph_state(subspace_from(h, get_object(spec, "subspace")));
  }
  if (kind == "pure") {
    require_keys(spec, {"kind", "state"}, "initial_state");
    return DensityMatrix::from_pure(state_from(h, get_object(spec, "state")));
  }
  if (kind == "statistical") {
    require_keys(spec, {"kind"}, "initial_state");
    if (!ensemble) throw ConfigError("config: a statistical initial state needs an ensemble block");
    return ensemble->statistical_density_matrix();
  }
  throw ConfigError("config: unknown initial_state kind '" + kind + "'");
}

}  // namespace qsl::cli
