#include "qsl/serialization.hpp"

#include "qsl/errors.hpp"

namespace qsl {

namespace {

nlohmann::json complex_pair(cplx z) { return nlohmann::json::array({z.real(), z.imag()}); }

cplx complex_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw InvalidArgument("expected [re, im] pair");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

nlohmann::json to_json(const Grid& grid) {
  return {{"particles", grid.particles},
          {"points", grid.points},
          {"x_min", grid.x_min},
          {"x_max", grid.x_max}};
}

Grid grid_from_json(const nlohmann::json& j) {
  return build_grid(j.at("particles").get<int>(), j.at("points").get<int>(), j.at("x_min").get<double>(),
                    j.at("x_max").get<double>());
}

nlohmann::json to_json(const WaveFunction& psi) {
  nlohmann::json amps = nlohmann::json::array();
  for (Index q = 0; q < psi.size(); ++q) amps.push_back(complex_pair(psi[q]));
  return {{"grid", to_json(psi.grid())}, {"amplitudes", std::move(amps)}};
}

WaveFunction wave_function_from_json(const nlohmann::json& j) {
  const Grid grid = grid_from_json(j.at("grid"));
  const auto& amps = j.at("amplitudes");
  if (static_cast<Index>(amps.size()) != grid.total_dim)
    throw InvalidArgument("wave function JSON: amplitude count does not match grid");
  Vector v(grid.total_dim);
  for (Index q = 0; q < grid.total_dim; ++q) v[q] = complex_from(amps[static_cast<std::size_t>(q)]);
  return WaveFunction(grid, std::move(v));
}

nlohmann::json to_json(const DensityMatrix& w) {
  nlohmann::json rows = nlohmann::json::array();
  for (Index i = 0; i < w.dim(); ++i) {
    nlohmann::json row = nlohmann::json::array();
    for (Index k = 0; k < w.dim(); ++k) row.push_back(complex_pair(w(i, k)));
    rows.push_back(std::move(row));
  }
  return {{"grid", to_json(w.grid())}, {"kernel", std::move(rows)}};
}

DensityMatrix density_matrix_from_json(const nlohmann::json& j) {
  const Grid grid = grid_from_json(j.at("grid"));
  const auto& rows = j.at("kernel");
  if (static_cast<Index>(rows.size()) != grid.total_dim)
    throw InvalidArgument("density matrix JSON: row count does not match grid");
  Matrix m(grid.total_dim, grid.total_dim);
  for (Index i = 0; i < grid.total_dim; ++i) {
    const auto& row = rows[static_cast<std::size_t>(i)];
    if (static_cast<Index>(row.size()) != grid.total_dim)
      throw InvalidArgument("density matrix JSON: ragged kernel");
    for (Index k = 0; k < grid.total_dim; ++k) m(i, k) = complex_from(row[static_cast<std::size_t>(k)]);
  }
  return DensityMatrix(grid, std::move(m));
}

}  // namespace qsl
