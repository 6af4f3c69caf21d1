// serialization.hpp - JSON form of grids and states.
//
// Complex numbers are [re, im] pairs; a wave function is
//   {"grid": {...}, "amplitudes": [[re, im], ...]}
// and a density matrix stores its kernel row-major under "kernel".

#pragma once

#include <json.hpp>

#include "qsl/hilbert.hpp"

namespace qsl {

nlohmann::json to_json(const Grid& grid);
Grid grid_from_json(const nlohmann::json& j);

nlohmann::json to_json(const WaveFunction& psi);
WaveFunction wave_function_from_json(const nlohmann::json& j);

nlohmann::json to_json(const DensityMatrix& w);
DensityMatrix density_matrix_from_json(const nlohmann::json& j);

}  // namespace qsl
