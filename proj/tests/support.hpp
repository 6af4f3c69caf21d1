// Small state builders shared by the unit tests.

#pragma once

#include <cmath>
#include <complex>
#include <numbers>
#include <vector>

#include "qsl/hilbert.hpp"
#include "qsl/random.hpp"

namespace qsl::test {

inline Hamiltonian free_box(const Grid& g, double hbar = 1.0) {
  return build_hamiltonian(g, [](std::span<const double>) { return 0.0; }, std::vector<double>(g.particles, 1.0), hbar);
}

inline Vector random_unit(Index d, Rng& rng) {
  Vector v(d);
  for (Index i = 0; i < d; ++i) {
    const double re = rng.normal();
    const double im = rng.normal();
    v[i] = cplx(re, im);
  }
  return v.normalized();
}

inline WaveFunction random_state(const Grid& g, Rng& rng) { return WaveFunction::from_coefficients(g, random_unit(g.total_dim, rng)); }

// One-particle Gaussian packet exp(-(x-c)^2/(4w^2) + i k x).
inline WaveFunction packet(const Grid& g, double center, double width, double k = 0.0) {
  Vector a(g.total_dim);
  for (Index q = 0; q < g.total_dim; ++q) {
    const double x = g.coordinate(static_cast<int>(q));
    a[q] = std::exp(-0.25 * (x - center) * (x - center) / (width * width)) * std::exp(cplx(0.0, k * x));
  }
  return WaveFunction(g, a).normalized();
}

inline WaveFunction basis_state(const Grid& g, Index q) {
  Vector a = Vector::Zero(g.total_dim);
  a[q] = 1.0;
  return WaveFunction::from_coefficients(g, a);
}

inline WaveFunction superpose(const Hamiltonian& h, std::vector<std::pair<Index, cplx>> terms) {
  Vector c = Vector::Zero(h.dim());
  for (auto [k, a] : terms) c += a * h.eigenvectors().col(k);
  return WaveFunction::from_coefficients(h.grid(), c.normalized());
}

}  // namespace qsl::test
