#include <doctest.h>

#include <cmath>
#include <numbers>

#include "qsl/errors.hpp"
#include "qsl/hilbert.hpp"
#include "qsl/serialization.hpp"
#include "support.hpp"

using namespace qsl;
using qsl::test::free_box;

TEST_CASE("grid construction") {
  const Grid a = build_grid(1, 2, 0.0, 1.0);
  CHECK(a.dx == 1.0);
  CHECK(a.total_dim == 2);

  const Grid b = build_grid(2, 3, 0.0, 1.0);
  CHECK(b.dx == 0.5);
  CHECK(b.total_dim == 9);

  const Grid c = build_grid(1, 64, -8.0, 8.0);
  CHECK(c.dx == doctest::Approx(16.0 / 63.0).epsilon(1e-15));
  CHECK(c.total_dim == 64);
  CHECK(c.coordinate(0) == -8.0);
  CHECK(c.coordinate(63) == doctest::Approx(8.0).epsilon(1e-14));
}

TEST_CASE("grid index mapping round-trips") {
  const Grid g = build_grid(3, 5, -1.0, 1.0);
  for (Index q = 0; q < g.total_dim; ++q) {
    const auto idx = g.unflatten(q);
    CHECK(g.flatten(idx) == q);
    for (int p = 0; p < 3; ++p) CHECK(g.axis_index(q, p) == idx[static_cast<std::size_t>(p)]);
  }
  // Particle 0 varies slowest.
  CHECK(g.stride(0) == 25);
  CHECK(g.stride(2) == 1);
  CHECK(g.nearest_site(-5.0) == 0);
  CHECK(g.nearest_site(0.26) == 3);
}

TEST_CASE("grid errors") {
  CHECK_THROWS_AS(build_grid(1, 10, 1.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1, 10, 2.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(build_grid(1, 1, 0.0, 1.0), InvalidArgument);
  CHECK_THROWS_AS(build_grid(3, 20, 0.0, 1.0), DimensionCapExceeded);
  CHECK_NOTHROW(build_grid(3, 20, 0.0, 1.0, 8000));
}

TEST_CASE("two-point finite-difference Hamiltonian") {
  const Grid g = build_grid(1, 2, 0.0, 1.0);
  const Hamiltonian h = free_box(g);
  CHECK(h.matrix()(0, 0).real() == doctest::Approx(1.0));
  CHECK(h.matrix()(0, 1).real() == doctest::Approx(-0.5));
  CHECK(h.eigenvalues()[0] == doctest::Approx(0.5));
  CHECK(h.eigenvalues()[1] == doctest::Approx(1.5));
}

TEST_CASE("hbar = 0 leaves the potential on the diagonal") {
  const Grid g = build_grid(1, 7, -1.0, 2.0);
  const Hamiltonian h = build_hamiltonian(g, [](std::span<const double> q) { return q[0]; }, {1.0}, 0.0);
  CHECK((h.matrix() - h.matrix().diagonal().asDiagonal().toDenseMatrix()).norm() == 0.0);
  for (int i = 0; i < g.points; ++i) CHECK(h.eigenvalues()[i] == doctest::Approx(g.coordinate(i)));
}

TEST_CASE("box spectrum") {
  const Grid g = build_grid(1, 64, -8.0, 8.0);
  const Hamiltonian h = free_box(g);
  // Dirichlet zeros sit one spacing beyond each end.
  const double length = (g.points + 1) * g.dx;
  for (int k = 1; k <= 3; ++k) {
    const double continuum = std::numbers::pi * std::numbers::pi * k * k / (2.0 * length * length);
    CHECK(std::abs(h.eigenvalues()[k - 1] - continuum) / continuum < 0.02);
    const double lattice = (1.0 - std::cos(k * std::numbers::pi / (g.points + 1))) / (g.dx * g.dx);
    CHECK(h.eigenvalues()[k - 1] == doctest::Approx(lattice).epsilon(1e-10));
  }
}

TEST_CASE("Hamiltonian invariants") {
  const Grid g = build_grid(2, 6, -2.0, 2.0);
  const Hamiltonian h = build_hamiltonian(g, [](std::span<const double> q) { return q[0] * q[0] + 0.3 * q[0] * q[1]; },
                                          {1.0, 2.0}, 1.0);
  CHECK((h.matrix() - h.matrix().adjoint()).norm() < 1e-12);
  const Matrix& v = h.eigenvectors();
  CHECK((v.adjoint() * v - Matrix::Identity(h.dim(), h.dim())).norm() < 1e-10);
  const Matrix rebuilt = v * h.eigenvalues().cast<cplx>().asDiagonal() * v.adjoint();
  CHECK((rebuilt - h.matrix()).norm() < 1e-8);
}

TEST_CASE("Hamiltonian errors") {
  const Grid g = build_grid(1, 4, 0.0, 1.0);
  CHECK_THROWS_AS(build_hamiltonian(g, [](std::span<const double>) { return std::nan(""); }, {1.0}),
                  InvalidArgument);
  Matrix m = Matrix::Zero(4, 4);
  m(0, 1) = 1.0;
  CHECK_THROWS_AS(Hamiltonian::from_matrix(g, m, {1.0}, 1.0), NotHermitian);
  CHECK_THROWS_AS(build_hamiltonian(g, [](std::span<const double>) { return 0.0; }, {1.0, 1.0}), InvalidArgument);
}

TEST_CASE("energy shells") {
  const Grid g = build_grid(1, 3, 0.0, 1.0);
  Matrix d = Matrix::Zero(3, 3);
  d.diagonal() << 1.0, 2.0, 3.0;
  const Hamiltonian h = Hamiltonian::from_matrix(g, d, {1.0}, 1.0);

  const Projector one = energy_shell(h, 1.5, 1.0);
  CHECK(one.rank() == 1);
  Matrix e2 = Matrix::Zero(3, 3);
  e2(1, 1) = 1.0;
  CHECK((one.matrix() - e2).norm() < 1e-12);

  const Projector all = energy_shell(h, 0.0, 10.0);
  CHECK(all.rank() == 3);
  CHECK((all.matrix() - Matrix::Identity(3, 3)).norm() < 1e-12);

  CHECK_THROWS_AS(energy_shell(h, 3.5, 1.0), EmptyShell);

  const Grid box = build_grid(1, 64, -8.0, 8.0);
  const Hamiltonian hb = free_box(box);
  const double lo = 0.5 * (hb.eigenvalues()[0] + hb.eigenvalues()[1]);
  const double hi = 0.5 * (hb.eigenvalues()[4] + hb.eigenvalues()[5]);
  const Projector shell = energy_shell(hb, lo, hi - lo);
  CHECK(shell.rank() == 4);
  CHECK(shell.idempotency_error() < 1e-9);
  CHECK(std::abs(shell.matrix().trace().real() - 4.0) < 0.5);
}

TEST_CASE("propagator") {
  const Grid g = build_grid(1, 8, 0.0, 1.0);
  const Hamiltonian h = build_hamiltonian(g, [](std::span<const double> q) { return 3.0 * q[0]; }, {0.7}, 1.3);
  CHECK((propagator(h, 0.0) - Matrix::Identity(8, 8)).norm() < 1e-12);
  Rng rng(7);
  for (int i = 0; i < 5; ++i) {
    const double t1 = 3.0 * rng.uniform(), t2 = 3.0 * rng.uniform();
    CHECK((propagator(h, t1) * propagator(h, t2) - propagator(h, t1 + t2)).norm() < 1e-9);
    const Vector v = test::random_unit(8, rng);
    CHECK((propagator(h, t1) * v - h.evolve(v, t1)).norm() < 1e-12);
    CHECK((propagator(h, t1).adjoint() * propagator(h, t1) - Matrix::Identity(8, 8)).norm() < 1e-12);
  }

  const Grid two = build_grid(1, 2, 0.0, 1.0);
  Matrix d = Matrix::Zero(2, 2);
  d.diagonal() << 0.4, 1.9;
  const Hamiltonian hd = Hamiltonian::from_matrix(two, d, {1.0}, 0.5);
  const Matrix u = propagator(hd, 2.0);
  CHECK(std::abs(u(0, 0) - std::exp(cplx(0.0, -0.4 * 2.0 / 0.5))) < 1e-12);
  CHECK(std::abs(u(1, 1) - std::exp(cplx(0.0, -1.9 * 2.0 / 0.5))) < 1e-12);
  CHECK(std::abs(u(0, 1)) < 1e-14);
}

TEST_CASE("state normalization conventions") {
  const Grid g = build_grid(2, 5, -1.0, 1.0);
  Rng rng(3);
  const WaveFunction psi = test::random_state(g, rng);
  CHECK(psi.is_normalized());
  CHECK(psi.coefficients().norm() == doctest::Approx(1.0));
  const DensityMatrix w = DensityMatrix::from_pure(psi);
  CHECK(w.trace() == doctest::Approx(1.0));
  CHECK(w.hermiticity_error() < 1e-10);
  CHECK(w.min_eigenvalue() > -1e-10);
  CHECK(w.purity() == doctest::Approx(1.0));
  const DensityMatrix back = DensityMatrix::from_operator(g, w.operator_matrix());
  CHECK(frobenius_distance(w, back) < 1e-14);
  CHECK_THROWS_AS(WaveFunction(g, Vector::Zero(3)), InvalidArgument);
}

TEST_CASE("serialization round trip") {
  const Grid g = build_grid(2, 4, -1.5, 2.5);
  Rng rng(11);
  const WaveFunction psi = test::random_state(g, rng);
  const WaveFunction psi2 = wave_function_from_json(nlohmann::json::parse(to_json(psi).dump()));
  CHECK(psi2.grid() == g);
  CHECK((psi2.amplitudes() - psi.amplitudes()).norm() == 0.0);

  const std::vector<WaveFunction> parts{psi, test::random_state(g, rng)};
  const std::vector<double> p{0.3, 0.7};
  const DensityMatrix w = DensityMatrix::mixture(parts, p);
  const DensityMatrix w2 = density_matrix_from_json(nlohmann::json::parse(to_json(w).dump()));
  CHECK((w2.kernel() - w.kernel()).norm() == 0.0);
  CHECK(grid_from_json(to_json(g)) == g);

  nlohmann::json bad = to_json(psi);
  bad["amplitudes"].erase(0);
  CHECK_THROWS_AS(wave_function_from_json(bad), InvalidArgument);
}
