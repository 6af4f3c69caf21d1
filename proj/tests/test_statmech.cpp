#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsl/errors.hpp"
#include "qsl/statistics.hpp"
#include "qsl/statmech.hpp"
#include "support.hpp"

using namespace qsl;
using namespace qsl::test;

namespace {

Hamiltonian diagonal(const Grid& g, std::vector<double> values) {
  Matrix d = Matrix::Zero(g.total_dim, g.total_dim);
  for (Index i = 0; i < g.total_dim; ++i) d(i, i) = values[static_cast<std::size_t>(i)];
  return Hamiltonian::from_matrix(g, d, std::vector<double>(g.particles, 1.0), 1.0);
}

Matrix diag_op(std::vector<double> values) {
  Matrix d = Matrix::Zero(static_cast<Index>(values.size()), static_cast<Index>(values.size()));
  for (std::size_t i = 0; i < values.size(); ++i) d(static_cast<Index>(i), static_cast<Index>(i)) = values[i];
  return d;
}

Matrix random_unitary(Index d, Rng& rng) {
  Matrix z(d, d);
  for (Index j = 0; j < d; ++j) z.col(j) = random_unit(d, rng);
  Eigen::HouseholderQR<Matrix> qr(z);
  return qr.householderQ() * Matrix::Identity(d, d);
}

// GOE Hamiltonian of the given dimension and the partition of its whole
// spectrum by `macro` into groups of `counts`.
struct RandomShell {
  Hamiltonian h;
  MacroPartition partition;
};

RandomShell random_shell(Index dim, std::vector<Index> counts, Rng& rng, bool by_energy) {
  const Grid g = build_grid(1, static_cast<int>(dim), 0.0, 1.0);
  Hamiltonian h = Hamiltonian::from_matrix(g, random_goe(dim, rng), {1.0}, 1.0);
  const double lo = h.eigenvalues()[0] - 1.0;
  const double width = h.eigenvalues()[dim - 1] - h.eigenvalues()[0] + 2.0;
  MacroVariable mv{by_energy ? h.matrix() : position_operator(g, 0), {}, std::move(counts)};
  MacroPartition p = build_macro_partition(h, lo, width, mv);
  return {std::move(h), std::move(p)};
}

}  // namespace

TEST_CASE("partition of a diagonal shell") {
  const Grid g = build_grid(1, 6, 0.0, 1.0);
  const Hamiltonian h = diagonal(g, {1, 2, 3, 4, 10, 11});
  const MacroVariable mv{diag_op({0, 0, 1, 1, 5, 5}), {-0.5, 0.5, 1.5}, {}};
  const MacroPartition p = build_macro_partition(h, 0.5, 4.0, mv);
  CHECK(p.shell_dim() == 4);
  REQUIRE(p.cells.size() == 2);
  CHECK(p.cells[0].dim() == 2);
  CHECK(p.cells[1].dim() == 2);
  const Matrix first = diag_op({1, 1, 0, 0, 0, 0});
  CHECK((p.cells[0].projector.matrix() - first).norm() < 1e-12);
  CHECK(p.orthogonality_error() < 1e-12);
  CHECK(p.completeness_error() < 1e-12);
}

TEST_CASE("whole-spectrum bin gives one cell, rejected unless allowed") {
  const Grid g = build_grid(1, 5, 0.0, 1.0);
  const Hamiltonian h = diagonal(g, {1, 2, 3, 4, 5});
  MacroVariable mv{h.matrix(), {0.0, 10.0}, {}};
  CHECK_THROWS_AS(build_macro_partition(h, 0.0, 10.0, mv), InvalidArgument);
  mv.allow_single_cell = true;
  const MacroPartition p = build_macro_partition(h, 0.0, 10.0, mv);
  REQUIRE(p.cells.size() == 1);
  CHECK(p.cells[0].dim() == 5);
  CHECK((p.cells[0].projector.matrix() - p.shell.matrix()).norm() < 1e-12);
}

TEST_CASE("empty bins are pruned") {
  const Grid g = build_grid(1, 4, 0.0, 1.0);
  const Hamiltonian h = diagonal(g, {1, 2, 3, 4});
  const MacroVariable mv{diag_op({0, 0, 3, 3}), {-1.0, 1.0, 2.0, 4.0}, {}};
  const MacroPartition p = build_macro_partition(h, 0.0, 10.0, mv);
  REQUIRE(p.cells.size() == 2);
  CHECK(p.cells[0].label == "cell0");
  CHECK(p.cells[1].label == "cell2");
}

TEST_CASE("random shell split 50/8/2 by energy") {
  Rng rng(1);
  const RandomShell s = random_shell(60, {2, 8, 50}, rng, true);
  const MacroPartition& p = s.partition;
  REQUIRE(p.cells.size() == 3);
  CHECK(p.cells[0].dim() == 2);
  CHECK(p.cells[1].dim() == 8);
  CHECK(p.cells[2].dim() == 50);
  CHECK(p.eq_index == 2);
  CHECK(p.orthogonality_error() < 1e-8);
  CHECK(p.completeness_error() < 1e-8);
  // Grouping eigenvectors of H directly gives the same projectors.
  const Matrix& v = s.h.eigenvectors();
  CHECK((p.cells[0].projector.matrix() - v.leftCols(2) * v.leftCols(2).adjoint()).norm() < 1e-8);
  CHECK((p.cells[1].projector.matrix() - v.middleCols(2, 8) * v.middleCols(2, 8).adjoint()).norm() < 1e-8);
}

TEST_CASE("past-hypothesis ratio bound") {
  Rng rng(2);
  const RandomShell s = random_shell(60, {2, 8, 50}, rng, true);
  CHECK_NOTHROW((PastHypothesisSpec{0, 0.1}.validate(s.partition)));
  CHECK_THROWS_AS((PastHypothesisSpec{1, 0.1}.validate(s.partition)), InvalidArgument);
  CHECK(PastHypothesisSpec{0, 0.1}.subspace(s.partition).rank() == 2);
}

TEST_CASE("macro occupations") {
  Rng rng(3);
  const RandomShell s = random_shell(40, {4, 36}, rng, false);
  const MacroPartition& p = s.partition;
  const WaveFunction in0 = sample_sphere_uniform(p.cells[0].projector, rng);
  const RealVector o = macro_occupations(in0, p);
  CHECK(o[0] == doctest::Approx(1.0));
  CHECK(std::abs(o[1]) < 1e-12);

  const RealVector iph = macro_occupations(iph_state(p.cells[0].projector), p);
  CHECK(iph[0] == doctest::Approx(1.0));
  CHECK(std::abs(iph[1]) < 1e-12);

  const WaveFunction a = sample_sphere_uniform(p.cells[0].projector, rng);
  const WaveFunction b = sample_sphere_uniform(p.cells[1].projector, rng);
  const WaveFunction both(a.grid(), (a.amplitudes() + b.amplitudes()) / std::sqrt(2.0));
  const RealVector half = macro_occupations(both, p);
  CHECK(half[0] == doctest::Approx(0.5));
  CHECK(half[1] == doctest::Approx(0.5));
  CHECK(boltzmann_entropy(both, p) == std::nullopt);
}

TEST_CASE("states outside the shell are reported") {
  const Grid g = build_grid(1, 6, 0.0, 1.0);
  const Hamiltonian h = diagonal(g, {1, 2, 3, 4, 10, 11});
  const MacroPartition p = build_macro_partition(h, 0.5, 4.0, {diag_op({0, 0, 1, 1, 5, 5}), {}, {2, 2}});
  CHECK_THROWS_AS(macro_occupations(basis_state(g, 5), p), ShellLeak);
  CHECK_THROWS_AS(macro_occupations(DensityMatrix::from_pure(basis_state(g, 4)), p), ShellLeak);
}

TEST_CASE("Boltzmann entropy") {
  Rng rng(4);
  const RandomShell s = random_shell(60, {1, 8, 51}, rng, true);
  const MacroPartition& p = s.partition;
  CHECK(*boltzmann_entropy(sample_sphere_uniform(p.cells[0].projector, rng), p) == doctest::Approx(0.0));
  CHECK(*boltzmann_entropy(iph_state(p.cells[1].projector), p) == doctest::Approx(std::log(8.0)));
  RealVector occ(3);
  occ << 0.05, 0.9, 0.05;
  CHECK(boltzmann_entropy(occ, p, 0.1).has_value());
  CHECK(!boltzmann_entropy(occ, p, 0.05).has_value());
  CHECK_THROWS_AS(boltzmann_entropy(occ, p, 0.5), InvalidArgument);
  CHECK_THROWS_AS(boltzmann_entropy(occ, p, 0.0), InvalidArgument);
}

TEST_CASE("sphere sampling") {
  const Grid g = build_grid(1, 10, 0.0, 1.0);
  Rng rng(5);
  Matrix e = Matrix::Zero(10, 1);
  e(3, 0) = 1.0;
  const Projector line = Projector::from_basis(g, e);
  for (int i = 0; i < 5; ++i) {
    const Vector c = sample_sphere_uniform(line, rng).coefficients();
    CHECK(std::abs(std::abs(c[3]) - 1.0) < 1e-12);
  }

  const Index k = 4;
  const Matrix basis = random_unitary(10, rng).leftCols(k);
  const Projector sub = Projector::from_basis(g, basis);
  const int n = 10000;
  std::vector<double> sums(static_cast<std::size_t>(k)), sq(static_cast<std::size_t>(k));
  std::vector<double> first_a, first_b;
  const Projector rotated = Projector::from_basis(g, basis * random_unitary(k, rng));
  for (int s = 0; s < n; ++s) {
    const Vector c = sample_sphere_uniform(sub, rng).coefficients();
    CHECK(std::abs(c.norm() - 1.0) < 1e-12);
    for (Index i = 0; i < k; ++i) {
      const double w = std::norm(basis.col(i).dot(c));
      sums[static_cast<std::size_t>(i)] += w;
      sq[static_cast<std::size_t>(i)] += w * w;
    }
    first_a.push_back(std::norm(basis.col(0).dot(c)));
    first_b.push_back(std::norm(basis.col(0).dot(sample_sphere_uniform(rotated, rng).coefficients())));
  }
  for (Index i = 0; i < k; ++i) {
    const double mean = sums[static_cast<std::size_t>(i)] / n;
    const double se = std::sqrt((sq[static_cast<std::size_t>(i)] / n - mean * mean) / n);
    CHECK(std::abs(mean - 1.0 / k) < 3.0 * se);
  }
  CHECK(ks_test(first_a, first_b).p_value > 0.001);
}

TEST_CASE("normalized projector state") {
  const Grid g = build_grid(1, 5, 0.0, 2.0);
  const Projector one = Projector::from_basis(g, Matrix::Identity(5, 5).leftCols(1));
  const DensityMatrix w1 = iph_state(one);
  Matrix e11 = Matrix::Zero(5, 5);
  e11(0, 0) = 1.0;
  CHECK((w1.operator_matrix() - e11).norm() < 1e-14);
  CHECK(w1.trace() == doctest::Approx(1.0));

  const DensityMatrix w2 = iph_state(Projector::from_basis(g, Matrix::Identity(5, 5).leftCols(2)));
  CHECK((w2.operator_matrix() - diag_op({0.5, 0.5, 0, 0, 0})).norm() < 1e-14);

  Rng rng(6);
  const Projector sub = Projector::from_basis(g, random_unitary(5, rng).leftCols(3));
  CHECK(iph_state(sub).purity() == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
}

TEST_CASE("normalized projector maximizes von Neumann entropy on its subspace") {
  const Grid g = build_grid(1, 12, 0.0, 1.0);
  Rng rng(7);
  const Matrix basis = random_unitary(12, rng).leftCols(5);
  const Projector sub = Projector::from_basis(g, basis);
  const double top = von_neumann_entropy(iph_state(sub));
  CHECK(top == doctest::Approx(std::log(5.0)));
  for (int i = 0; i < 100; ++i) {
    std::vector<WaveFunction> members;
    std::vector<double> p;
    for (int m = 0; m < 5; ++m) {
      members.push_back(sample_sphere_uniform(sub, rng));
      p.push_back(rng.uniform() + 0.01);
    }
    double total = 0.0;
    for (double x : p) total += x;
    for (double& x : p) x /= total;
    CHECK(von_neumann_entropy(DensityMatrix::mixture(members, p)) < top);
  }
  CHECK(std::abs(von_neumann_entropy(DensityMatrix::from_pure(sample_sphere_uniform(sub, rng)))) < 1e-9);
}

TEST_CASE("sphere average and basis mixture") {
  const Grid g = build_grid(1, 64, -8.0, 8.0);
  const Hamiltonian h = free_box(g);
  const Projector sub = Projector::from_basis(g, h.eigenvectors().leftCols(4));
  std::vector<double> errors;
  for (Index m : {100, 1000, 10000}) {
    Rng rng(80 + static_cast<std::uint64_t>(m));
    const DecompositionReport r = verify_decomposition(sub, rng, m);
    CHECK(r.frobenius_error_basis < 1e-12);
    CHECK(r.sample_count == m);
    errors.push_back(r.frobenius_error_continuous);
  }
  CHECK(errors[0] > errors[1]);
  CHECK(errors[1] > errors[2]);
  CHECK(errors[2] < 5.0 * 4.0 / std::sqrt(10000.0));

  Rng rng(9);
  const Projector line = Projector::from_basis(g, h.eigenvectors().col(2));
  CHECK(verify_decomposition(line, rng, 100).frobenius_error_continuous < 1e-10);
}

TEST_CASE("entropy trajectories") {
  Rng rng(10);
  const RandomShell s = random_shell(30, {3, 27}, rng, true);
  // The cells are energy sub-bands, so the cell state commutes with H.
  std::vector<double> ts{0.0, 1.0, 5.0, 20.0};
  const auto flat = entropy_trajectory(iph_state(s.partition.cells[0].projector), s.h, s.partition, ts);
  for (const auto& o : flat.occupations) {
    CHECK(o[0] == doctest::Approx(1.0));
    CHECK(o.sum() == doctest::Approx(1.0).epsilon(1e-6));
  }
  CHECK(*flat.entropy.back() == doctest::Approx(std::log(3.0)));

  const RandomShell pos = random_shell(30, {3, 27}, rng, false);
  const auto moving = entropy_trajectory(iph_state(pos.partition.cells[0].projector), pos.h, pos.partition, ts);
  for (const auto& o : moving.occupations) CHECK(std::abs(o.sum() - 1.0) < 1e-6);
  CHECK(moving.occupations.back()[1] > 0.5);

  std::ostringstream out;
  write_entropy_csv(out, moving, pos.partition);
  CHECK(out.str().rfind("t,occ_cell0,occ_cell1,S\n", 0) == 0);
}

TEST_CASE("GOE matrices") {
  Rng rng(11);
  const Matrix m = random_goe(300, rng);
  CHECK((m - m.adjoint()).norm() == 0.0);
  CHECK(m.imag().norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Matrix> es(m);
  CHECK(es.eigenvalues().maxCoeff() < 2.3);
  CHECK(es.eigenvalues().minCoeff() > -2.3);
  CHECK(es.eigenvalues().maxCoeff() > 1.7);
}
