// hilbert.hpp - discretized configuration spaces, quantum-state containers,
// finite-difference Hamiltonians and projectors.
//
// Conventions
//   * One spatial dimension per particle; configuration space is the product
//     lattice of `points` sites per particle, flattened row-major with
//     particle 0 varying slowest.
//   * States store continuum-normalized values: psi(q) with
//     sum |psi(q)|^2 dx^N = 1, and kernels W(q, q') with sum W(q, q) dx^N = 1.
//     The operator a kernel represents on the sample space is W * dx^N; all
//     expectation values and traces go through that operator form.
//   * Hamiltonians, propagators and projectors act directly on sample vectors
//     (they are independent of the quadrature weight).

#pragma once

#include <complex>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace qsl {

using cplx = std::complex<double>;
using Index = Eigen::Index;
using Vector = Eigen::VectorXcd;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

inline constexpr Index kDefaultDimensionCap = 4096;
inline constexpr int kMaxParticles = 12;

struct Grid {
  int particles = 1;
  int points = 2;
  double x_min = 0.0;
  double x_max = 1.0;
  double dx = 1.0;
  Index total_dim = 2;

  double coordinate(int axis_index) const { return x_min + axis_index * dx; }
  // Quadrature weight dx^N of one configuration-space cell.
  double cell_volume() const;
  std::vector<int> unflatten(Index flat) const;
  Index flatten(std::span<const int> axis_indices) const;
  // Stride of particle p in the flattened index.
  Index stride(int particle) const;
  // Axis index of `particle` inside a flattened index.
  int axis_index(Index flat, int particle) const {
    return static_cast<int>((flat / stride(particle)) % points);
  }
  // Nearest lattice site of a coordinate, clamped to the box.
  int nearest_site(double x) const;

  bool operator==(const Grid&) const = default;
};

Grid build_grid(int particle_count, int points_per_axis, double x_min, double x_max,
                Index dimension_cap = kDefaultDimensionCap);

class WaveFunction {
 public:
  WaveFunction(Grid grid, Vector amplitudes);

  // Builds from a Euclidean unit vector (the sample-space representation).
  static WaveFunction from_coefficients(Grid grid, const Vector& coefficients);

  const Grid& grid() const { return grid_; }
  const Vector& amplitudes() const { return amplitudes_; }
  cplx operator[](Index q) const { return amplitudes_[q]; }
  Index size() const { return amplitudes_.size(); }

  double norm_squared() const;
  bool is_normalized(double tol = 1e-10) const;
  WaveFunction normalized() const;
  // psi * sqrt(dx^N): Euclidean representation with unit norm.
  Vector coefficients() const;

 private:
  Grid grid_;
  Vector amplitudes_;
};

class DensityMatrix {
 public:
  DensityMatrix(Grid grid, Matrix kernel);

  static DensityMatrix from_pure(const WaveFunction& psi);
  static DensityMatrix mixture(std::span<const WaveFunction> states, std::span<const double> weights);
  // rho is the sample-space operator (unit trace for a normalized state).
  static DensityMatrix from_operator(Grid grid, const Matrix& rho);

  const Grid& grid() const { return grid_; }
  const Matrix& kernel() const { return kernel_; }
  cplx operator()(Index q, Index qp) const { return kernel_(q, qp); }
  Index dim() const { return kernel_.rows(); }

  Matrix operator_matrix() const;
  double trace() const;
  double purity() const;
  double hermiticity_error() const;
  double min_eigenvalue() const;
  bool is_normalized(double tol = 1e-10) const;

 private:
  Grid grid_;
  Matrix kernel_;
};

// Hilbert-Schmidt distance between the operators two kernels represent.
double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b);

class Hamiltonian {
 public:
  // Throws NotHermitian if the matrix deviates from Hermitian by more than
  // 1e-12 (relative to its norm).
  static Hamiltonian from_matrix(Grid grid, Matrix matrix, std::vector<double> masses, double hbar);

  const Grid& grid() const { return grid_; }
  const Matrix& matrix() const { return matrix_; }
  const std::vector<double>& masses() const { return masses_; }
  double hbar() const { return hbar_; }
  // Ascending eigenvalues and the matching orthonormal eigenvector columns.
  const RealVector& eigenvalues() const { return eigenvalues_; }
  const Matrix& eigenvectors() const { return eigenvectors_; }
  Index dim() const { return matrix_.rows(); }

  // U(t) v and U(t) A U(t)^dagger through the cached eigenbasis.
  Vector evolve(const Vector& v, double t) const;
  Matrix evolve_operator(const Matrix& a, double t) const;

 private:
  Hamiltonian(Grid grid, Matrix matrix, std::vector<double> masses, double hbar);
  Vector phases(double t) const;

  Grid grid_;
  Matrix matrix_;
  std::vector<double> masses_;
  double hbar_;
  RealVector eigenvalues_;
  Matrix eigenvectors_;
};

using Potential = std::function<double(std::span<const double>)>;

// Kinetic term: per particle the 3-point Laplacian times -hbar^2/(2 m_i) with
// Dirichlet walls. hbar = 0 switches the kinetic term off.
Hamiltonian build_hamiltonian(const Grid& grid, const Potential& potential, std::vector<double> masses,
                              double hbar = 1.0);

class Projector {
 public:
  // `basis` columns must be orthonormal (checked to 1e-9); pass
  // orthonormalize = true to run a QR first.
  static Projector from_basis(Grid grid, const Matrix& basis, bool orthonormalize = false);

  const Grid& grid() const { return grid_; }
  const Matrix& matrix() const { return matrix_; }
  const Matrix& basis() const { return basis_; }
  Index rank() const { return basis_.cols(); }
  double idempotency_error() const;

 private:
  Projector(Grid grid, Matrix basis);
  Grid grid_;
  Matrix basis_;
  Matrix matrix_;
};

// Span of eigenvectors with E <= E_alpha <= E + delta_E.
Projector energy_shell(const Hamiltonian& h, double energy, double delta_e);

Matrix propagator(const Hamiltonian& h, double t);

// Convenience: normalized eigenstate alpha of h as a wave function.
WaveFunction eigenstate(const Hamiltonian& h, Index alpha);

}  // namespace qsl
