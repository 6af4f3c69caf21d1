#include "qsl/hilbert.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qsl/errors.hpp"

namespace qsl {

double Grid::cell_volume() const { return std::pow(dx, particles); }

Index Grid::stride(int particle) const {
  Index s = 1;
  for (int p = particles - 1; p > particle; --p) s *= points;
  return s;
}

std::vector<int> Grid::unflatten(Index flat) const {
  if (flat < 0 || flat >= total_dim) throw InvalidArgument("Grid::unflatten: index out of range");
  std::vector<int> idx(static_cast<std::size_t>(particles));
  for (int p = particles - 1; p >= 0; --p) {
    idx[static_cast<std::size_t>(p)] = static_cast<int>(flat % points);
    flat /= points;
  }
  return idx;
}

Index Grid::flatten(std::span<const int> axis_indices) const {
  if (static_cast<int>(axis_indices.size()) != particles)
    throw InvalidArgument("Grid::flatten: wrong number of axis indices");
  Index flat = 0;
  for (int i : axis_indices) {
    if (i < 0 || i >= points) throw InvalidArgument("Grid::flatten: axis index out of range");
    flat = flat * points + i;
  }
  return flat;
}

int Grid::nearest_site(double x) const {
  const long k = std::lround((x - x_min) / dx);
  return static_cast<int>(std::clamp<long>(k, 0, points - 1));
}

Grid build_grid(int particle_count, int points_per_axis, double x_min, double x_max, Index dimension_cap) {
  if (particle_count < 1) throw InvalidArgument("build_grid: need at least one particle");
  if (particle_count > kMaxParticles) throw DimensionCapExceeded("build_grid: too many particles");
  if (points_per_axis < 2) throw InvalidArgument("build_grid: need at least two points per axis");
  if (!(x_max > x_min) || !std::isfinite(x_min) || !std::isfinite(x_max))
    throw InvalidArgument("build_grid: degenerate interval");
  Index dim = 1;
  for (int p = 0; p < particle_count; ++p) {
    dim *= points_per_axis;
    if (dim > dimension_cap) {
      std::ostringstream msg;
      msg << "build_grid: " << points_per_axis << "^" << particle_count << " exceeds dimension cap "
          << dimension_cap;
      throw DimensionCapExceeded(msg.str());
    }
  }
  Grid g;
  g.particles = particle_count;
  g.points = points_per_axis;
  g.x_min = x_min;
  g.x_max = x_max;
  g.dx = (x_max - x_min) / (points_per_axis - 1);
  g.total_dim = dim;
  return g;
}

// ---------------------------------------------------------------------------

WaveFunction::WaveFunction(Grid grid, Vector amplitudes) : grid_(grid), amplitudes_(std::move(amplitudes)) {
  if (amplitudes_.size() != grid_.total_dim) throw InvalidArgument("WaveFunction: size does not match grid");
}

WaveFunction WaveFunction::from_coefficients(Grid grid, const Vector& coefficients) {
  return WaveFunction(grid, coefficients / std::sqrt(grid.cell_volume()));
}

double WaveFunction::norm_squared() const { return amplitudes_.squaredNorm() * grid_.cell_volume(); }

bool WaveFunction::is_normalized(double tol) const { return std::abs(norm_squared() - 1.0) <= tol; }

WaveFunction WaveFunction::normalized() const {
  const double n2 = norm_squared();
  if (!(n2 > 0.0)) throw InvalidArgument("WaveFunction::normalized: zero state");
  return WaveFunction(grid_, amplitudes_ / std::sqrt(n2));
}

Vector WaveFunction::coefficients() const { return amplitudes_ * std::sqrt(grid_.cell_volume()); }

// ---------------------------------------------------------------------------

DensityMatrix::DensityMatrix(Grid grid, Matrix kernel) : grid_(grid), kernel_(std::move(kernel)) {
  if (kernel_.rows() != grid_.total_dim || kernel_.cols() != grid_.total_dim)
    throw InvalidArgument("DensityMatrix: shape does not match grid");
}

DensityMatrix DensityMatrix::from_pure(const WaveFunction& psi) {
  return DensityMatrix(psi.grid(), psi.amplitudes() * psi.amplitudes().adjoint());
}

DensityMatrix DensityMatrix::mixture(std::span<const WaveFunction> states, std::span<const double> weights) {
  if (states.empty() || states.size() != weights.size())
    throw InvalidArgument("DensityMatrix::mixture: need matching non-empty states and weights");
  const Grid grid = states.front().grid();
  Matrix k = Matrix::Zero(grid.total_dim, grid.total_dim);
  for (std::size_t i = 0; i < states.size(); ++i) {
    if (!(states[i].grid() == grid)) throw GridMismatch("DensityMatrix::mixture: grids differ");
    if (weights[i] < 0.0) throw InvalidArgument("DensityMatrix::mixture: negative weight");
    k.noalias() += weights[i] * (states[i].amplitudes() * states[i].amplitudes().adjoint());
  }
  return DensityMatrix(grid, std::move(k));
}

DensityMatrix DensityMatrix::from_operator(Grid grid, const Matrix& rho) {
  return DensityMatrix(grid, rho / grid.cell_volume());
}

Matrix DensityMatrix::operator_matrix() const { return kernel_ * grid_.cell_volume(); }

double DensityMatrix::trace() const { return kernel_.diagonal().real().sum() * grid_.cell_volume(); }

double DensityMatrix::purity() const {
  const double v = grid_.cell_volume();
  // tr(rho^2) = sum |rho_ij|^2 for Hermitian rho.
  return kernel_.squaredNorm() * v * v;
}

double DensityMatrix::hermiticity_error() const {
  return (kernel_ - kernel_.adjoint()).norm() * grid_.cell_volume();
}

double DensityMatrix::min_eigenvalue() const {
  const Matrix rho = operator_matrix();
  const Matrix sym = 0.5 * (rho + rho.adjoint());
  Eigen::SelfAdjointEigenSolver<Matrix> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(0);
}

bool DensityMatrix::is_normalized(double tol) const { return std::abs(trace() - 1.0) <= tol; }

double frobenius_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (!(a.grid() == b.grid())) throw GridMismatch("frobenius_distance: grids differ");
  return (a.kernel() - b.kernel()).norm() * a.grid().cell_volume();
}

// ---------------------------------------------------------------------------

Hamiltonian::Hamiltonian(Grid grid, Matrix matrix, std::vector<double> masses, double hbar)
    : grid_(grid), matrix_(std::move(matrix)), masses_(std::move(masses)), hbar_(hbar) {
  Eigen::SelfAdjointEigenSolver<Matrix> solver(matrix_);
  if (solver.info() != Eigen::Success) throw Error("Hamiltonian: eigendecomposition failed");
  eigenvalues_ = solver.eigenvalues();
  eigenvectors_ = solver.eigenvectors();
}

Hamiltonian Hamiltonian::from_matrix(Grid grid, Matrix matrix, std::vector<double> masses, double hbar) {
  if (matrix.rows() != grid.total_dim || matrix.cols() != grid.total_dim)
    throw InvalidArgument("Hamiltonian: shape does not match grid");
  if (static_cast<int>(masses.size()) != grid.particles)
    throw InvalidArgument("Hamiltonian: need one mass per particle");
  for (double m : masses)
    if (!(m > 0.0) || !std::isfinite(m)) throw InvalidArgument("Hamiltonian: masses must be positive");
  if (!(hbar >= 0.0) || !std::isfinite(hbar)) throw InvalidArgument("Hamiltonian: hbar must be >= 0");
  if (!matrix.allFinite()) throw InvalidArgument("Hamiltonian: non-finite matrix entry");
  const double err = (matrix - matrix.adjoint()).norm();
  if (err > 1e-12 * std::max(1.0, matrix.norm())) throw NotHermitian("Hamiltonian: matrix is not Hermitian");
  Matrix sym = 0.5 * (matrix + matrix.adjoint());
  return Hamiltonian(grid, std::move(sym), std::move(masses), hbar);
}

Vector Hamiltonian::phases(double t) const {
  if (!std::isfinite(t)) throw InvalidArgument("Hamiltonian: time must be finite");
  if (t == 0.0) return Vector::Ones(dim());
  if (!(hbar_ > 0.0)) throw InvalidArgument("Hamiltonian: time evolution needs hbar > 0");
  Vector ph(dim());
  for (Index a = 0; a < dim(); ++a) ph[a] = std::polar(1.0, -eigenvalues_[a] * t / hbar_);
  return ph;
}

Vector Hamiltonian::evolve(const Vector& v, double t) const {
  if (v.size() != dim()) throw InvalidArgument("Hamiltonian::evolve: size mismatch");
  if (t == 0.0) return v;
  const Vector ph = phases(t);
  Vector c = eigenvectors_.adjoint() * v;
  c.array() *= ph.array();
  return eigenvectors_ * c;
}

Matrix Hamiltonian::evolve_operator(const Matrix& a, double t) const {
  if (a.rows() != dim() || a.cols() != dim()) throw InvalidArgument("Hamiltonian::evolve_operator: shape mismatch");
  if (t == 0.0) return a;
  const Vector ph = phases(t);
  Matrix e = eigenvectors_.adjoint() * a * eigenvectors_;
  e = ph.asDiagonal() * e * ph.conjugate().asDiagonal();
  return eigenvectors_ * e * eigenvectors_.adjoint();
}

Hamiltonian build_hamiltonian(const Grid& grid, const Potential& potential, std::vector<double> masses,
                              double hbar) {
  if (static_cast<int>(masses.size()) != grid.particles)
    throw InvalidArgument("build_hamiltonian: need one mass per particle");
  const Index dim = grid.total_dim;
  Matrix h = Matrix::Zero(dim, dim);
  std::vector<double> coords(static_cast<std::size_t>(grid.particles));
  for (Index q = 0; q < dim; ++q) {
    const auto idx = grid.unflatten(q);
    for (int p = 0; p < grid.particles; ++p) coords[static_cast<std::size_t>(p)] = grid.coordinate(idx[static_cast<std::size_t>(p)]);
    const double v = potential ? potential(coords) : 0.0;
    if (!std::isfinite(v)) throw InvalidArgument("build_hamiltonian: potential is not finite on the grid");
    h(q, q) += v;
    for (int p = 0; p < grid.particles; ++p) {
      const double m = masses[static_cast<std::size_t>(p)];
      if (!(m > 0.0)) throw InvalidArgument("build_hamiltonian: masses must be positive");
      const double c = hbar * hbar / (2.0 * m * grid.dx * grid.dx);
      if (c == 0.0) continue;
      h(q, q) += 2.0 * c;
      const int i = idx[static_cast<std::size_t>(p)];
      const Index s = grid.stride(p);
      if (i > 0) h(q, q - s) -= c;
      if (i + 1 < grid.points) h(q, q + s) -= c;
    }
  }
  return Hamiltonian::from_matrix(grid, std::move(h), std::move(masses), hbar);
}

// ---------------------------------------------------------------------------

Projector::Projector(Grid grid, Matrix basis)
    : grid_(grid), basis_(std::move(basis)), matrix_(basis_ * basis_.adjoint()) {}

Projector Projector::from_basis(Grid grid, const Matrix& basis, bool orthonormalize) {
  if (basis.rows() != grid.total_dim) throw InvalidArgument("Projector: basis has wrong length");
  if (basis.cols() == 0) return Projector(grid, basis);
  if (orthonormalize) {
    Eigen::ColPivHouseholderQR<Matrix> qr(basis);
    const Index r = qr.rank();
    if (r == 0) throw InvalidArgument("Projector: basis is rank deficient");
    Matrix q = qr.householderQ() * Matrix::Identity(basis.rows(), r);
    return Projector(grid, std::move(q));
  }
  const Matrix gram = basis.adjoint() * basis;
  if ((gram - Matrix::Identity(basis.cols(), basis.cols())).norm() > 1e-9)
    throw InvalidArgument("Projector: basis columns are not orthonormal");
  return Projector(grid, basis);
}

double Projector::idempotency_error() const { return (matrix_ * matrix_ - matrix_).norm(); }

Projector energy_shell(const Hamiltonian& h, double energy, double delta_e) {
  if (!(delta_e >= 0.0)) throw InvalidArgument("energy_shell: delta_E must be non-negative");
  std::vector<Index> picked;
  const auto& ev = h.eigenvalues();
  for (Index a = 0; a < ev.size(); ++a)
    if (ev[a] >= energy && ev[a] <= energy + delta_e) picked.push_back(a);
  if (picked.empty()) {
    std::ostringstream msg;
    msg << "energy_shell: no eigenvalue in [" << energy << ", " << energy + delta_e << "]";
    throw EmptyShell(msg.str());
  }
  Matrix basis(h.dim(), static_cast<Index>(picked.size()));
  for (std::size_t j = 0; j < picked.size(); ++j) basis.col(static_cast<Index>(j)) = h.eigenvectors().col(picked[j]);
  return Projector::from_basis(h.grid(), basis);
}

Matrix propagator(const Hamiltonian& h, double t) {
  if (t == 0.0) return Matrix::Identity(h.dim(), h.dim());
  if (!std::isfinite(t)) throw InvalidArgument("propagator: time must be finite");
  if (!(h.hbar() > 0.0)) throw InvalidArgument("propagator: time evolution needs hbar > 0");
  const Matrix& v = h.eigenvectors();
  Vector ph(h.dim());
  for (Index a = 0; a < h.dim(); ++a) ph[a] = std::polar(1.0, -h.eigenvalues()[a] * t / h.hbar());
  return v * ph.asDiagonal() * v.adjoint();
}

WaveFunction eigenstate(const Hamiltonian& h, Index alpha) {
  if (alpha < 0 || alpha >= h.dim()) throw InvalidArgument("eigenstate: index out of range");
  return WaveFunction::from_coefficients(h.grid(), h.eigenvectors().col(alpha));
}

}  // namespace qsl
