// grw.hpp - spontaneous-collapse (GRW) dynamics for wave functions and
// density matrices, flash records and mass-density fields.
//
// Collapse centers live on the x-grid of the configuration lattice. The
// smearing Gaussian uses the one-dimensional normalization (2 pi sigma^2)^-1/2.
// Particle labels are 0-based in code and 1-based in CSV output.

#pragma once

#include <cstddef>
#include <iosfwd>
#include <limits>
#include <vector>

#include "qsl/hilbert.hpp"
#include "qsl/random.hpp"

namespace qsl {

struct GrwParams {
  double lambda = 1.0;  // collapse rate per particle; 0 disables collapses
  double sigma = 1.0;   // collapse width

  void validate() const;
};

struct Flash {
  double x = 0.0;
  double t = 0.0;
  int particle = 0;

  bool operator==(const Flash&) const = default;
};

struct FlashHistory {
  std::vector<Flash> events;

  bool operator==(const FlashHistory&) const = default;
};

struct MassDensityField {
  double t = 0.0;
  std::vector<double> x;
  RealVector values;
};

// Gaussian (2 pi sigma^2)^-1/2 exp(-d^2 / (2 sigma^2)).
double collapse_gaussian(double d, double sigma);

// Diagonal of Lambda_k(x) over configuration-space sites.
RealVector collapse_rate_operator(const Grid& grid, int particle, double x, double sigma);

// Exponential waiting time with rate N lambda (infinite when the rate is 0).
double sample_collapse_time(int particle_count, double lambda, Rng& rng);

struct PsiCollapse {
  WaveFunction state;
  double weight;
};
struct WCollapse {
  DensityMatrix state;
  double weight;
};

// Throws ZeroWeight when the collapsed state vanishes numerically.
PsiCollapse collapse_psi(const WaveFunction& psi, int particle, double x, double sigma);
WCollapse collapse_w(const DensityMatrix& w, int particle, double x, double sigma);

// Unnormalized map Lambda^1/2 W Lambda^1/2 (linear in W).
DensityMatrix collapse_w_unnormalized(const DensityMatrix& w, int particle, double x, double sigma);

// Center density of a collapse on `particle` evaluated at every x-grid
// point; sums to ~1 with weight dx when the state is well inside the box.
RealVector center_density(const WaveFunction& psi, int particle, double sigma);
RealVector center_density(const DensityMatrix& w, int particle, double sigma);

// x-grid index drawn by inverse CDF from u in [0, 1).
int sample_center_index(const RealVector& density, double u);

struct GrwOptions {
  std::size_t max_flashes = std::numeric_limits<std::size_t>::max();
};

template <class State>
struct GrwRun {
  State final_state;
  FlashHistory history;
  double final_time = 0.0;  // t_end, or the last flash time when stopped early
};

// Each event consumes three uniforms in a fixed order (waiting time, label,
// center), so runs from the same Rng state are coupled across theories.
GrwRun<WaveFunction> run_grw(const WaveFunction& psi0, const Hamiltonian& h, double t_end, const GrwParams& params,
                             Rng& rng, const GrwOptions& options = {});
GrwRun<DensityMatrix> run_grw(const DensityMatrix& w0, const Hamiltonian& h, double t_end, const GrwParams& params,
                              Rng& rng, const GrwOptions& options = {});

MassDensityField mass_density(const WaveFunction& psi, std::span<const double> masses, double t = 0.0);
MassDensityField mass_density(const DensityMatrix& w, std::span<const double> masses, double t = 0.0);

// T,X,k with 1-based k.
void write_flash_csv(std::ostream& out, const FlashHistory& history);
// x,m
void write_mass_density_csv(std::ostream& out, const MassDensityField& field);

}  // namespace qsl
