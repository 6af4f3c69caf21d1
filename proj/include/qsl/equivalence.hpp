// equivalence.hpp - outcome-distribution comparisons between wave-function
// and density-matrix versions of Bohmian, Everettian and GRW theories.

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "qsl/bohm.hpp"
#include "qsl/grw.hpp"
#include "qsl/hilbert.hpp"
#include "qsl/random.hpp"
#include "qsl/statistics.hpp"

namespace qsl {

class EnsembleSpec {
 public:
  enum class Kind { uniform_sphere, discrete_mixture };

  static EnsembleSpec uniform(const Projector& subspace);
  // Weights must be positive; they are normalized to sum 1 within 1e-9.
  static EnsembleSpec mixture(std::vector<WaveFunction> members, std::vector<double> weights);
  static EnsembleSpec point(const WaveFunction& psi);

  Kind kind() const { return kind_; }
  const Grid& grid() const;
  const std::vector<WaveFunction>& members() const { return members_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::optional<Projector>& subspace() const { return subspace_; }

  // Integral of |psi><psi| over the ensemble measure.
  DensityMatrix statistical_density_matrix() const;
  WaveFunction draw(Rng& rng) const;

 private:
  EnsembleSpec() = default;
  Kind kind_ = Kind::discrete_mixture;
  std::optional<Projector> subspace_;
  std::vector<WaveFunction> members_;
  std::vector<double> weights_;
};

struct DistributionReport {
  double tv_distance = 0.0;
  double ks_statistic = 0.0;
  double ks_p_value = 1.0;
  Index samples_a = 0;
  Index samples_b = 0;
  double threshold = 0.05;
  bool pass = false;
  RealVector histogram_a;  // normalized
  RealVector histogram_b;
  double rejected_fraction_a = 0.0;
  double rejected_fraction_b = 0.0;
  // Coupled GRW runs only: every run produced the same flash history.
  std::optional<bool> bit_identical;
};

using EigenvalueSet = std::function<bool(double)>;

// Spectral projector of a Hermitian sample-space operator onto eigenvalues
// accepted by `in_set`. Throws NotHermitian.
Projector spectral_projector(const Grid& grid, const Matrix& observable, const EigenvalueSet& in_set);
// Set given as eigenvalue list, matched within `tol`.
EigenvalueSet eigenvalue_set(std::vector<double> values, double tol = 1e-9);

double observable_probability(const DensityMatrix& w, const Matrix& observable, const EigenvalueSet& in_set);
double observable_probability(const WaveFunction& psi, const Matrix& observable, const EigenvalueSet& in_set);

struct Theorem1Options {
  int steps = 100;
  unsigned threads = 1;
  Index w_trajectories = 0;  // 0: members * trajectories_per_member
  double threshold = 0.05;
  Placement placement = Placement::cell_uniform;
  double max_rejected_fraction = 0.05;
};

// Arm A pools Bohmian trajectories of ensemble members, arm B guides one
// ensemble with the statistical density matrix. Throws InvalidRun when
// either arm rejects more than the allowed fraction of trajectories.
DistributionReport theorem1_experiment(const EnsembleSpec& ensemble, const Hamiltonian& h, double t,
                                       Index trajectories_per_member, Index member_count, Rng& rng,
                                       const Theorem1Options& options = {});

struct GrwEquivalenceOptions {
  unsigned threads = 1;
  double threshold = 0.05;
  int time_bins = 3;
  int x_bins = 4;
  bool two_flash = false;  // compare first-two-flash joints instead
  // Both arms share one random stream per run (arm B also consumes the
  // member draw). Independent streams otherwise.
  bool coupled = false;
};

// Bins of the first-flash joint (T, X, k): time bins at equal-probability
// quantiles of the truncated waiting-time law, uniform X bins over the box,
// one bin per label, plus a final "no flash" bin.
struct FlashBinning {
  std::vector<double> time_edges;
  std::vector<double> x_edges;
  int particles = 1;

  static FlashBinning make(const Grid& grid, const GrwParams& params, double t_end, int time_bins, int x_bins);
  Index flash_bins() const;
  Index bin_count(bool two_flash) const;
  Index bin_of(const FlashHistory& history, bool two_flash) const;
};

DistributionReport grw_equivalence_experiment(const EnsembleSpec& ensemble, const Hamiltonian& h,
                                              const GrwParams& params, double t_end, Index run_count, Rng& rng,
                                              const GrwEquivalenceOptions& options = {});

struct PointerReport {
  double expected_fraction = 0.0;  // |c1|^2
  double flash_fraction_psi = 0.0;
  double flash_fraction_w = 0.0;
  double standard_error = 0.0;
  double mass_region1_psi = 0.0;
  double mass_region2_psi = 0.0;
  double mass_region1_w = 0.0;
  double mass_region2_w = 0.0;
  double expected_mass_ratio = 0.0;  // inf when c2 = 0
  double mass_ratio_psi = 0.0;
  double mass_ratio_w = 0.0;
  bool flash_pass = false;
  bool mass_pass = false;
  bool pass = false;
};

struct PointerOptions {
  double flash_sigmas = 3.0;        // allowed deviation in standard errors
  double mass_ratio_tolerance = 1e-6;
};

// Psi = c1 Phi1 + c2 Phi2 against W = |c1|^2 W1 + |c2|^2 W2 for branches with
// disjoint supports; first flashes are drawn from the states as given.
// Flashes are attributed to the branch whose support on the flashing
// particle's axis is nearer. Throws SupportViolation on overlap.
PointerReport pointer_macro_check(cplx c1, cplx c2, const WaveFunction& branch1, const WaveFunction& branch2,
                                  std::span<const double> masses, const GrwParams& params, Index run_count, Rng& rng,
                                  const PointerOptions& options = {});

}  // namespace qsl
