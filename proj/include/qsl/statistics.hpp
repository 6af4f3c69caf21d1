// statistics.hpp - distribution comparison used by the equivalence harness.

#pragma once

#include <span>

#include "qsl/hilbert.hpp"

namespace qsl {

// Half the L1 distance between two histograms on identical bins, each
// normalized to unit mass first. Throws InvalidArgument on a bin mismatch.
double tv_distance(const RealVector& hist_a, const RealVector& hist_b);

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
};

// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value.
KsResult ks_test(std::span<const double> samples_a, std::span<const double> samples_b);

// Survival function of the Kolmogorov distribution, P(K > lambda).
double kolmogorov_survival(double lambda);

}  // namespace qsl
