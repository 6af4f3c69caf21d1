// random.hpp - seeded random streams.
//
// Every stochastic routine takes an Rng&. Independent work items (trajectories,
// GRW runs, ensemble members) draw from Rng::stream(master, id) so results do
// not depend on scheduling or thread count.

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>

namespace qsl {

class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0) {
    auto seq = seed_sequence(seed, 0);
    engine_.seed(seq);
  }

  // Deterministic child stream; distinct ids give statistically independent
  // sequences.
  static Rng stream(std::uint64_t master_seed, std::uint64_t id) {
    Rng r;
    auto seq = seed_sequence(master_seed, id + 1);
    r.engine_.seed(seq);
    return r;
  }

  static constexpr result_type min() { return std::mt19937_64::min(); }
  static constexpr result_type max() { return std::mt19937_64::max(); }
  result_type operator()() { return engine_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double normal() { return normal_(engine_); }

  double exponential(double rate) {
    if (rate <= 0.0) return std::numeric_limits<double>::infinity();
    return -std::log1p(-uniform()) / rate;
  }

  // Uniform integer in [0, n).
  std::size_t index(std::size_t n) {
    auto k = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return k < n ? k : n - 1;
  }

 private:
  static std::seed_seq seed_sequence(std::uint64_t seed, std::uint64_t id) {
    return std::seed_seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                         static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  }

  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace qsl
