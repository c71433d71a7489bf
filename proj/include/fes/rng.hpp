#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace fes {

// Seeded random stream. The raw 64-bit sequence comes from mt19937_64, whose
// output is fixed by the standard; the distributions below are written out
// by hand because the std:: ones are implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // Uniform integer in [0, n). n must be positive.
  std::uint64_t uniform_index(std::uint64_t n);
  double normal();
  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Gamma(shape, 1) via Marsaglia-Tsang; shape < 1 uses the U^(1/shape) boost.
  double gamma(double shape);
  // log of a Gamma(shape, 1) draw. Stays finite for tiny shapes where the
  // linear-space draw underflows to zero.
  double log_gamma(double shape);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in draw order.
  std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// Independent deterministic substream keyed by (rng.seed(), tag). Does not
// advance `rng`.
Rng split_stream(const Rng& rng, std::string_view tag);
Rng split_stream(const Rng& rng, std::string_view tag, std::uint64_t index);

// Log-space Dirichlet draw: returns log(q_i) with logsumexp(q) == 0.
std::vector<double> log_dirichlet(Rng& rng, std::span<const double> concentration);
std::vector<double> dirichlet(Rng& rng, std::span<const double> concentration);

}  // namespace fes
