#include "fes/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace fes {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

Rng::Rng(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

double Rng::uniform() {
  return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::uniform_index(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("uniform_index: n must be positive");
  // Rejection keeps the draw unbiased for every n.
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % n;
  std::uint64_t x;
  do {
    x = engine_();
  } while (x >= limit);
  return x % n;
}

double Rng::normal() {
  if (has_spare_normal_) {
    has_spare_normal_ = false;
    return spare_normal_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double m = std::sqrt(-2.0 * std::log(s) / s);
  spare_normal_ = v * m;
  has_spare_normal_ = true;
  return u * m;
}

double Rng::gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  if (shape < 1.0) return std::exp(log_gamma(shape));
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double x, v;
    do {
      x = normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = uniform();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) return d * v;
  }
}

double Rng::log_gamma(double shape) {
  if (!(shape > 0.0)) throw std::invalid_argument("gamma: shape must be positive");
  if (shape >= 1.0) return std::log(gamma(shape));
  const double boosted = gamma(shape + 1.0);
  const double u = 1.0 - uniform();  // (0, 1]
  return std::log(boosted) + std::log(u) / shape;
}

std::vector<std::size_t> Rng::sample_without_replacement(std::size_t n, std::size_t k) {
  if (k > n) throw std::invalid_argument("sample_without_replacement: k > n");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  // Partial Fisher-Yates.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(uniform_index(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

Rng split_stream(const Rng& rng, std::string_view tag) {
  if (tag.empty()) throw std::invalid_argument("split_stream: tag must be nonempty");
  return Rng(splitmix64(rng.seed() ^ splitmix64(fnv1a(tag))));
}

Rng split_stream(const Rng& rng, std::string_view tag, std::uint64_t index) {
  if (tag.empty()) throw std::invalid_argument("split_stream: tag must be nonempty");
  return Rng(splitmix64(rng.seed() ^ splitmix64(fnv1a(tag) + splitmix64(index))));
}

std::vector<double> log_dirichlet(Rng& rng, std::span<const double> concentration) {
  if (concentration.empty()) throw std::invalid_argument("dirichlet: empty concentration");
  std::vector<double> out(concentration.size());
  for (std::size_t i = 0; i < concentration.size(); ++i) {
    out[i] = rng.log_gamma(concentration[i]);
  }
  const double mx = *std::max_element(out.begin(), out.end());
  double sum = 0.0;
  for (double v : out) sum += std::exp(v - mx);
  const double lse = mx + std::log(sum);
  for (double& v : out) v -= lse;
  return out;
}

std::vector<double> dirichlet(Rng& rng, std::span<const double> concentration) {
  auto out = log_dirichlet(rng, concentration);
  for (double& v : out) v = std::exp(v);
  return out;
}

}  // namespace fes
