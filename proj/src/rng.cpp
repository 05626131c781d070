#include "varbandit/rng.hpp"

#include <cmath>

namespace varbandit {

namespace {
constexpr double kTwoPi = 6.283185307179586476925286766559;
}

double RngStream::normal() {
  if (has_cached_normal_) {
    has_cached_normal_ = false;
    return cached_normal_;
  }
  const double u1 = uniform_pos();
  const double u2 = uniform();
  const double r = std::sqrt(-2.0 * std::log(u1));
  cached_normal_ = r * std::sin(kTwoPi * u2);
  has_cached_normal_ = true;
  return r * std::cos(kTwoPi * u2);
}

Eigen::VectorXd RngStream::normal_vector(int dim) {
  Eigen::VectorXd v(dim);
  for (int i = 0; i < dim; ++i) v[i] = normal();
  return v;
}

std::uint64_t mix_u64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

RngStream derive_rng_stream(std::uint64_t master_seed, std::uint64_t run_index) {
  const std::uint64_t a = mix_u64(master_seed);
  const std::uint64_t b = mix_u64(a ^ mix_u64(run_index + 0x632BE59BD9B4E019ull));
  return RngStream(b);
}

}  // namespace varbandit
