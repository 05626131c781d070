#ifndef VARBANDIT_RNG_HPP
#define VARBANDIT_RNG_HPP

#include <cstdint>
#include <random>

#include <Eigen/Dense>

namespace varbandit {

// Deterministic random stream. All distribution transforms are implemented
// here rather than with std:: distributions so that a (seed, run_index) pair
// pins the exact byte-level draw sequence regardless of standard library.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform on [0, 1).
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1]; safe as a log() argument.
  double uniform_pos() {
    return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller. The second value of each pair is cached,
  // so draw order is part of the stream contract.
  double normal();

  // Uniform on {-1, +1}.
  double rademacher() { return (next_u64() & 1u) ? 1.0 : -1.0; }

  Eigen::VectorXd normal_vector(int dim);

 private:
  std::mt19937_64 gen_;
  double cached_normal_ = 0.0;
  bool has_cached_normal_ = false;
};

// Derives an independent child stream from a master seed and a run index.
// Distinct indices give decorrelated streams; the same pair always gives the
// same stream.
RngStream derive_rng_stream(std::uint64_t master_seed, std::uint64_t run_index);

// SplitMix64 finalizer; used for seed derivation and config hashing.
std::uint64_t mix_u64(std::uint64_t x);

}  // namespace varbandit

#endif  // VARBANDIT_RNG_HPP
