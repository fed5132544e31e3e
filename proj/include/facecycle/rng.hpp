#pragma once

#include <cstdint>
#include <limits>

#include <torch/torch.h>

namespace facecycle {

/// Counter-based random stream. The full state is (seed, counter), which
/// makes it trivially checkpointable: restoring both reproduces every
/// subsequent draw. Satisfies UniformRandomBitGenerator.
class Rng {
 public:
  using result_type = std::uint64_t;

  explicit Rng(std::uint64_t seed = 0, std::uint64_t counter = 0) : seed_(seed), counter_(counter) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }
  result_type operator()() { return next_u64(); }

  std::uint64_t next_u64();
  /// Uniform in [0, 1).
  double uniform();
  /// Uniform integer in [0, n). n must be positive.
  std::int64_t index(std::int64_t n);

  /// Fresh torch generator seeded from the stream; consumes one draw.
  at::Generator torch_generator();
  torch::Tensor normal(at::IntArrayRef sizes, torch::TensorOptions opts = {});
  torch::Tensor uniform(at::IntArrayRef sizes, torch::TensorOptions opts = {});

  std::uint64_t seed() const { return seed_; }
  std::uint64_t counter() const { return counter_; }

  friend bool operator==(const Rng&, const Rng&) = default;

 private:
  std::uint64_t seed_;
  std::uint64_t counter_;
};

}  // namespace facecycle
