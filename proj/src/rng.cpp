#include "facecycle/rng.hpp"

#include <ATen/CPUGeneratorImpl.h>

namespace facecycle {

namespace {

// splitmix64 finalizer
std::uint64_t mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t Rng::next_u64() {
  ++counter_;
  return mix(mix(seed_) + counter_ * 0x9e3779b97f4a7c15ULL);
}

double Rng::uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

std::int64_t Rng::index(std::int64_t n) {
  TORCH_CHECK(n > 0, "Rng::index needs a positive bound");
  // Rejection keeps the draw exactly uniform.
  const auto bound = static_cast<std::uint64_t>(n);
  const std::uint64_t limit = max() - max() % bound;
  std::uint64_t v = 0;
  do {
    v = next_u64();
  } while (v >= limit);
  return static_cast<std::int64_t>(v % bound);
}

at::Generator Rng::torch_generator() { return at::make_generator<at::CPUGeneratorImpl>(next_u64()); }

torch::Tensor Rng::normal(at::IntArrayRef sizes, torch::TensorOptions opts) {
  auto gen = torch_generator();
  return torch::randn(sizes, gen, opts);
}

torch::Tensor Rng::uniform(at::IntArrayRef sizes, torch::TensorOptions opts) {
  auto gen = torch_generator();
  return torch::rand(sizes, gen, opts);
}

}  // namespace facecycle
