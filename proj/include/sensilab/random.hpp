#pragma once

#include "sensilab/exact_point.hpp"

#include <algorithm>
#include <cstdint>
#include <exception>
#include <mutex>
#include <random>
#include <stdexcept>
#include <thread>
#include <vector>

namespace sensilab {

namespace detail {
// splitmix64 finalizer
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}
}  // namespace detail

/// A seeded, index-addressed random stream.
///
/// `child(i)` names an independent substream by path, so a sample's random
/// bits depend only on (seed, path) and never on scheduling. Estimators give
/// every sample its own leaf stream; that is what makes any worker count
/// produce identical reports.
class SeedStream {
 public:
  explicit SeedStream(std::uint64_t seed) : seed_(seed), key_(detail::mix64(seed)) {}

  [[nodiscard]] SeedStream child(std::uint64_t index) const {
    SeedStream s = *this;
    s.key_ = detail::mix64(key_ ^ detail::mix64(index + 0x632be59bd9b4e019ULL));
    return s;
  }

  [[nodiscard]] std::uint64_t seed() const noexcept { return seed_; }
  [[nodiscard]] std::uint64_t key() const noexcept { return key_; }

  [[nodiscard]] std::mt19937_64 engine() const { return std::mt19937_64(key_); }

 private:
  std::uint64_t seed_;
  std::uint64_t key_;
};

/// Uniform point on the 2^precision_bits grid of [0,1), drawn from `rng`'s leaf engine.
inline ExactPoint sample_point(const SeedStream& rng, unsigned precision_bits) {
  if (precision_bits < 64) throw std::invalid_argument("sample_point: precision_bits must be >= 64");
  auto eng = rng.engine();
  unsigned words = (precision_bits + 63) / 64;
  BigInt n = 0;
  for (unsigned w = 0; w < words; ++w) {
    n <<= 64;
    n |= eng();
  }
  unsigned extra = words * 64 - precision_bits;
  if (extra) n >>= extra;
  return {std::move(n), precision_bits};
}

struct Parallelism {
  unsigned workers = 1;
};

/// Calls fn(i) for i in [0, count), splitting the index range across workers.
/// fn must only write to per-index slots.
template <typename Fn>
void parallel_for(std::size_t count, Parallelism par, Fn&& fn) {
  unsigned workers = std::max(1u, par.workers);
  if (workers == 1 || count < 2) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  workers = static_cast<unsigned>(std::min<std::size_t>(workers, count));
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < count; i += workers) fn(i);
      } catch (...) {
        std::lock_guard lock(error_mu);
        if (!error) error = std::current_exception();
      }
    });
  }
  pool.clear();
  if (error) std::rethrow_exception(error);
}

}  // namespace sensilab
