#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <thread>
#include <vector>

namespace dualgate {

using Rng = std::mt19937_64;

/// splitmix64 finaliser; maps (seed, stream) to a well-mixed sub-seed.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

struct MonteCarloEstimate {
  double mean = 0.0;
  double standard_error = 0.0;
  std::int64_t samples = 0;
  std::uint64_t seed = 0;
};

inline unsigned default_worker_count() {
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs body(block_index) for every block on up to `workers` threads.
template <class Body>
void parallel_blocks(std::int64_t n_blocks, unsigned workers, Body&& body) {
  workers = static_cast<unsigned>(
      std::clamp<std::int64_t>(workers == 0 ? default_worker_count() : workers, 1, n_blocks));
  if (workers <= 1) {
    for (std::int64_t b = 0; b < n_blocks; ++b) body(b);
    return;
  }
  std::atomic<std::int64_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::int64_t b = next++; b < n_blocks; b = next++) body(b);
    });
  }
}

inline constexpr std::int64_t kMonteCarloBlock = 8192;

/// Mean and standard error of value(rng) over n draws. Samples are grouped
/// into fixed-size blocks with their own derived seeds and reduced in block
/// order, so the result does not depend on the number of workers.
template <class Value>
MonteCarloEstimate monte_carlo_mean(std::uint64_t seed, std::int64_t n, Value&& value,
                                    unsigned workers = 0) {
  const std::int64_t n_blocks = (n + kMonteCarloBlock - 1) / kMonteCarloBlock;
  std::vector<double> sums(n_blocks, 0.0);
  std::vector<double> sq_sums(n_blocks, 0.0);
  parallel_blocks(n_blocks, workers, [&](std::int64_t b) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(b)));
    const std::int64_t begin = b * kMonteCarloBlock;
    const std::int64_t end = std::min(n, begin + kMonteCarloBlock);
    double s = 0.0;
    double s2 = 0.0;
    for (std::int64_t i = begin; i < end; ++i) {
      const double v = value(rng);
      s += v;
      s2 += v * v;
    }
    sums[b] = s;
    sq_sums[b] = s2;
  });
  double total = 0.0;
  double total_sq = 0.0;
  for (std::int64_t b = 0; b < n_blocks; ++b) {
    total += sums[b];
    total_sq += sq_sums[b];
  }
  MonteCarloEstimate est;
  est.samples = n;
  est.seed = seed;
  est.mean = total / static_cast<double>(n);
  const double var =
      std::max(0.0, total_sq / static_cast<double>(n) - est.mean * est.mean) *
      static_cast<double>(n) / std::max<double>(1.0, static_cast<double>(n - 1));
  est.standard_error = std::sqrt(var / static_cast<double>(n));
  return est;
}

}  // namespace dualgate
