#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace flagdyn {

// Hard resource guards (node budgets, subgroup enumeration, ...) throw this;
// the CLI maps it to exit code 2.
class capacity_error : public std::runtime_error {
 public:
  explicit capacity_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Numerical decomposition failures (singular input, unresolved clustering).
class decomposition_error : public std::runtime_error {
 public:
  explicit decomposition_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Counter-based RNG: every draw is a pure function of (key, counter), so
// streams can be split per sample / per lattice position and evaluated in any
// order (or in parallel) with identical results.
struct CounterRng {
  std::uint64_t key = 0;

  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t raw(std::uint64_t counter) const {
    return mix(mix(key ^ 0x6a09e667f3bcc909ULL) + counter);
  }

  // Derive an independent stream.
  CounterRng stream(std::uint64_t tag) const { return CounterRng{mix(key + mix(tag))}; }

  double u01(std::uint64_t counter) const {
    return static_cast<double>(raw(counter) >> 11) * 0x1.0p-53;
  }

  // Uniform in [-1, 1].
  double sym(std::uint64_t counter) const { return 2.0 * u01(counter) - 1.0; }

  std::uint64_t below(std::uint64_t counter, std::uint64_t n) const {
    return raw(counter) % n;  // modulo bias irrelevant at our n
  }
};

// Stateful convenience wrapper for sequential draws from a CounterRng stream.
struct SeqRng {
  CounterRng rng;
  std::uint64_t ctr = 0;
  explicit SeqRng(CounterRng r) : rng(r) {}
  double u01() { return rng.u01(ctr++); }
  double sym() { return rng.sym(ctr++); }
  std::uint64_t below(std::uint64_t n) { return rng.below(ctr++, n); }
};

// Static-partition parallel loop. fn(i) must only touch slot i of its output;
// results are then independent of the thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  if (threads <= 1 || n <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::size_t nt = std::min<std::size_t>(static_cast<std::size_t>(threads), n);
  std::vector<std::thread> pool;
  pool.reserve(nt);
  for (std::size_t t = 0; t < nt; ++t) {
    pool.emplace_back([&, t] {
      for (std::size_t i = t; i < n; i += nt) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace flagdyn
