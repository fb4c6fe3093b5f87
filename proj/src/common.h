// src/common.h
// Shared utilities: error handling, deterministic RNG, small string helpers.
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace l2w {

using Real = double;

class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define L2W_RAISE(expr)                 \
  do {                                  \
    std::ostringstream os__;            \
    os__ << expr; /* NOLINT */          \
    throw ::l2w::Error(os__.str());     \
  } while (0)

#define L2W_CHECK(cond, expr)           \
  do {                                  \
    if (!(cond)) L2W_RAISE(expr);       \
  } while (0)

// Deterministic RNG. The engine is std::mt19937_64 (bit-exact across
// platforms); the distributions are implemented here because the standard
// library ones are not reproducible across implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    L2W_CHECK(n > 0, "Rng::uniform_int: n must be positive, got " << n);
    uint64_t range = static_cast<uint64_t>(n);
    uint64_t limit = UINT64_MAX - UINT64_MAX % range;
    uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return static_cast<int>(v % range);
  }

  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double a = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(a);
    have_spare_ = true;
    return r * std::cos(a);
  }

  // Stable child-stream derivation (splitmix64 finalizer over seed ^ stream).
  static uint64_t derive(uint64_t seed, uint64_t stream) {
    uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool have_spare_ = false;
};

// logsumexp of two log-domain values; tolerates -inf on either side.
inline Real log_add(Real a, Real b) {
  if (a == -std::numeric_limits<Real>::infinity()) return b;
  if (b == -std::numeric_limits<Real>::infinity()) return a;
  Real m = a > b ? a : b;
  return m + std::log1p(std::exp((a < b ? a : b) - m));
}

inline std::vector<std::string> split_ws(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::string lowercase(std::string s) {
  for (char& c : s)
    if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return s;
}

inline std::string join_words(const std::vector<std::string>& words) {
  std::string out;
  for (size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += words[i];
  }
  return out;
}

// Runs fn(i) for i in [0, n). Results must be written to per-index slots so
// the output is identical for any thread count.
template <typename Fn>
void parallel_for(int n, int threads, Fn&& fn) {
  if (threads <= 1 || n <= 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::atomic<int> next{0};
  int workers = std::min(threads, n);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace l2w
