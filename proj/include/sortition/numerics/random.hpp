#pragma once
// Reproducible random streams.
//
// The generator is xoshiro256** seeded through SplitMix64. All integer
// arithmetic is fixed-width, so the raw 64-bit sequence for a given
// (seed, stream index) is bit-identical on every platform. Uniform doubles
// use the top 53 bits and integer ranges use Lemire's multiply-and-reject,
// both platform independent. Binomial and hypergeometric variates evaluate
// one log-gamma based probability per draw and are reproducible for a
// given C math library.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <utility>

namespace sortition::numerics {

inline std::uint64_t splitmix64(std::uint64_t &state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

class RandomStream {
public:
  using result_type = std::uint64_t;

  RandomStream(std::uint64_t seed, std::uint64_t stream_index)
      : seed_(seed), stream_index_(stream_index) {
    std::uint64_t sm = seed;
    const std::uint64_t salt = splitmix64(sm);
    std::uint64_t mixed = salt ^ (stream_index * 0xD1B54A32D192ED03ULL);
    for (auto &s : state_)
      s = splitmix64(mixed);
    if ((state_[0] | state_[1] | state_[2] | state_[3]) == 0)
      state_[0] = 1;
  }

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_index() const { return stream_index_; }

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() {
    return std::numeric_limits<result_type>::max();
  }

  result_type operator()() { return next(); }

  std::uint64_t next() {
    const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound); bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    __uint128_t m = static_cast<__uint128_t>(next()) * bound;
    auto low = static_cast<std::uint64_t>(m);
    if (low < bound) {
      const std::uint64_t threshold = (0 - bound) % bound;
      while (low < threshold) {
        m = static_cast<__uint128_t>(next()) * bound;
        low = static_cast<std::uint64_t>(m);
      }
    }
    return static_cast<std::uint64_t>(m >> 64);
  }

  bool bernoulli(double p) { return uniform() < p; }

  std::uint64_t binomial(std::uint64_t n, double p);
  std::uint64_t hypergeometric(std::uint64_t population, std::uint64_t successes,
                               std::uint64_t draws);

  template <class T> void shuffle(std::span<T> items) {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform_index(i));
      std::swap(items[i - 1], items[j]);
    }
  }

private:
  static std::uint64_t rotl(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
  }

  // Inversion by chop-down search outward from `mode`, where `ratio_up(x)`
  // is pmf(x+1)/pmf(x) and `ratio_down(x)` is pmf(x-1)/pmf(x).
  template <class Up, class Down>
  std::uint64_t search_from_mode(std::uint64_t lo_bound, std::uint64_t hi_bound,
                                 std::uint64_t mode, double pmf_mode,
                                 Up ratio_up, Down ratio_down) {
    for (;;) {
      double u = uniform();
      u -= pmf_mode;
      if (u <= 0.0)
        return mode;
      std::uint64_t lo = mode, hi = mode;
      double plo = pmf_mode, phi = pmf_mode;
      bool lo_done = lo == lo_bound, hi_done = hi == hi_bound;
      while (!lo_done || !hi_done) {
        if (!lo_done) {
          plo *= ratio_down(lo);
          --lo;
          u -= plo;
          if (u <= 0.0)
            return lo;
          lo_done = lo == lo_bound || plo < 1e-300;
        }
        if (!hi_done) {
          phi *= ratio_up(hi);
          ++hi;
          u -= phi;
          if (u <= 0.0)
            return hi;
          hi_done = hi == hi_bound || phi < 1e-300;
        }
      }
      // Round-off left a sliver of mass unassigned; redraw.
    }
  }

  std::uint64_t seed_;
  std::uint64_t stream_index_;
  std::array<std::uint64_t, 4> state_{};
};

inline RandomStream split_stream(std::uint64_t seed, std::uint64_t index) {
  return RandomStream(seed, index);
}

inline std::uint64_t RandomStream::binomial(std::uint64_t n, double p) {
  if (n == 0 || p <= 0.0)
    return 0;
  if (p >= 1.0)
    return n;
  if (p > 0.5)
    return n - binomial(n, 1.0 - p);
  const double q = 1.0 - p;
  const double nd = static_cast<double>(n);
  if (nd * p < 30.0) {
    // Sequential inversion from zero.
    const double s = p / q;
    const double a = (nd + 1.0) * s;
    const double r0 = std::pow(q, nd);
    for (;;) {
      double u = uniform();
      double r = r0;
      std::uint64_t x = 0;
      while (u > r) {
        u -= r;
        ++x;
        if (x > n)
          break;
        r *= a / static_cast<double>(x) - s;
      }
      if (x <= n)
        return x;
    }
  }
  const auto mode = static_cast<std::uint64_t>(std::floor((nd + 1.0) * p));
  const double md = static_cast<double>(mode);
  const double log_pmf = std::lgamma(nd + 1.0) - std::lgamma(md + 1.0) -
                         std::lgamma(nd - md + 1.0) + md * std::log(p) +
                         (nd - md) * std::log(q);
  const double odds = p / q;
  return search_from_mode(
      0, n, mode, std::exp(log_pmf),
      [&](std::uint64_t x) {
        return static_cast<double>(n - x) / static_cast<double>(x + 1) * odds;
      },
      [&](std::uint64_t x) {
        return static_cast<double>(x) / static_cast<double>(n - x + 1) / odds;
      });
}

/// Number of successes in `draws` draws without replacement from a population
/// containing `successes` successes.
inline std::uint64_t RandomStream::hypergeometric(std::uint64_t population,
                                                  std::uint64_t successes,
                                                  std::uint64_t draws) {
  const std::uint64_t failures = population - successes;
  const std::uint64_t lo = draws > failures ? draws - failures : 0;
  const std::uint64_t hi = std::min(draws, successes);
  if (lo == hi)
    return lo;
  const double N = static_cast<double>(population);
  const double K = static_cast<double>(successes);
  const double n = static_cast<double>(draws);
  auto mode = static_cast<std::uint64_t>(std::floor((n + 1.0) * (K + 1.0) / (N + 2.0)));
  mode = std::clamp(mode, lo, hi);
  const double x = static_cast<double>(mode);
  auto log_choose = [](double a, double b) {
    return std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(a - b + 1.0);
  };
  const double log_pmf =
      log_choose(K, x) + log_choose(N - K, n - x) - log_choose(N, n);
  const double F = N - K;
  return search_from_mode(
      lo, hi, mode, std::exp(log_pmf),
      [&](std::uint64_t v) {
        const double t = static_cast<double>(v);
        return (K - t) * (n - t) / ((t + 1.0) * (F - n + t + 1.0));
      },
      [&](std::uint64_t v) {
        const double t = static_cast<double>(v);
        return t * (F - n + t) / ((K - t + 1.0) * (n - t + 1.0));
      });
}

} // namespace sortition::numerics
