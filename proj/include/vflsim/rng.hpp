#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string_view>
#include <vector>

namespace vflsim {

// splitmix64, used only for deriving stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream with a fixed draw budget per primitive:
///   uniform01            1 engine draw
///   uniform_index        1 engine draw
///   normal_pair          2 engine draws (Box-Muller, no cached spare)
///   fill_gaussian(n)     2 * ceil(n/2) engine draws
/// Keeping draw counts fixed makes run traces reproducible from the seed
/// alone, independent of standard-library distribution internals.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t raw() { return engine_(); }

  /// Uniform in [0, 1), 53-bit resolution.
  double uniform01() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n). Multiply-shift map; bias is O(n / 2^64).
  std::size_t uniform_index(std::size_t n) {
    return static_cast<std::size_t>(
        (static_cast<unsigned __int128>(engine_()) * n) >> 64);
  }

  /// One Box-Muller pair. Never caches, so the draw count stays fixed.
  std::pair<double, double> normal_pair() {
    double u1 = uniform01();
    double u2 = uniform01();
    // Guard the log against u1 == 0.
    double r = std::sqrt(-2.0 * std::log1p(-u1));
    double theta = 2.0 * std::numbers::pi * u2;
    return {r * std::cos(theta), r * std::sin(theta)};
  }

  void fill_gaussian(std::vector<double>& out) {
    std::size_t i = 0;
    while (i + 1 < out.size()) {
      auto [a, b] = normal_pair();
      out[i++] = a;
      out[i++] = b;
    }
    if (i < out.size()) out[i] = normal_pair().first;
  }

  /// Categorical draw by CDF inversion; consumes exactly one uniform.
  std::size_t categorical(const std::vector<double>& p) {
    double x = uniform01();
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < p.size(); ++k) {
      acc += p[k];
      if (x < acc) return k;
    }
    return p.empty() ? 0 : p.size() - 1;
  }

  /// Independent stream derived from a master seed. Streams are indexed,
  /// not forked, so the consumption pattern of one never shifts another.
  static Rng from_master(std::uint64_t master, std::uint64_t stream_id) {
    return Rng(splitmix64(master ^ splitmix64(stream_id + 0x51edULL)));
  }

 private:
  std::mt19937_64 engine_;
};

// Fixed stream ids per run. Each party owns its stream so paired runs of
// different frameworks consume directions identically per party.
namespace stream {
inline constexpr std::uint64_t kScheduler = 0;
inline constexpr std::uint64_t kBatch = 1;
inline constexpr std::uint64_t kServer = 2;
inline constexpr std::uint64_t kDataset = 50;
inline constexpr std::uint64_t kServerInit = 100;
inline std::uint64_t client(int m) { return 3 + static_cast<std::uint64_t>(m); }
inline std::uint64_t client_init(int m) {
  return 101 + static_cast<std::uint64_t>(m);
}
}  // namespace stream

}  // namespace vflsim
