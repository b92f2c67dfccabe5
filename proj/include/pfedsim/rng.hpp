// Copyright 2026 The pfedsim Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include "pfedsim/error.hpp"

namespace pfedsim {

// Named streams derived from one master seed. Adding a stream never shifts
// the values drawn by the others.
enum class Stream : std::uint64_t {
  kData = 1,
  kPartition = 2,
  kInit = 3,
  kSampler = 4,
  kShuffle = 5,
  kProbe = 6,
};

inline std::uint64_t SplitMix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based seed split: the result depends only on the arguments, so the
// seed of client 7 in round 12 is the same whatever order clients run in.
inline std::uint64_t DeriveSeed(std::uint64_t master, Stream stream,
                                std::uint64_t a = 0, std::uint64_t b = 0) {
  std::uint64_t h = SplitMix64(master);
  h = SplitMix64(h ^ static_cast<std::uint64_t>(stream));
  h = SplitMix64(h ^ a);
  h = SplitMix64(h ^ (b * 0xd6e8feb86659fd93ULL));
  return h;
}

// Deterministic random source. The distributions are implemented here rather
// than taken from <random> because the standard leaves their algorithms
// unspecified, and outputs must be identical across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n), rejection-sampled to avoid modulo bias.
  std::size_t Index(std::size_t n) {
    if (n == 0) throw UsageError("Rng::Index: empty range");
    const std::uint64_t bound = static_cast<std::uint64_t>(n);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    std::uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return static_cast<std::size_t>(x % bound);
  }

  // Box-Muller, one draw per call.
  double Normal() {
    const double u1 = 1.0 - Uniform();  // (0, 1]
    const double u2 = Uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  // log of a Gamma(shape, 1) variate. Working in log space keeps tiny shapes
  // (alpha = 0.1 gives U^10 factors) from underflowing to zero.
  double LogGamma(double shape) {
    if (!(shape > 0.0)) throw UsageError("Rng::LogGamma: shape must be > 0");
    if (shape < 1.0) {
      const double u = 1.0 - Uniform();
      return LogGamma(shape + 1.0) + std::log(u) / shape;
    }
    // Marsaglia-Tsang.
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = Normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = 1.0 - Uniform();
      if (std::log(u) < 0.5 * x * x + d - d * v + d * std::log(v)) {
        return std::log(d) + std::log(v);
      }
    }
  }

  // Symmetric Dirichlet(alpha * 1_k).
  std::vector<double> Dirichlet(std::size_t k, double alpha) {
    if (k == 0) throw UsageError("Rng::Dirichlet: k must be >= 1");
    std::vector<double> logs(k);
    for (auto& l : logs) l = LogGamma(alpha);
    double max_log = logs[0];
    for (double l : logs) max_log = std::max(max_log, l);
    std::vector<double> p(k);
    double sum = 0.0;
    for (std::size_t i = 0; i < k; ++i) {
      p[i] = std::exp(logs[i] - max_log);
      sum += p[i];
    }
    for (auto& x : p) x /= sum;
    return p;
  }

  // Fisher-Yates.
  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[Index(i)]);
    }
  }

  std::vector<std::size_t> Permutation(std::size_t n) {
    std::vector<std::size_t> p(n);
    std::iota(p.begin(), p.end(), std::size_t{0});
    Shuffle(p);
    return p;
  }

  // m distinct values from [0, n), sorted ascending.
  std::vector<std::size_t> SampleWithoutReplacement(std::size_t n, std::size_t m) {
    if (m > n) throw UsageError("Rng::SampleWithoutReplacement: m > n");
    std::vector<std::size_t> pool(n);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < m; ++i) {
      std::swap(pool[i], pool[i + Index(n - i)]);
    }
    pool.resize(m);
    std::sort(pool.begin(), pool.end());
    return pool;
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace pfedsim
