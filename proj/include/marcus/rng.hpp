/*
   Copyright 2026 The marcus-averaging Authors

   Licensed under the Apache License, Version 2.0 (the "License");
   you may not use this file except in compliance with the License.
   You may obtain a copy of the License at

       http://www.apache.org/licenses/LICENSE-2.0

   Unless required by applicable law or agreed to in writing, software
   distributed under the License is distributed on an "AS IS" BASIS,
   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
   See the License for the specific language governing permissions and
   limitations under the License.
*/

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>

namespace marcus {

// Philox4x32-10 counter-based generator. Stateless block function:
// the same (counter, key) always produces the same 128 output bits.
class Philox4x32 {
public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    static Counter generate(Counter ctr, Key key) noexcept
    {
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                key[0] += kWeylA;
                key[1] += kWeylB;
            }
            ctr = single_round(ctr, key);
        }
        return ctr;
    }

private:
    static constexpr std::uint32_t kWeylA = 0x9E3779B9u;
    static constexpr std::uint32_t kWeylB = 0xBB67AE85u;
    static constexpr std::uint32_t kMulA = 0xD2511F53u;
    static constexpr std::uint32_t kMulB = 0xCD9E8D57u;

    static Counter single_round(const Counter& c, const Key& k) noexcept
    {
        const std::uint64_t p0 = static_cast<std::uint64_t>(kMulA) * c[0];
        const std::uint64_t p1 = static_cast<std::uint64_t>(kMulB) * c[2];
        return {static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k[0],
                static_cast<std::uint32_t>(p1),
                static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k[1],
                static_cast<std::uint32_t>(p0)};
    }
};

/**
 * Counter-based random stream identified by (master_seed, stream_index).
 *
 * Derivation scheme (stable, part of the public contract):
 *   key     = (low32(master_seed), high32(master_seed))
 *   counter = (low32(block), high32(block), low32(stream_index), high32(stream_index))
 * where `block` counts 128-bit Philox blocks consumed by this stream, starting at 0.
 * Each block yields two 64-bit words (words 0|1 and 2|3, little-endian order),
 * and every 64-bit word is turned into a double by taking its top 53 bits.
 *
 * Streams never share counters, so each Monte Carlo path gets its own index and
 * the draws of path i do not depend on how many paths run or in which order.
 */
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
        : key_{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32)},
          stream_index_(stream_index),
          master_seed_(master_seed)
    {
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }
    std::uint64_t blocks_consumed() const noexcept { return block_; }

    std::uint64_t next_u64() noexcept
    {
        if (word_ == 2) {
            refill();
        }
        const auto lo = buffer_[2 * word_];
        const auto hi = buffer_[2 * word_ + 1];
        ++word_;
        return static_cast<std::uint64_t>(lo) | (static_cast<std::uint64_t>(hi) << 32);
    }

    // Uniform on [0, 1).
    double uniform() noexcept { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on (0, 1); safe as a log argument.
    double uniform_open() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

private:
    void refill() noexcept
    {
        const Philox4x32::Counter ctr{static_cast<std::uint32_t>(block_), static_cast<std::uint32_t>(block_ >> 32),
                                      static_cast<std::uint32_t>(stream_index_),
                                      static_cast<std::uint32_t>(stream_index_ >> 32)};
        buffer_ = Philox4x32::generate(ctr, key_);
        ++block_;
        word_ = 0;
    }

    Philox4x32::Key key_;
    std::uint64_t stream_index_;
    std::uint64_t master_seed_;
    std::uint64_t block_ = 0;
    Philox4x32::Counter buffer_{};
    int word_ = 2;
};

// The samplers below are written out instead of using <random> distributions so that
// the sequence of draws is identical across standard library implementations.

inline double standard_normal(RngStream& rng) noexcept
{
    const double u1 = rng.uniform_open();
    const double u2 = rng.uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double exponential(RngStream& rng, double rate) noexcept { return -std::log(rng.uniform_open()) / rate; }

// Gamma(shape, rate) with density rate^shape / Gamma(shape) x^(shape-1) e^(-rate x).
// Marsaglia-Tsang squeeze method for shape >= 1; shape < 1 uses G(shape + 1) * U^(1/shape),
// evaluated in log space because U^(1/shape) underflows for small shapes.
inline double gamma_variate(RngStream& rng, double shape, double rate)
{
    if (!(shape > 0.0) || !(rate > 0.0)) {
        throw std::invalid_argument("gamma_variate: shape and rate must be positive");
    }
    if (shape < 1.0) {
        const double g = gamma_variate(rng, shape + 1.0, 1.0);
        const double log_u = std::log(rng.uniform_open());
        return std::exp(std::log(g) + log_u / shape) / rate;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = rng.uniform_open();
        if (u < 1.0 - 0.0331 * x * x * x * x) {
            return d * v / rate;
        }
        if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
            return d * v / rate;
        }
    }
}

// Poisson(mean) by sequential inversion; large means are split into chunks of at most 30,
// which keeps exp(-mean) far from underflow and is exact in law by additivity.
inline std::uint64_t poisson_variate(RngStream& rng, double mean)
{
    if (!(mean >= 0.0) || !std::isfinite(mean)) {
        throw std::invalid_argument("poisson_variate: mean must be finite and nonnegative");
    }
    constexpr double kChunk = 30.0;
    std::uint64_t total = 0;
    while (mean > 0.0) {
        const double m = std::min(mean, kChunk);
        mean -= m;
        double p = std::exp(-m);
        double cdf = p;
        const double u = rng.uniform();
        std::uint64_t k = 0;
        while (u > cdf && p > 0.0) {
            ++k;
            p *= m / static_cast<double>(k);
            cdf += p;
        }
        total += k;
    }
    return total;
}

} // namespace marcus
