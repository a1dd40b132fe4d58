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

#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

#include <gtest/gtest.h>

#include "marcus/numerics.hpp"
#include "marcus/parallel.hpp"
#include "marcus/rng.hpp"

namespace marcus {
namespace {

// Published known-answer vectors for Philox4x32-10.
TEST(Philox, KnownAnswerZero)
{
    const auto out = Philox4x32::generate({0, 0, 0, 0}, {0, 0});
    EXPECT_EQ(out, (Philox4x32::Counter{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u}));
}

TEST(Philox, KnownAnswerAllOnes)
{
    const auto out = Philox4x32::generate({0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu},
                                          {0xffffffffu, 0xffffffffu});
    EXPECT_EQ(out, (Philox4x32::Counter{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu}));
}

TEST(Philox, KnownAnswerPi)
{
    const auto out = Philox4x32::generate({0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                          {0xa4093822u, 0x299f31d0u});
    EXPECT_EQ(out, (Philox4x32::Counter{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u}));
}

TEST(RngStream, DerivationMatchesDocumentedCounterLayout)
{
    const std::uint64_t seed = 0x0123456789abcdefULL;
    const std::uint64_t stream = 0xfedcba9876543210ULL;
    RngStream rng(seed, stream);
    for (std::uint64_t block = 0; block < 3; ++block) {
        const auto words = Philox4x32::generate(
            {static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32),
             static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
            {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
        EXPECT_EQ(rng.next_u64(), static_cast<std::uint64_t>(words[0]) | (static_cast<std::uint64_t>(words[1]) << 32));
        EXPECT_EQ(rng.next_u64(), static_cast<std::uint64_t>(words[2]) | (static_cast<std::uint64_t>(words[3]) << 32));
        EXPECT_EQ(rng.blocks_consumed(), block + 1);
    }
}

TEST(RngStream, IdenticalSeedAndIndexReproduce)
{
    RngStream a(42, 7), b(42, 7);
    for (int i = 0; i < 1000; ++i) {
        ASSERT_EQ(a.next_u64(), b.next_u64());
    }
}

TEST(RngStream, DistinctIndicesAreUncorrelated)
{
    RngStream a(42, 0), b(42, 1), c(43, 0);
    const int n = 100000;
    double sab = 0.0, sac = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = a.uniform() - 0.5;
        sab += u * (b.uniform() - 0.5);
        sac += u * (c.uniform() - 0.5);
    }
    // correlation of independent uniforms has sd 1/sqrt(n); var(U) = 1/12
    EXPECT_LT(std::abs(12.0 * sab / n), 4.0 / std::sqrt(n));
    EXPECT_LT(std::abs(12.0 * sac / n), 4.0 / std::sqrt(n));
}

TEST(RngStream, UniformRanges)
{
    RngStream rng(1, 1);
    for (int i = 0; i < 100000; ++i) {
        const double u = rng.uniform();
        const double v = rng.uniform_open();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        ASSERT_GT(v, 0.0);
        ASSERT_LT(v, 1.0);
    }
}

TEST(RngStream, UniformPassesKolmogorovSmirnov)
{
    RngStream rng(5, 3);
    std::vector<double> u(20000);
    for (auto& x : u) {
        x = rng.uniform();
    }
    // 1% critical value of the one-sample KS statistic is about 1.63 / sqrt(n)
    EXPECT_LT(ks_distance_uniform(u), 1.63 / std::sqrt(20000.0));
}

struct Moments {
    double mean;
    double var;
};

template <class Draw>
Moments sample_moments(Draw draw, int n)
{
    double s = 0.0, s2 = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = draw();
        s += x;
        s2 += x * x;
    }
    const double m = s / n;
    return {m, s2 / n - m * m};
}

TEST(Samplers, StandardNormalMoments)
{
    RngStream rng(11, 0);
    const int n = 200000;
    const auto m = sample_moments([&] { return standard_normal(rng); }, n);
    EXPECT_NEAR(m.mean, 0.0, 4.0 / std::sqrt(n));
    EXPECT_NEAR(m.var, 1.0, 4.0 * std::sqrt(2.0 / n));
}

TEST(Samplers, ExponentialMean)
{
    RngStream rng(12, 0);
    const int n = 200000;
    const auto m = sample_moments([&] { return exponential(rng, 2.5); }, n);
    EXPECT_NEAR(m.mean, 0.4, 4.0 * 0.4 / std::sqrt(n));
}

class GammaMoments : public ::testing::TestWithParam<double> {};

TEST_P(GammaMoments, MeanAndVarianceMatchShapeOverRate)
{
    const double shape = GetParam();
    const double rate = 1.7;
    RngStream rng(13, static_cast<std::uint64_t>(shape * 1000));
    const int n = 200000;
    const auto m = sample_moments([&] { return gamma_variate(rng, shape, rate); }, n);
    const double mean = shape / rate;
    const double var = shape / (rate * rate);
    EXPECT_NEAR(m.mean, mean, 4.0 * std::sqrt(var / n));
    // var of the sample variance: (mu4 - sigma^4) / n with mu4 = 3 k (k + 2) / rate^4
    const double mu4 = 3.0 * shape * (shape + 2.0) / std::pow(rate, 4);
    EXPECT_NEAR(m.var, var, 4.0 * std::sqrt((mu4 - var * var) / n));
}

INSTANTIATE_TEST_SUITE_P(Shapes, GammaMoments, ::testing::Values(0.01, 0.3, 1.0, 2.5, 40.0));

TEST(Samplers, GammaSmallShapeStaysPositiveAndFinite)
{
    RngStream rng(14, 0);
    for (int i = 0; i < 10000; ++i) {
        const double g = gamma_variate(rng, 1e-3, 1.0);
        ASSERT_GE(g, 0.0);
        ASSERT_TRUE(std::isfinite(g));
    }
}

TEST(Samplers, GammaRejectsNonPositiveParameters)
{
    RngStream rng(1, 0);
    EXPECT_THROW(gamma_variate(rng, 0.0, 1.0), std::invalid_argument);
    EXPECT_THROW(gamma_variate(rng, 1.0, -1.0), std::invalid_argument);
}

class PoissonMoments : public ::testing::TestWithParam<double> {};

TEST_P(PoissonMoments, MeanEqualsVariance)
{
    const double mean = GetParam();
    RngStream rng(15, static_cast<std::uint64_t>(mean * 100));
    const int n = 100000;
    const auto m = sample_moments([&] { return static_cast<double>(poisson_variate(rng, mean)); }, n);
    EXPECT_NEAR(m.mean, mean, 4.0 * std::sqrt(mean / n));
    EXPECT_NEAR(m.var, mean, 4.0 * std::sqrt((mean + 2.0 * mean * mean) / n));
}

INSTANTIATE_TEST_SUITE_P(Means, PoissonMoments, ::testing::Values(0.05, 3.0, 29.5, 95.0));

TEST(Samplers, PoissonZeroMeanAndErrors)
{
    RngStream rng(16, 0);
    EXPECT_EQ(poisson_variate(rng, 0.0), 0u);
    EXPECT_THROW(poisson_variate(rng, -1.0), std::invalid_argument);
    EXPECT_THROW(poisson_variate(rng, std::numeric_limits<double>::infinity()), std::invalid_argument);
}

TEST(Parallel, ResultsIndependentOfThreadCount)
{
    auto run = [](unsigned threads) {
        std::vector<double> out(1000);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            RngStream rng(99, i);
            out[i] = gamma_variate(rng, 0.5, 1.0);
        });
        return pairwise_sum(out);
    };
    const double one = run(1);
    EXPECT_EQ(one, run(4));
    EXPECT_EQ(one, run(16));
}

TEST(Parallel, VisitsEveryIndexOnce)
{
    std::vector<std::atomic<int>> hits(5000);
    parallel_for(hits.size(), 8, [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) {
        ASSERT_EQ(h.load(), 1);
    }
}

TEST(Parallel, RethrowsWorkerException)
{
    EXPECT_THROW(parallel_for(100, 4,
                              [](std::size_t i) {
                                  if (i == 37) {
                                      throw std::runtime_error("boom");
                                  }
                              }),
                 std::runtime_error);
}

TEST(Parallel, ZeroItemsIsNoop)
{
    int calls = 0;
    parallel_for(0, 4, [&](std::size_t) { ++calls; });
    EXPECT_EQ(calls, 0);
}

TEST(PairwiseSum, MatchesExactSumOfIntegers)
{
    std::vector<double> v(1001);
    std::iota(v.begin(), v.end(), 1.0);
    EXPECT_EQ(pairwise_sum(v), 1001.0 * 1002.0 / 2.0);
    EXPECT_EQ(pairwise_sum(std::vector<double>{}), 0.0);
}

} // namespace
} // namespace marcus
