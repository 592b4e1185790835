#include <gtest/gtest.h>

#include <set>

#include "lbaug/parallel.hpp"
#include "lbaug/rng.hpp"

using namespace lbaug;

TEST(Rng, DerivedSeedsAreDeterministicAndDistinct) {
    EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
    std::set<std::uint64_t> seen;
    for (std::uint64_t t = 0; t < 1000; ++t) seen.insert(derive_seed(7, t));
    EXPECT_EQ(seen.size(), 1000u);
    EXPECT_NE(derive_seed(7, 3), derive_seed(8, 3));
}

TEST(Rng, BelowStaysInRangeAndCoversIt) {
    Rng rng(1);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto v = rng.below(7);
        ASSERT_LT(v, 7u);
        ++hits[v];
    }
    for (int h : hits) EXPECT_GT(h, 850);
}

TEST(Rng, UniformMoments) {
    Rng rng(2);
    double s = 0.0, s2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        ASSERT_GE(u, 0.0);
        ASSERT_LT(u, 1.0);
        s += u;
        s2 += u * u;
    }
    EXPECT_NEAR(s / n, 0.5, 0.01);
    EXPECT_NEAR(s2 / n - (s / n) * (s / n), 1.0 / 12.0, 0.005);
}

TEST(Rng, NormalMoments) {
    Rng rng(3);
    double s = 0.0, s2 = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal(1.0, 2.0);
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 1.0, 0.03);
    EXPECT_NEAR(s2 / n - (s / n) * (s / n), 4.0, 0.1);
}

TEST(Parallel, ResultsDoNotDependOnThreadCount) {
    auto run = [](int threads) {
        std::vector<std::uint64_t> out(257);
        parallel_for(out.size(), threads, [&](std::size_t i) {
            Rng rng(derive_seed(5, i));
            out[i] = rng.below(1000000);
        });
        return out;
    };
    EXPECT_EQ(run(1), run(4));
}

TEST(Parallel, RethrowsWorkerErrors) {
    EXPECT_THROW(parallel_for(10, 3,
                              [](std::size_t i) {
                                  if (i == 6) throw std::runtime_error("boom");
                              }),
                 std::runtime_error);
}
