#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>
#include <random>

#include "scaffold/stats.hpp"
#include "support.hpp"

using namespace scaffold;
using namespace scaffold::stats;

namespace {

double brute_cliffs(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0;
    for (double x : a)
        for (double y : b) s += (x > y) - (x < y);
    return s / (static_cast<double>(a.size()) * static_cast<double>(b.size()));
}

// Two-sided exact p by enumerating every sign pattern over the observed ranks.
double brute_wilcoxon_p(const std::vector<double>& d) {
    std::vector<double> nz;
    for (double x : d)
        if (x != 0) nz.push_back(x);
    std::vector<double> mags;
    for (double x : nz) mags.push_back(std::fabs(x));
    auto ranks = average_ranks(mags);
    double observed = 0;
    for (std::size_t i = 0; i < nz.size(); ++i)
        if (nz[i] > 0) observed += ranks[i];
    std::size_t total = std::size_t{1} << nz.size(), low = 0, high = 0;
    for (std::size_t mask = 0; mask < total; ++mask) {
        double w = 0;
        for (std::size_t i = 0; i < nz.size(); ++i)
            if (mask >> i & 1) w += ranks[i];
        low += w <= observed + 1e-9;
        high += w >= observed - 1e-9;
    }
    return std::min(1.0, 2.0 * static_cast<double>(std::min(low, high)) / static_cast<double>(total));
}

std::vector<double> likert_sample(std::mt19937_64& rng, std::size_t n) {
    std::vector<double> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(1.0 + 0.5 * static_cast<double>(testing_support::pick(rng, 7)));
    return out;
}

}  // namespace

TEST(CliffsDelta, Examples) {
    EXPECT_DOUBLE_EQ(cliffs_delta(std::vector<double>{1, 2}, std::vector<double>{1, 2}), 0.0);
    EXPECT_DOUBLE_EQ(cliffs_delta(std::vector<double>{3, 4}, std::vector<double>{1, 2}), 1.0);
    EXPECT_DOUBLE_EQ(cliffs_delta(std::vector<double>{1, 2}, std::vector<double>{3, 4}), -1.0);
    EXPECT_DOUBLE_EQ(cliffs_delta(std::vector<double>{2}, std::vector<double>{1, 2, 3}), 0.0);
    EXPECT_DOUBLE_EQ(cliffs_delta(std::vector<double>{3, 3}, std::vector<double>{1, 3}), 0.5);
    EXPECT_THROW(cliffs_delta(std::vector<double>{}, std::vector<double>{1}), EmptySample);
}

TEST(CliffsDeltaProperty, MatchesPairwiseCountAndIsAntisymmetric) {
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 1000; ++trial) {
        auto a = likert_sample(rng, 1 + testing_support::pick(rng, 40));
        auto b = likert_sample(rng, 1 + testing_support::pick(rng, 40));
        double d = cliffs_delta(a, b);
        ASSERT_NEAR(d, brute_cliffs(a, b), 1e-12);
        ASSERT_NEAR(cliffs_delta(b, a), -d, 1e-12);
        ASSERT_GE(d, -1.0);
        ASSERT_LE(d, 1.0);
    }
}

TEST(Wilcoxon, SmallExamples) {
    auto r = wilcoxon_signed_rank(std::vector<double>{1, 2, 3});
    EXPECT_DOUBLE_EQ(r.w_plus, 6);
    EXPECT_DOUBLE_EQ(r.w_minus, 0);
    EXPECT_DOUBLE_EQ(r.statistic, 0);
    EXPECT_DOUBLE_EQ(r.p_value, 0.25);
    EXPECT_TRUE(r.exact);
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(std::vector<double>{1, -1}).p_value, 1.0);
    EXPECT_DOUBLE_EQ(wilcoxon_signed_rank(std::vector<double>{5}).p_value, 1.0);
    auto z = wilcoxon_signed_rank(std::vector<double>{0, 0, 2, -1, 3});
    EXPECT_EQ(z.n, 3u);
    EXPECT_DOUBLE_EQ(z.w_minus, 1);
    EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{0, 0}), AllZeroDifferences);
}

TEST(Wilcoxon, AverageRanksShareTies) {
    EXPECT_EQ(average_ranks(std::vector<double>{0.5, 0.5, 1.0, 0.25}), (std::vector<double>{2.5, 2.5, 4, 1}));
}

TEST(WilcoxonProperty, ExactPMatchesSignPatternEnumeration) {
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 400; ++trial) {
        std::vector<double> d;
        for (std::size_t n = 1 + testing_support::pick(rng, 10); n > 0; --n)
            d.push_back(0.5 * (static_cast<double>(testing_support::pick(rng, 9)) - 4.0));
        bool any = std::any_of(d.begin(), d.end(), [](double x) { return x != 0; });
        if (!any) continue;
        auto r = wilcoxon_signed_rank(d);
        ASSERT_TRUE(r.exact);
        ASSERT_NEAR(r.p_value, brute_wilcoxon_p(d), 1e-12);
        ASSERT_NEAR(r.w_plus + r.w_minus, r.n * (r.n + 1) / 2.0, 1e-9);
    }
}

TEST(Wilcoxon, NormalApproximationAboveTheExactLimit) {
    std::vector<double> d;
    for (int i = 1; i <= 20; ++i) d.push_back(i);
    auto r = wilcoxon_signed_rank(d);
    EXPECT_FALSE(r.exact);
    double z = (210.0 - 105.0) / std::sqrt(20.0 * 21 * 41 / 24);
    boost::math::normal_distribution<> n;
    EXPECT_NEAR(r.p_value, 2 * boost::math::cdf(boost::math::complement(n, z)), 1e-12);
}

TEST(PairedT, ExampleAndBoostOracle) {
    auto r = paired_t(std::vector<double>{1, 2, 3, 4});
    EXPECT_NEAR(r.t, 3.872983346207417, 1e-12);
    EXPECT_DOUBLE_EQ(r.df, 3);
    EXPECT_NEAR(r.p_value, 0.030466, 1e-5);
    EXPECT_THROW(paired_t(std::vector<double>{2, 2, 2}), ZeroVariance);
    EXPECT_THROW(paired_t(std::vector<double>{2}), InsufficientSample);
}

TEST(PairedTProperty, TwoTailedPMatchesBoost) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 2000; ++trial) {
        double df = 1 + static_cast<double>(testing_support::pick(rng, 200));
        double t = testing_support::uniform(rng, -12, 12);
        boost::math::students_t dist(df);
        double want = 2 * boost::math::cdf(boost::math::complement(dist, std::fabs(t)));
        ASSERT_NEAR(student_t_two_tailed(t, df), want, 1e-9) << "t=" << t << " df=" << df;
    }
}

TEST(Holm, AdjustsInInputOrder) {
    EXPECT_EQ(holm_bonferroni(std::vector<double>{0.01, 0.04, 0.03}), (std::vector<double>{0.03, 0.06, 0.06}));
    struct Case {
        std::vector<double> p, want;
    };
    std::vector<Case> cases{
        {{0.5}, {0.5}},
        {{0.01, 0.02}, {0.02, 0.02}},
        {{0.02, 0.01}, {0.02, 0.02}},
        {{0.001, 0.01, 0.03, 0.04}, {0.004, 0.03, 0.06, 0.06}},
        {{0.6, 0.5}, {1.0, 1.0}},
        {{0.01, 0.01, 0.01}, {0.03, 0.03, 0.03}},
        {{0.2, 0.001, 0.3}, {0.4, 0.003, 0.4}},
        {{0.0, 1.0}, {0.0, 1.0}},
        {{0.04, 0.03, 0.02, 0.01}, {0.06, 0.06, 0.06, 0.04}},
        {{}, {}},
    };
    for (const auto& c : cases) {
        auto got = holm_bonferroni(c.p);
        ASSERT_EQ(got.size(), c.want.size());
        for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], c.want[i], 1e-12);
    }
    EXPECT_THROW(holm_bonferroni(std::vector<double>{1.2}), Error);
}

TEST(HolmProperty, MonotoneAndNeverBelowRaw) {
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        std::vector<double> p;
        for (std::size_t n = 1 + testing_support::pick(rng, 12); n > 0; --n) p.push_back(testing_support::uniform(rng, 0, 1));
        auto adj = holm_bonferroni(p);
        for (std::size_t i = 0; i < p.size(); ++i) {
            ASSERT_GE(adj[i], p[i]);
            ASSERT_LE(adj[i], 1.0);
            for (std::size_t j = 0; j < p.size(); ++j)
                if (p[i] < p[j]) ASSERT_LE(adj[i], adj[j]);
        }
    }
}

TEST(Summary, MeanAndSd) {
    EXPECT_DOUBLE_EQ(mean(std::vector<double>{1, 2, 3, 4}), 2.5);
    EXPECT_NEAR(sample_sd(std::vector<double>{1, 2, 3, 4}), std::sqrt(5.0 / 3.0), 1e-15);
    EXPECT_DOUBLE_EQ(sample_sd(std::vector<double>{7}), 0.0);
    EXPECT_THROW(mean(std::vector<double>{}), EmptySample);
}
