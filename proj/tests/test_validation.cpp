#include <algorithm>
#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xagg/validation.hpp"

using namespace xagg;

TEST(Rates, DirectCount) {
    const std::vector<double> s{0.9, 0.8, 0.4};
    const std::vector<bool> agree{true, true, false};
    const auto r = tpr_fpr_at(s, agree, 0.5);
    EXPECT_EQ(*r.tpr, 1.0);
    EXPECT_EQ(*r.fpr, 0.0);
    const auto all = tpr_fpr_at(s, agree, -1.0);
    EXPECT_EQ(*all.tpr, 1.0);
    EXPECT_EQ(*all.fpr, 1.0);
    const auto none = tpr_fpr_at(s, agree, 0.95);
    EXPECT_EQ(*none.tpr, 0.0);
    EXPECT_EQ(*none.fpr, 0.0);
}

TEST(Rates, EmptyGroupIsMissing) {
    const auto r = tpr_fpr_at({0.1, 0.2}, {true, true}, 0.0);
    EXPECT_TRUE(r.tpr.has_value());
    EXPECT_FALSE(r.fpr.has_value());
    const auto c = roc_curve({0.1, 0.2}, {true, true});
    EXPECT_FALSE(c.auc.has_value());
    EXPECT_FALSE(c.points.empty());
}

TEST(Roc, HandExampleAuc) {
    const auto c = roc_curve({0.9, 0.4, 0.6}, {true, true, false});
    EXPECT_DOUBLE_EQ(*c.auc, 0.5);
}

TEST(Roc, EndpointsAndMonotonicity) {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> s(40);
    std::vector<bool> a(40);
    for (std::size_t i = 0; i < 40; ++i) {
        s[i] = u(gen);
        a[i] = i % 4 != 0;
    }
    const auto c = roc_curve(s, a);
    ASSERT_GE(c.points.size(), 2u);
    EXPECT_EQ(c.points.front().threshold, -1.0);
    EXPECT_EQ(c.points.front().tpr, 1.0);
    EXPECT_EQ(c.points.front().fpr, 1.0);
    EXPECT_EQ(c.points.back().tpr, 0.0);
    EXPECT_EQ(c.points.back().fpr, 0.0);
    EXPECT_GT(c.points.back().threshold, *std::max_element(s.begin(), s.end()));
    for (std::size_t i = 1; i < c.points.size(); ++i) {
        EXPECT_LT(c.points[i - 1].threshold, c.points[i].threshold);
        EXPECT_LE(c.points[i].tpr, c.points[i - 1].tpr);
        EXPECT_LE(c.points[i].fpr, c.points[i - 1].fpr);
        EXPECT_TRUE(c.points[i].tpr != c.points[i - 1].tpr || c.points[i].fpr != c.points[i - 1].fpr);
    }
}

TEST(Roc, PerfectSeparationAndConstantScores) {
    const auto p = roc_curve({0.9, 0.8, 0.1, 0.2}, {true, true, false, false});
    EXPECT_EQ(*p.auc, 1.0);
    EXPECT_TRUE(std::any_of(p.points.begin(), p.points.end(), [](const RocPoint& q) { return q.fpr == 0 && q.tpr == 1; }));
    const auto k = roc_curve({0.5, 0.5, 0.5}, {true, false, true});
    ASSERT_EQ(k.points.size(), 2u);
    EXPECT_DOUBLE_EQ(*k.auc, 0.5);
}

TEST(Roc, OrderAndMonotoneTransformInvariance) {
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-1, 1);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> s(25), tr(25);
        std::vector<bool> a(25);
        for (std::size_t i = 0; i < 25; ++i) {
            s[i] = std::round(u(gen) * 8) / 8;
            tr[i] = std::tanh(2 * s[i]);
            a[i] = (i * 7) % 3 != 0;
        }
        const auto base = roc_curve(s, a);
        EXPECT_NEAR(*roc_curve(tr, a).auc, *base.auc, 1e-12);
        std::vector<std::size_t> perm(25);
        std::iota(perm.begin(), perm.end(), std::size_t{0});
        std::shuffle(perm.begin(), perm.end(), gen);
        std::vector<double> ps;
        std::vector<bool> pa;
        for (auto i : perm) {
            ps.push_back(s[i]);
            pa.push_back(a[i]);
        }
        const auto shuffled = roc_curve(ps, pa);
        ASSERT_EQ(shuffled.points.size(), base.points.size());
        for (std::size_t i = 0; i < base.points.size(); ++i) {
            EXPECT_EQ(shuffled.points[i].tpr, base.points[i].tpr);
            EXPECT_EQ(shuffled.points[i].fpr, base.points[i].fpr);
        }
        EXPECT_NEAR(*base.auc, oracle::pairwise_auc(s, a), 1e-9);
    }
}

TEST(Roc, RandomScoresNearHalf) {
    std::mt19937_64 gen(5);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> s(4000);
    std::vector<bool> a(4000);
    for (std::size_t i = 0; i < s.size(); ++i) {
        s[i] = u(gen);
        a[i] = i % 2;
    }
    EXPECT_NEAR(*roc_curve(s, a).auc, 0.5, 0.03);
}
