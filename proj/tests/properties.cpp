// Exact property checks against brute-force oracles.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "xagg/aggregation.hpp"
#include "xagg/explainers.hpp"
#include "xagg/neighbourhood.hpp"
#include "xagg/robustness.hpp"
#include "xagg/validation.hpp"

using namespace xagg;

namespace {

Vector random_vector(std::mt19937_64& rng, std::size_t m, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Vector v(m);
    for (auto& x : v) x = u(rng);
    return v;
}

Attribution unit_attribution(std::mt19937_64& rng, std::size_t m, const char* model) {
    Attribution a = l2_normalize(random_vector(rng, m));
    a.model = model;
    return a;
}

}  // namespace

TEST(PropertyNormalize, UnitNormAndIdempotent) {
    std::mt19937_64 rng(1);
    for (int t = 0; t < 200; ++t) {
        const std::size_t m = 1 + t % 20;
        const auto a = l2_normalize(random_vector(rng, m, -50, 50));
        ASSERT_FALSE(a.zero);
        double s = 0;
        for (double v : a.values) s += v * v;
        EXPECT_NEAR(std::sqrt(s), 1.0, 1e-9);
        const auto b = l2_normalize(a.values);
        for (std::size_t j = 0; j < m; ++j) EXPECT_NEAR(a.values[j], b.values[j], 1e-15);
    }
}

TEST(PropertyAggregation, MeanIdentity) {
    std::mt19937_64 rng(2);
    for (int t = 0; t < 100; ++t) {
        const auto v = unit_attribution(rng, 7, "x");
        const auto agg = aggregate(align_signs({{v, v, v}, {1, 1, 1}}));
        for (std::size_t j = 0; j < 7; ++j) EXPECT_DOUBLE_EQ(agg.values[j], v.values[j]);
    }
}

TEST(PropertyAggregation, PermutationInvariant) {
    std::mt19937_64 rng(3);
    for (int t = 0; t < 100; ++t) {
        std::vector<Attribution> a{unit_attribution(rng, 9, "knn"), unit_attribution(rng, 9, "rf"),
                                   unit_attribution(rng, 9, "nn")};
        std::vector<int> labels{t % 2, (t / 2) % 2, (t / 4) % 2};
        const auto base = aggregate(align_signs({a, labels}));
        std::vector<std::size_t> perm{0, 1, 2};
        while (std::next_permutation(perm.begin(), perm.end())) {
            std::vector<Attribution> pa;
            std::vector<int> pl;
            for (auto i : perm) {
                pa.push_back(a[i]);
                pl.push_back(labels[i]);
            }
            const auto other = aggregate(align_signs({pa, pl}));
            for (std::size_t j = 0; j < 9; ++j) EXPECT_NEAR(other.values[j], base.values[j], 1e-15);
        }
    }
}

TEST(PropertyAggregation, SignFlipInvolution) {
    std::mt19937_64 rng(4);
    for (int t = 0; t < 100; ++t) {
        std::vector<Attribution> a{unit_attribution(rng, 5, "knn"), unit_attribution(rng, 5, "rf"),
                                   unit_attribution(rng, 5, "nn")};
        const std::vector<int> labels{0, 1, 1};
        const auto once = align_signs({a, labels});
        ASSERT_EQ(once.flipped, (std::vector<std::size_t>{0}));
        // flipping the dissenter again restores the bundle
        auto twice = once.attributions;
        for (auto& v : twice[0].values) v = -v;
        for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(twice[l].values, a[l].values);
        for (std::size_t l = 0; l < 3; ++l) {
            double n0 = 0, n1 = 0;
            for (double v : a[l].values) n0 += v * v;
            for (double v : once.attributions[l].values) n1 += v * v;
            EXPECT_EQ(n0, n1);
        }
    }
}

TEST(PropertyAggregation, OpposedPairCancels) {
    for (double nu : {0.1, 0.25, 1.0 / 3.0, 0.5}) {
        Attribution a, b, c;
        a.values = {nu, 0.3};
        b.values = {nu, 0.3};
        c.values = {-2 * nu, 0.3};
        const auto agg = aggregate(align_signs({{a, b, c}, {1, 1, 1}}));
        EXPECT_NEAR(agg.values[0], 0.0, 1e-15);
        EXPECT_NEAR(agg.values[1], 0.3, 1e-15);
    }
}

TEST(PropertySpearman, MatchesClosedFormOnAllPermutations) {
    for (std::size_t n = 2; n <= 6; ++n) {
        Vector base(n);
        std::iota(base.begin(), base.end(), 1.0);
        Vector p = base;
        do {
            const double expect = oracle::spearman_no_ties(base, p);
            EXPECT_NEAR(spearman_rho(base, p), expect, 1e-12) << "n=" << n;
            EXPECT_NEAR(spearman_rho(p, base), expect, 1e-12);
        } while (std::next_permutation(p.begin(), p.end()));
    }
}

TEST(PropertyAuc, EqualsPairwiseOracle) {
    std::mt19937_64 rng(5);
    for (int t = 0; t < 50; ++t) {
        const std::size_t n = 4 + t * 3;
        std::vector<double> scores(n);
        std::vector<bool> agree(n);
        std::uniform_int_distribution<int> level(-4, 4);
        for (std::size_t i = 0; i < n; ++i) {
            // coarse levels so ties are frequent
            scores[i] = (t % 2) ? level(rng) / 4.0 : std::uniform_real_distribution<double>(-1, 1)(rng);
            agree[i] = i % 3 != 0;
        }
        const auto curve = roc_curve(scores, agree);
        ASSERT_TRUE(curve.auc.has_value());
        EXPECT_NEAR(*curve.auc, oracle::pairwise_auc(scores, agree), 1e-9);
    }
}

TEST(PropertyForestExplainer, MatchesPathEnumeration) {
    std::mt19937_64 rng(6);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 3 + t % 4;
        const std::size_t b = 1 + t % 3;
        std::vector<DecisionTree> trees;
        for (std::size_t i = 0; i < b; ++i) trees.push_back(oracle::random_tree(rng, m, 2));
        const ForestModel forest(trees, {}, ForestParams{b, {}});
        for (int q = 0; q < 5; ++q) {
            const Vector x = random_vector(rng, m);
            const auto got = explain_rf(forest, x);
            const auto expect = l2_normalize(oracle::rf_explanation_raw(forest, x));
            ASSERT_EQ(got.zero, expect.zero);
            EXPECT_EQ(got.values, expect.values);
        }
    }
}

TEST(PropertyDeepLift, Completeness) {
    std::mt19937_64 rng(7);
    for (int t = 0; t < 100; ++t) {
        const std::size_t m = 2 + t % 6;
        const auto model = MlpModel::initialize({m, 8, 5, 2}, 100 + t);
        const Vector x = random_vector(rng, m, -2, 2);
        const Vector r = random_vector(rng, m, -2, 2);
        const auto ref = DeepLiftReference::of(model, r);
        for (int unit : {0, 1}) {
            const auto c = deeplift_contributions(model, x, ref, unit);
            const double total = std::accumulate(c.begin(), c.end(), 0.0);
            EXPECT_NEAR(total, oracle::logit(model, x, unit) - oracle::logit(model, r, unit), 1e-5);
        }
    }
}

TEST(PropertyMlp, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(8);
    // widths 2 -> 2 -> 2: twelve parameters
    for (int t = 0; t < 20; ++t) {
        const auto model = MlpModel::initialize({2, 2, 2}, 500 + t);
        Matrix x(6, 2);
        std::vector<int> y(6);
        for (std::size_t i = 0; i < 6; ++i) {
            const auto v = random_vector(rng, 2, -2, 2);
            x(i, 0) = v[0];
            x(i, 1) = v[1];
            y[i] = static_cast<int>(i % 2);
        }
        std::vector<std::size_t> rows{0, 1, 2, 3, 4, 5};
        Vector grad;
        model.loss_and_gradient(x, y, rows, grad);
        const auto fd = oracle::numeric_gradient(model, x, y, rows);
        for (std::size_t i = 0; i < grad.size(); ++i) {
            const double scale = std::max({std::abs(grad[i]), std::abs(fd[i]), 1e-6});
            EXPECT_LE(std::abs(grad[i] - fd[i]) / scale, 1e-4) << "parameter " << i;
        }
    }
}

TEST(PropertySampler, BetaMean) {
    Rng rng = make_rng(9, 0);
    double s = 0;
    for (int i = 0; i < 10000; ++i) s += sample_beta(5.0, 95.0, rng);
    EXPECT_NEAR(s / 10000.0, 0.05, 0.01);
}

TEST(PropertyNeighbourhood, JointRetentionBoundedBySingle) {
    std::mt19937_64 rng(10);
    Matrix valid(60, 3);
    for (std::size_t i = 0; i < valid.rows(); ++i) {
        const auto v = random_vector(rng, 3, -3, 3);
        std::copy(v.begin(), v.end(), valid.row(i).begin());
    }
    const auto index = kmedoids_fit(valid, 8, 11);
    const auto layout = FeatureLayout::all_numeric(3);
    std::vector<LabelFn> models{[](ConstRow x) { return x[0] > 0.1 ? 1 : 0; },
                                [](ConstRow x) { return x[0] + x[1] > 0 ? 1 : 0; },
                                [](ConstRow x) { return x[2] * x[0] > 0.2 ? 1 : 0; }};
    PerturbTheta theta;
    theta.alpha = 0.3;
    theta.alpha_cat = 0.0;
    theta.seed = 12;
    for (std::size_t p = 0; p < valid.rows(); ++p) {
        const auto draw = draw_candidates(valid.row(p), static_cast<long long>(p), index, layout, theta, models);
        const double joint = filter_candidates(draw, FilterMode::joint()).retention;
        for (int l = 0; l < 3; ++l) EXPECT_LE(joint, filter_candidates(draw, FilterMode::single(l)).retention);
    }
}
