#include <algorithm>
#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "xagg/neighbourhood.hpp"

using namespace xagg;

namespace {

Matrix two_blobs(std::size_t per_blob, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 0.3);
    Matrix x(2 * per_blob, 2);
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const double c = i < per_blob ? -5.0 : 5.0;
        x(i, 0) = c + nd(gen);
        x(i, 1) = c + nd(gen);
    }
    return x;
}

Matrix random_points(std::size_t n, std::size_t m, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd;
    Matrix x(n, m);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) x(i, j) = nd(gen);
    return x;
}

}  // namespace

TEST(Sampler, GammaAndBetaMoments) {
    Rng rng = make_rng(3);
    for (double shape : {0.5, 1.0, 5.0, 95.0}) {
        double s = 0;
        for (int i = 0; i < 20000; ++i) s += sample_gamma(shape, rng);
        EXPECT_NEAR(s / 20000.0, shape, 0.05 * shape + 0.02);
    }
    double s = 0, s2 = 0;
    for (int i = 0; i < 20000; ++i) {
        const double b = sample_beta(2.5, 97.5, rng);
        ASSERT_GT(b, 0.0);
        ASSERT_LT(b, 1.0);
        s += b;
        s2 += b * b;
    }
    const double mean = s / 20000.0;
    EXPECT_NEAR(mean, 0.025, 0.002);
    // Beta variance ab / ((a+b)^2 (a+b+1))
    EXPECT_NEAR(s2 / 20000.0 - mean * mean, 2.5 * 97.5 / (1e4 * 101.0), 5e-5);
}

TEST(KMedoids, OneMedoidPerBlobAndOptimalCost) {
    const auto x = two_blobs(15, 2);
    const auto idx = kmedoids_fit(x, 2, 7, 5);
    ASSERT_EQ(idx.size(), 2u);
    std::set<bool> sides;
    for (auto r : idx.medoid_rows) sides.insert(r < 15);
    EXPECT_EQ(sides.size(), 2u);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t a = 0; a < x.rows(); ++a)
        for (std::size_t b = a + 1; b < x.rows(); ++b) best = std::min(best, medoid_cost(x, {a, b}));
    EXPECT_NEAR(medoid_cost(x, idx.medoid_rows), best, 1e-12);
}

TEST(KMedoids, TablesAndAssignments) {
    const auto x = random_points(40, 3, 4);
    const auto idx = kmedoids_fit(x, 8, 1, 5);
    ASSERT_EQ(idx.size(), 8u);
    for (std::size_t c = 0; c < idx.size(); ++c) {
        ASSERT_EQ(idx.nn[c].size(), 5u);
        EXPECT_EQ(std::count(idx.nn[c].begin(), idx.nn[c].end(), c), 0);
        for (std::size_t k = 1; k < idx.nn[c].size(); ++k)
            EXPECT_LE(squared_distance(idx.medoids.row(c), idx.medoids.row(idx.nn[c][k - 1])),
                      squared_distance(idx.medoids.row(c), idx.medoids.row(idx.nn[c][k])));
        for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(idx.medoids(c, j), x(idx.medoid_rows[c], j));
    }
    for (std::size_t i = 0; i < x.rows(); ++i) {
        const auto own = idx.assignment[i];
        for (std::size_t c = 0; c < idx.size(); ++c)
            EXPECT_LE(euclidean_distance(x.row(i), idx.medoids.row(own)), euclidean_distance(x.row(i), idx.medoids.row(c)));
        EXPECT_EQ(idx.assign(x.row(i)), own);
    }
    const auto again = kmedoids_fit(x, 8, 1, 5);
    EXPECT_EQ(again.medoid_rows, idx.medoid_rows);
}

TEST(KMedoids, EveryPointItsOwnMedoid) {
    const auto x = random_points(7, 2, 5);
    const auto idx = kmedoids_fit(x, 7, 3, 5);
    std::vector<std::size_t> rows = idx.medoid_rows;
    std::sort(rows.begin(), rows.end());
    EXPECT_EQ(rows, (std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6}));
    for (const auto& t : idx.nn) EXPECT_EQ(t.size(), 5u);
    const auto small = kmedoids_fit(x, 3, 3, 5);
    for (const auto& t : small.nn) EXPECT_EQ(t.size(), 2u);
    EXPECT_THROW(kmedoids_fit(x, 1, 3), InputError);
    EXPECT_THROW(kmedoids_fit(x, 8, 3), InputError);
}

TEST(Perturb, ConvexNumericAndWholesaleCategorical) {
    // layout: two numeric columns then a 3-wide one-hot group
    Matrix valid(30, 5);
    std::mt19937_64 gen(6);
    std::normal_distribution<double> nd;
    for (std::size_t i = 0; i < 30; ++i) {
        valid(i, 0) = nd(gen);
        valid(i, 1) = nd(gen);
        valid(i, 2 + i % 3) = 1.0;
    }
    FeatureLayout layout;
    layout.width = 5;
    layout.numeric = {0, 1};
    layout.groups = {{"c", 2, 3}};
    const auto idx = kmedoids_fit(valid, 6, 2, 5);
    PerturbTheta theta;
    theta.alpha = 0.3;
    theta.alpha_cat = 0.5;
    Rng rng = make_rng(8);
    std::size_t swapped = 0;
    for (int t = 0; t < 500; ++t) {
        const auto x = valid.row(static_cast<std::size_t>(t) % 30);
        const auto p = perturb_point(x, idx, layout, theta, rng);
        double group = 0;
        for (std::size_t j = 2; j < 5; ++j) {
            EXPECT_TRUE(p[j] == 0.0 || p[j] == 1.0);
            group += p[j];
        }
        EXPECT_EQ(group, 1.0);
        swapped += !std::equal(x.begin() + 2, x.end(), p.begin() + 2);
        // the numeric part lies on a segment from x toward one medoid, shared weight
        bool on_segment = false;
        for (std::size_t c = 0; c < idx.size(); ++c) {
            const auto m = idx.medoids.row(c);
            const double d0 = m[0] - x[0], d1 = m[1] - x[1];
            const double w0 = d0 != 0 ? (p[0] - x[0]) / d0 : 0, w1 = d1 != 0 ? (p[1] - x[1]) / d1 : 0;
            if (std::abs(w0 - w1) < 1e-9 && w0 >= 0 && w0 <= 1) on_segment = true;
        }
        EXPECT_TRUE(on_segment);
    }
    EXPECT_GT(swapped, 0u);
    theta.alpha_cat = 0.0;
    for (int t = 0; t < 100; ++t) {
        const auto x = valid.row(static_cast<std::size_t>(t) % 30);
        const auto p = perturb_point(x, idx, layout, theta, rng);
        EXPECT_TRUE(std::equal(x.begin() + 2, x.end(), p.begin() + 2));
    }
}

TEST(Neighbourhood, ConstantModelKeepsEverything) {
    const auto valid = random_points(25, 2, 9);
    const auto idx = kmedoids_fit(valid, 5, 1);
    const auto layout = FeatureLayout::all_numeric(2);
    PerturbTheta theta;
    theta.seed = 3;
    const std::vector<LabelFn> models{[](ConstRow) { return 1; }};
    const auto nb = generate_neighbourhood(valid.row(0), 0, idx, layout, theta, models, FilterMode::single(0));
    EXPECT_EQ(nb.retention, 1.0);
    EXPECT_EQ(nb.size(), 100u);
    const auto tuned = tune_theta(valid, idx, layout, models, 0.95, theta);
    EXPECT_EQ(tuned.theta.alpha, theta.alpha);
    EXPECT_EQ(tuned.halvings, 0u);
}

TEST(Neighbourhood, JointSurvivorsSatisfyEveryModel) {
    const auto valid = random_points(40, 2, 10);
    const auto idx = kmedoids_fit(valid, 6, 1);
    const auto layout = FeatureLayout::all_numeric(2);
    PerturbTheta theta;
    theta.alpha = 0.4;
    theta.seed = 5;
    const std::vector<LabelFn> models{[](ConstRow x) { return x[0] > 0 ? 1 : 0; },
                                      [](ConstRow x) { return x[1] > 0.3 ? 1 : 0; },
                                      [](ConstRow x) { return x[0] + x[1] > 0 ? 1 : 0; }};
    for (std::size_t p = 0; p < valid.rows(); ++p) {
        const auto nb = generate_neighbourhood(valid.row(p), static_cast<long long>(p), idx, layout, theta, models,
                                               FilterMode::joint());
        for (std::size_t s = 0; s < nb.size(); ++s)
            for (std::size_t l = 0; l < 3; ++l) EXPECT_EQ(models[l](nb.survivors.row(s)), models[l](valid.row(p)));
        EXPECT_EQ(nb.retention, static_cast<double>(nb.size()) / 100.0);
    }
}

TEST(Neighbourhood, StreamsDependOnSeedAndPointOnly) {
    const auto valid = random_points(30, 3, 11);
    const auto idx = kmedoids_fit(valid, 5, 1);
    const auto layout = FeatureLayout::all_numeric(3);
    PerturbTheta theta;
    theta.seed = 77;
    const std::vector<LabelFn> models{[](ConstRow x) { return x[2] > 0 ? 1 : 0; }};
    const auto a = draw_candidates(valid.row(4), 4, idx, layout, theta, models);
    const auto b = draw_candidates(valid.row(4), 4, idx, layout, theta, models);
    const auto c = draw_candidates(valid.row(4), 5, idx, layout, theta, models);
    EXPECT_EQ(a.candidates.data(), b.candidates.data());
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.candidates.data(), c.candidates.data());
}

TEST(Tuning, SensitiveModelForcesSmallerAlpha) {
    // boundary hugging every origin: x[0] just above a threshold placed at the origin
    const auto valid = random_points(40, 2, 12);
    const auto idx = kmedoids_fit(valid, 6, 1);
    const auto layout = FeatureLayout::all_numeric(2);
    Matrix sample(1, 2);
    sample(0, 0) = valid(0, 0);
    sample(0, 1) = valid(0, 1);
    const double edge = valid(0, 0);
    const std::vector<LabelFn> models{[edge](ConstRow x) { return std::abs(x[0] - edge) < 0.02 ? 1 : 0; }};
    PerturbTheta theta;
    theta.seed = 2;
    const auto r = tune_theta(sample, idx, layout, models, 0.95, theta);
    EXPECT_LT(r.theta.alpha, 0.05);
    EXPECT_GE(r.theta.alpha, kThetaFloor);
    if (r.reached) {
        EXPECT_GE(r.mean_retention[0], 0.95);
    }
}

TEST(Tuning, UnreachableTargetStopsAtFloor) {
    const auto valid = random_points(30, 2, 13);
    const auto idx = kmedoids_fit(valid, 5, 1);
    const auto layout = FeatureLayout::all_numeric(2);
    // label flips with any movement at all
    const Vector origin(valid.row(0).begin(), valid.row(0).end());
    const std::vector<LabelFn> models{[origin](ConstRow x) { return x[0] == origin[0] ? 1 : 0; }};
    Matrix sample = valid.select_rows(std::vector<std::size_t>{0});
    int warnings = 0;
    auto saved = warning_handler();
    warning_handler() = [&](const std::string&) { ++warnings; };
    PerturbTheta theta;
    const auto r = tune_theta(sample, idx, layout, models, 0.95, theta);
    warning_handler() = saved;
    EXPECT_FALSE(r.reached);
    EXPECT_EQ(r.theta.alpha, kThetaFloor);
    EXPECT_EQ(r.theta.alpha_cat, kThetaFloor);
    EXPECT_EQ(warnings, 1);
    EXPECT_THROW(tune_theta(sample, idx, layout, models, 1.5, theta), InputError);
}
