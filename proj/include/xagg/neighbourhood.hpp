#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <set>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/data_pipeline.hpp"

namespace xagg {

// ---------------------------------------------------------------------------
// Sampling. Implemented on raw engine output so draws are identical across standard libraries.

inline double standard_normal(Rng& rng) {
    double u1 = uniform01(rng);
    while (u1 <= 0.0) u1 = uniform01(rng);
    const double u2 = uniform01(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

/// Marsaglia-Tsang; shapes below one use the U^(1/a) boost.
inline double sample_gamma(double shape, Rng& rng) {
    if (shape <= 0.0) throw InputError("gamma shape must be positive");
    if (shape < 1.0) {
        double u = uniform01(rng);
        while (u <= 0.0) u = uniform01(rng);
        return sample_gamma(shape + 1.0, rng) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double z, v;
        do {
            z = standard_normal(rng);
            v = 1.0 + c * z;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01(rng);
        if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
        if (u > 0.0 && std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) return d * v;
    }
}

inline double sample_beta(double a, double b, Rng& rng) {
    const double x = sample_gamma(a, rng);
    const double y = sample_gamma(b, rng);
    return x / (x + y);
}

// ---------------------------------------------------------------------------
// k-medoids

struct MedoidIndex {
    Matrix medoids;                             // one row per medoid, each an actual validation point
    std::vector<std::size_t> medoid_rows;       // their rows in the fitted matrix
    std::vector<std::size_t> assignment;        // fitted row -> medoid position
    std::vector<std::vector<std::size_t>> nn;   // per medoid, nearest fellow medoids ascending
    std::size_t k_m = 5;
    double total_deviation = 0.0;

    std::size_t size() const noexcept { return medoids.rows(); }

    /// Nearest medoid; ties go to the lower position.
    std::size_t assign(ConstRow x) const {
        std::size_t best = 0;
        double bd = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < medoids.rows(); ++c) {
            const double d = squared_distance(x, medoids.row(c));
            if (d < bd) {
                bd = d;
                best = c;
            }
        }
        return best;
    }
};

namespace detail {

struct NearestTwo {
    std::vector<std::size_t> nearest;
    std::vector<double> d1, d2;
};

inline NearestTwo nearest_two(const Matrix& x, const std::vector<std::size_t>& medoids) {
    const std::size_t n = x.rows();
    NearestTwo r{std::vector<std::size_t>(n), std::vector<double>(n), std::vector<double>(n)};
    for (std::size_t o = 0; o < n; ++o) {
        double b1 = std::numeric_limits<double>::infinity(), b2 = b1;
        std::size_t i1 = 0;
        for (std::size_t i = 0; i < medoids.size(); ++i) {
            const double d = euclidean_distance(x.row(o), x.row(medoids[i]));
            if (d < b1) {
                b2 = b1;
                b1 = d;
                i1 = i;
            } else if (d < b2) {
                b2 = d;
            }
        }
        r.nearest[o] = i1;
        r.d1[o] = b1;
        r.d2[o] = medoids.size() > 1 ? b2 : b1;
    }
    return r;
}

}  // namespace detail

/// PAM-style k-medoids: random initial medoids, then eager swap passes (each non-medoid is
/// tried against all medoids at once using nearest/second-nearest distances) until a full
/// pass finds no improving swap or `max_passes` is reached.
inline MedoidIndex kmedoids_fit(const Matrix& x, std::size_t n_clusters, std::uint64_t seed, std::size_t k_m = 5,
                                std::size_t max_passes = 100) {
    const std::size_t n = x.rows();
    if (n_clusters < 2 || n_clusters > n) throw InputError("kmedoids: n_clusters must be in [2, n]");

    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    Rng rng = make_rng(seed, 0x3ed0);
    shuffle(perm, rng);
    std::vector<std::size_t> medoids(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(n_clusters));
    std::vector<char> is_medoid(n, 0);
    for (auto m : medoids) is_medoid[m] = 1;

    auto near = detail::nearest_two(x, medoids);
    std::vector<double> removal(n_clusters);
    auto update_removal = [&] {
        std::fill(removal.begin(), removal.end(), 0.0);
        for (std::size_t o = 0; o < n; ++o) removal[near.nearest[o]] += near.d2[o] - near.d1[o];
    };
    update_removal();

    // Candidates are visited cyclically; stop after n consecutive visits without a swap.
    std::vector<double> delta(n_clusters);
    std::size_t since_swap = 0;
    for (std::size_t visit = 0; visit < max_passes * n && since_swap < n; ++visit, ++since_swap) {
        const std::size_t cand = perm[visit % n];
        if (is_medoid[cand]) continue;
        delta = removal;
        double acc = 0.0;
        for (std::size_t o = 0; o < n; ++o) {
            const double d = euclidean_distance(x.row(o), x.row(cand));
            if (d < near.d1[o]) {
                acc += d - near.d1[o];
                delta[near.nearest[o]] += near.d1[o] - near.d2[o];
            } else if (d < near.d2[o]) {
                delta[near.nearest[o]] += d - near.d2[o];
            }
        }
        const auto best = static_cast<std::size_t>(std::min_element(delta.begin(), delta.end()) - delta.begin());
        if (delta[best] + acc < -1e-10) {
            is_medoid[medoids[best]] = 0;
            is_medoid[cand] = 1;
            medoids[best] = cand;
            near = detail::nearest_two(x, medoids);
            update_removal();
            since_swap = 0;
        }
    }

    MedoidIndex idx;
    idx.k_m = k_m;
    idx.medoid_rows = medoids;
    idx.medoids = x.select_rows(medoids);
    idx.assignment = near.nearest;
    idx.total_deviation = std::accumulate(near.d1.begin(), near.d1.end(), 0.0);

    std::set<std::vector<double>> distinct;
    for (std::size_t c = 0; c < idx.size(); ++c) {
        auto r = idx.medoids.row(c);
        distinct.insert(std::vector<double>(r.begin(), r.end()));
    }
    if (distinct.size() < idx.size()) warn("kmedoids: duplicate points produced identical medoids");

    const std::size_t table = std::min(k_m, idx.size() - 1);
    idx.nn.resize(idx.size());
    for (std::size_t c = 0; c < idx.size(); ++c) {
        std::vector<std::pair<double, std::size_t>> others;
        for (std::size_t o = 0; o < idx.size(); ++o)
            if (o != c) others.push_back({squared_distance(idx.medoids.row(c), idx.medoids.row(o)), o});
        std::sort(others.begin(), others.end());
        for (std::size_t i = 0; i < table; ++i) idx.nn[c].push_back(others[i].second);
    }
    return idx;
}

/// Sum of distances from every row to its nearest medoid among `medoids`.
inline double medoid_cost(const Matrix& x, const std::vector<std::size_t>& medoids) {
    double total = 0.0;
    for (std::size_t o = 0; o < x.rows(); ++o) {
        double best = std::numeric_limits<double>::infinity();
        for (auto m : medoids) best = std::min(best, euclidean_distance(x.row(o), x.row(m)));
        total += best;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Perturbation

struct PerturbTheta {
    std::size_t k_m = 5;
    double alpha = 0.05;
    double alpha_cat = 0.05;
    std::size_t candidates = 100;
    std::uint64_t seed = 0;

    void validate() const {
        if (!(alpha > 0.0 && alpha < 1.0)) throw InputError("theta: alpha must lie in (0, 1)");
        if (!(alpha_cat >= 0.0 && alpha_cat <= 1.0)) throw InputError("theta: alpha_cat must lie in [0, 1]");
    }
};

/// One candidate: interpolate numeric columns toward a random nearby medoid with a single
/// Beta(100a, 100(1-a)) weight; swap each categorical group wholesale with probability alpha_cat.
inline Vector perturb_point(ConstRow x, const MedoidIndex& index, const FeatureLayout& layout,
                            const PerturbTheta& theta, Rng& rng) {
    require_dim(x.size(), index.medoids.cols(), "perturb_point");
    Vector out(x.begin(), x.end());
    const std::size_t own = index.assign(x);
    const auto& table = index.nn[own];
    const std::size_t usable = std::min(table.size(), theta.k_m);
    if (usable == 0) return out;
    const ConstRow target = index.medoids.row(table[uniform_index(rng, usable)]);
    const double w = sample_beta(theta.alpha * 100.0, (1.0 - theta.alpha) * 100.0, rng);
    for (auto j : layout.numeric) out[j] = (1.0 - w) * x[j] + w * target[j];
    for (const auto& g : layout.groups) {
        if (uniform01(rng) < theta.alpha_cat)
            for (std::size_t j = g.offset; j < g.offset + g.width; ++j) out[j] = target[j];
    }
    return out;
}

using LabelFn = std::function<int(ConstRow)>;

/// Candidates for one point with every model's label on the origin and on each candidate.
struct CandidateDraw {
    long long origin = -1;
    Vector x;
    Matrix candidates;
    std::vector<int> origin_labels;                // per model
    std::vector<std::vector<int>> labels;          // [candidate][model]
};

/// Per-point stream derived from (seed, point id), so draws do not depend on evaluation order.
inline CandidateDraw draw_candidates(ConstRow x, long long point_id, const MedoidIndex& index,
                                     const FeatureLayout& layout, const PerturbTheta& theta,
                                     const std::vector<LabelFn>& models) {
    theta.validate();
    CandidateDraw d;
    d.origin = point_id;
    d.x.assign(x.begin(), x.end());
    Rng rng = make_rng(theta.seed, static_cast<std::uint64_t>(point_id));
    d.candidates = Matrix(theta.candidates, x.size());
    for (std::size_t i = 0; i < theta.candidates; ++i) {
        const auto v = perturb_point(x, index, layout, theta, rng);
        std::copy(v.begin(), v.end(), d.candidates.row(i).begin());
    }
    for (const auto& f : models) d.origin_labels.push_back(f(x));
    d.labels.resize(theta.candidates);
    for (std::size_t i = 0; i < theta.candidates; ++i)
        for (const auto& f : models) d.labels[i].push_back(f(d.candidates.row(i)));
    return d;
}

/// Filtering mode: keep candidates whose label matches the origin for one model, or for all.
struct FilterMode {
    int model = -1;  // -1: joint
    static FilterMode single(int l) { return FilterMode{l}; }
    static FilterMode joint() { return FilterMode{-1}; }
    bool is_joint() const { return model < 0; }
};

struct Neighbourhood {
    long long origin = -1;
    FilterMode mode;
    Matrix survivors;
    std::vector<std::size_t> candidate_ids;
    std::vector<int> origin_labels;
    std::vector<std::vector<int>> survivor_labels;
    double retention = 0.0;

    bool empty() const { return survivors.rows() == 0; }
    std::size_t size() const { return survivors.rows(); }
};

inline bool keeps(const CandidateDraw& d, std::size_t i, FilterMode mode) {
    if (!mode.is_joint()) return d.labels[i][static_cast<std::size_t>(mode.model)] == d.origin_labels[mode.model];
    for (std::size_t l = 0; l < d.origin_labels.size(); ++l)
        if (d.labels[i][l] != d.origin_labels[l]) return false;
    return true;
}

inline Neighbourhood filter_candidates(const CandidateDraw& d, FilterMode mode) {
    Neighbourhood nb;
    nb.origin = d.origin;
    nb.mode = mode;
    nb.origin_labels = d.origin_labels;
    nb.survivors = Matrix(0, d.x.size());
    for (std::size_t i = 0; i < d.candidates.rows(); ++i) {
        if (!keeps(d, i, mode)) continue;
        nb.survivors.append_row(d.candidates.row(i));
        nb.candidate_ids.push_back(i);
        nb.survivor_labels.push_back(d.labels[i]);
    }
    nb.retention = d.candidates.rows() ? static_cast<double>(nb.size()) / static_cast<double>(d.candidates.rows()) : 0.0;
    return nb;
}

inline Neighbourhood generate_neighbourhood(ConstRow x, long long point_id, const MedoidIndex& index,
                                            const FeatureLayout& layout, const PerturbTheta& theta,
                                            const std::vector<LabelFn>& models, FilterMode mode) {
    return filter_candidates(draw_candidates(x, point_id, index, layout, theta, models), mode);
}

struct TuneResult {
    PerturbTheta theta;
    std::vector<double> mean_retention;  // per model, at the returned theta
    std::size_t halvings = 0;
    bool reached = true;
};

inline constexpr double kThetaFloor = 0.005;

/// Halves alpha and alpha_cat (floor 0.005) until every model's mean single-model retention on
/// the sample reaches the target. Candidate streams use `ids` (one per row) when given,
/// otherwise the row index.
inline TuneResult tune_theta(const Matrix& sample, const MedoidIndex& index, const FeatureLayout& layout,
                             const std::vector<LabelFn>& models, double target, PerturbTheta start,
                             unsigned threads = 1, const std::vector<long long>* ids = nullptr) {
    if (!(target > 0.0 && target < 1.0)) throw InputError("tune_theta: target must lie in (0, 1)");
    if (ids && ids->size() != sample.rows()) throw InputError("tune_theta: one id per sample row required");
    TuneResult r;
    r.theta = start;
    for (;;) {
        std::vector<std::vector<double>> per_point(sample.rows());
        parallel_for(sample.rows(), threads, [&](std::size_t i) {
            const auto d = draw_candidates(sample.row(i), ids ? (*ids)[i] : static_cast<long long>(i), index, layout,
                                           r.theta, models);
            for (std::size_t l = 0; l < models.size(); ++l)
                per_point[i].push_back(filter_candidates(d, FilterMode::single(static_cast<int>(l))).retention);
        });
        r.mean_retention.assign(models.size(), 0.0);
        for (const auto& p : per_point)
            for (std::size_t l = 0; l < p.size(); ++l) r.mean_retention[l] += p[l];
        for (auto& v : r.mean_retention) v /= static_cast<double>(std::max<std::size_t>(1, sample.rows()));
        const bool ok = std::all_of(r.mean_retention.begin(), r.mean_retention.end(),
                                    [&](double v) { return v >= target; });
        if (ok) return r;
        if (r.theta.alpha <= kThetaFloor && r.theta.alpha_cat <= kThetaFloor) {
            warn("tune_theta: retention target unreachable at the alpha floor");
            r.reached = false;
            return r;
        }
        r.theta.alpha = std::max(kThetaFloor, r.theta.alpha / 2.0);
        r.theta.alpha_cat = r.theta.alpha_cat > 0.0 ? std::max(kThetaFloor, r.theta.alpha_cat / 2.0) : 0.0;
        ++r.halvings;
    }
}

}  // namespace xagg
