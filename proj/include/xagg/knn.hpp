#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/prediction.hpp"

namespace xagg {

/// k-nearest-neighbour classifier over the full preprocessed vector (Euclidean).
///
/// Neighbours are ranked by (distance, label, feature values lexicographically), which makes
/// every query independent of the training-row order. Vote ties go to the class whose members
/// among the k have the smaller mean distance, then to class 0.
class KnnModel {
public:
    KnnModel() = default;
    KnnModel(Matrix train, std::vector<int> labels, std::size_t k) : x_(std::move(train)), y_(std::move(labels)), k_(k) {
        if (x_.rows() != y_.size()) throw InputError("knn: label count does not match rows");
        if (k_ < 1 || k_ > x_.rows()) throw InputError("knn: k must be in [1, train size]");
        for (int v : y_) ++class_size_[v ? 1 : 0];
    }

    std::size_t k() const noexcept { return k_; }
    std::size_t features() const noexcept { return x_.cols(); }
    const Matrix& train() const noexcept { return x_; }
    const std::vector<int>& labels() const noexcept { return y_; }
    std::size_t class_size(int c) const { return class_size_[c ? 1 : 0]; }

    struct Neighbour {
        std::size_t index;
        double distance;
    };

    /// The `count` nearest training points, optionally restricted to one class, ascending.
    std::vector<Neighbour> nearest(ConstRow x, std::size_t count, int only_class = -1) const {
        require_dim(x.size(), x_.cols(), "knn query");
        std::vector<Neighbour> all;
        all.reserve(x_.rows());
        for (std::size_t i = 0; i < x_.rows(); ++i) {
            if (only_class >= 0 && y_[i] != only_class) continue;
            all.push_back({i, squared_distance(x, x_.row(i))});
        }
        count = std::min(count, all.size());
        auto before = [this](const Neighbour& a, const Neighbour& b) {
            if (a.distance != b.distance) return a.distance < b.distance;
            if (y_[a.index] != y_[b.index]) return y_[a.index] < y_[b.index];
            auto ra = x_.row(a.index), rb = x_.row(b.index);
            return std::lexicographical_compare(ra.begin(), ra.end(), rb.begin(), rb.end());
        };
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count), all.end(), before);
        all.resize(count);
        for (auto& n : all) n.distance = std::sqrt(n.distance);
        return all;
    }

    Prediction predict(ConstRow x) const {
        const auto nn = nearest(x, k_);
        std::array<std::size_t, 2> votes{0, 0};
        std::array<double, 2> dist_sum{0, 0};
        for (const auto& n : nn) {
            const int c = y_[n.index];
            ++votes[c];
            dist_sum[c] += n.distance;
        }
        int label;
        if (votes[0] != votes[1]) {
            label = votes[1] > votes[0] ? 1 : 0;
        } else {
            // equal counts, so comparing sums compares means
            label = dist_sum[1] < dist_sum[0] ? 1 : 0;
        }
        const double kk = static_cast<double>(nn.size());
        return Prediction{label, {static_cast<double>(votes[0]) / kk, static_cast<double>(votes[1]) / kk}};
    }

    /// The k_e training points of class c nearest to x. Shrinks with a warning when the class is smaller.
    std::vector<Neighbour> class_neighbours(ConstRow x, std::size_t k_e, int c) const {
        if (class_size(c) < k_e)
            warn("knn: class " + std::to_string(c) + " has only " + std::to_string(class_size(c)) +
                 " points, fewer than k_e = " + std::to_string(k_e));
        return nearest(x, k_e, c);
    }

private:
    Matrix x_;
    std::vector<int> y_;
    std::size_t k_ = 1;
    std::array<std::size_t, 2> class_size_{0, 0};
};

}  // namespace xagg
