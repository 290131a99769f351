#pragma once

#include <array>

namespace xagg {

/// Shared prediction contract of all three model families.
struct Prediction {
    int label = 0;
    std::array<double, 2> proba{0.5, 0.5};  // indexed by class

    double p_predicted() const { return proba[label]; }
    double p_other() const { return proba[1 - label]; }
};

/// argmax with ties resolved to class 0.
inline int argmax_label(const std::array<double, 2>& p) { return p[1] > p[0] ? 1 : 0; }

}  // namespace xagg
