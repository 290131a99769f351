#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "xagg/common.hpp"
#include "xagg/prediction.hpp"

namespace xagg {

enum class Activation { relu, identity };

inline const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

inline Activation activation_from_string(const std::string& s) {
    if (s == "relu") return Activation::relu;
    if (s == "identity") return Activation::identity;
    throw InputError("unknown activation '" + s + "'");
}

/// Fully connected layer: out = act(W in + b), W stored out x in.
struct DenseLayer {
    Matrix weights;
    Vector bias;
    Activation activation = Activation::relu;

    std::size_t inputs() const noexcept { return weights.cols(); }
    std::size_t outputs() const noexcept { return weights.rows(); }
};

struct MlpParams {
    std::vector<std::size_t> hidden;  // empty: one layer of max(2m, 16)
    std::size_t epochs = 100;
    double learning_rate = 1e-3;
    std::size_t batch_size = 32;
    double weight_decay = 0.0;
};

/// Per-layer values from one forward pass. pre[l] is W h + b of layer l; post[l] its activation.
/// The final layer's pre values are the logits.
struct ForwardTrace {
    std::vector<Vector> pre;
    std::vector<Vector> post;
    Vector input;

    const Vector& logits() const { return pre.back(); }
};

inline std::array<double, 2> softmax2(const Vector& logits) {
    const double mx = std::max(logits[0], logits[1]);
    const double e0 = std::exp(logits[0] - mx), e1 = std::exp(logits[1] - mx);
    const double s = e0 + e1;
    return {e0 / s, e1 / s};
}

/// Feed-forward network with ReLU (or identity) hidden layers and a 2-way softmax head.
class MlpModel {
public:
    MlpModel() = default;
    explicit MlpModel(std::vector<DenseLayer> layers, std::uint64_t seed = 0) : layers_(std::move(layers)), seed_(seed) {
        if (layers_.empty()) throw InputError("mlp: no layers");
        for (std::size_t l = 1; l < layers_.size(); ++l)
            if (layers_[l].inputs() != layers_[l - 1].outputs()) throw InputError("mlp: layer widths do not chain");
        if (layers_.back().outputs() != 2) throw InputError("mlp: output layer must have width 2");
    }

    /// Random initialization for the given widths (first = m, last = 2). Hidden layers use ReLU.
    static MlpModel initialize(const std::vector<std::size_t>& widths, std::uint64_t seed) {
        if (widths.size() < 2 || widths.back() != 2) throw InputError("mlp: widths must start at m and end at 2");
        Rng rng = make_rng(seed, 0x1417);
        std::vector<DenseLayer> layers;
        for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
            const bool last = l + 2 == widths.size();
            DenseLayer layer{Matrix(widths[l + 1], widths[l]), Vector(widths[l + 1], 0.0),
                             last ? Activation::identity : Activation::relu};
            const double fan_in = static_cast<double>(widths[l]);
            const double limit = last ? std::sqrt(6.0 / (fan_in + static_cast<double>(widths[l + 1])))
                                      : std::sqrt(6.0 / fan_in);
            for (std::size_t r = 0; r < layer.weights.rows(); ++r)
                for (std::size_t c = 0; c < layer.weights.cols(); ++c)
                    layer.weights(r, c) = (2.0 * uniform01(rng) - 1.0) * limit;
            layers.push_back(std::move(layer));
        }
        return MlpModel(std::move(layers), seed);
    }

    const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
    std::size_t features() const noexcept { return layers_.front().inputs(); }
    std::uint64_t seed() const noexcept { return seed_; }

    std::vector<std::size_t> widths() const {
        std::vector<std::size_t> w{layers_.front().inputs()};
        for (const auto& l : layers_) w.push_back(l.outputs());
        return w;
    }

    ForwardTrace forward(ConstRow x) const {
        require_dim(x.size(), features(), "mlp input");
        ForwardTrace t;
        t.input.assign(x.begin(), x.end());
        const Vector* in = &t.input;
        for (const auto& layer : layers_) {
            Vector z(layer.outputs());
            for (std::size_t r = 0; r < z.size(); ++r) {
                double s = layer.bias[r];
                auto w = layer.weights.row(r);
                for (std::size_t c = 0; c < w.size(); ++c) s += w[c] * (*in)[c];
                z[r] = s;
            }
            Vector h = z;
            if (layer.activation == Activation::relu)
                for (auto& v : h) v = std::max(0.0, v);
            t.pre.push_back(std::move(z));
            t.post.push_back(std::move(h));
            in = &t.post.back();
        }
        return t;
    }

    Vector logits(ConstRow x) const { return forward(x).logits(); }

    /// Softmax probabilities; equal logits predict class 0.
    Prediction predict(ConstRow x) const {
        Prediction p;
        p.proba = softmax2(logits(x));
        p.label = argmax_label(p.proba);
        return p;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (const auto& l : layers_) n += l.weights.rows() * l.weights.cols() + l.bias.size();
        return n;
    }

    /// Flat parameter vector: per layer, weights row-major then biases.
    Vector parameters() const {
        Vector p;
        p.reserve(parameter_count());
        for (const auto& l : layers_) {
            p.insert(p.end(), l.weights.data().begin(), l.weights.data().end());
            p.insert(p.end(), l.bias.begin(), l.bias.end());
        }
        return p;
    }

    void set_parameters(const Vector& p) {
        if (p.size() != parameter_count()) throw InputError("mlp: parameter vector size mismatch");
        std::size_t k = 0;
        for (auto& l : layers_) {
            for (std::size_t r = 0; r < l.weights.rows(); ++r)
                for (std::size_t c = 0; c < l.weights.cols(); ++c) l.weights(r, c) = p[k++];
            for (auto& b : l.bias) b = p[k++];
        }
    }

    /// Mean cross-entropy over the rows and its gradient in flat-parameter order.
    double loss_and_gradient(const Matrix& x, const std::vector<int>& y, std::span<const std::size_t> rows,
                             Vector& grad) const {
        grad.assign(parameter_count(), 0.0);
        double loss = 0.0;
        std::vector<std::size_t> offsets;
        {
            std::size_t k = 0;
            for (const auto& l : layers_) {
                offsets.push_back(k);
                k += l.weights.rows() * l.weights.cols() + l.bias.size();
            }
        }
        for (auto r : rows) {
            const auto t = forward(x.row(r));
            const auto p = softmax2(t.logits());
            loss -= std::log(std::max(p[static_cast<std::size_t>(y[r])], 1e-300));
            Vector delta{p[0] - (y[r] == 0 ? 1.0 : 0.0), p[1] - (y[r] == 1 ? 1.0 : 0.0)};
            for (std::size_t li = layers_.size(); li-- > 0;) {
                const auto& layer = layers_[li];
                if (layer.activation == Activation::relu)
                    for (std::size_t o = 0; o < delta.size(); ++o)
                        if (t.pre[li][o] <= 0.0) delta[o] = 0.0;
                const Vector& in = li == 0 ? t.input : t.post[li - 1];
                const std::size_t base = offsets[li];
                const std::size_t nin = layer.inputs();
                for (std::size_t o = 0; o < layer.outputs(); ++o) {
                    for (std::size_t c = 0; c < nin; ++c) grad[base + o * nin + c] += delta[o] * in[c];
                    grad[base + layer.outputs() * nin + o] += delta[o];
                }
                if (li == 0) break;
                Vector next(nin, 0.0);
                for (std::size_t o = 0; o < layer.outputs(); ++o) {
                    auto w = layer.weights.row(o);
                    for (std::size_t c = 0; c < nin; ++c) next[c] += w[c] * delta[o];
                }
                delta = std::move(next);
            }
        }
        const double n = static_cast<double>(rows.size());
        for (auto& g : grad) g /= n;
        return loss / n;
    }

    /// Minibatch Adam on cross-entropy. Throws RuntimeFailure if the loss stops being finite.
    static MlpModel fit(const Matrix& x, const std::vector<int>& y, const MlpParams& params, std::uint64_t seed) {
        if (x.rows() == 0 || x.rows() != y.size()) throw InputError("mlp: empty or inconsistent training data");
        std::vector<std::size_t> widths{x.cols()};
        if (params.hidden.empty())
            widths.push_back(std::max<std::size_t>(2 * x.cols(), 16));
        else
            widths.insert(widths.end(), params.hidden.begin(), params.hidden.end());
        widths.push_back(2);
        MlpModel model = initialize(widths, seed);

        Rng rng = make_rng(seed, 0xba7c);
        std::vector<std::size_t> order(x.rows());
        std::iota(order.begin(), order.end(), std::size_t{0});
        Vector theta = model.parameters();
        Vector m1(theta.size(), 0.0), m2(theta.size(), 0.0), grad;
        const double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
        std::size_t step = 0;
        const std::size_t bs = std::max<std::size_t>(1, params.batch_size);
        for (std::size_t epoch = 0; epoch < params.epochs; ++epoch) {
            shuffle(order, rng);
            double epoch_loss = 0.0;
            for (std::size_t start = 0; start < order.size(); start += bs) {
                const std::size_t end = std::min(order.size(), start + bs);
                std::span<const std::size_t> batch(order.data() + start, end - start);
                const double loss = model.loss_and_gradient(x, y, batch, grad);
                if (!std::isfinite(loss))
                    throw RuntimeFailure("mlp training diverged (non-finite loss) at epoch " + std::to_string(epoch));
                epoch_loss += loss * static_cast<double>(batch.size());
                ++step;
                const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
                const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
                for (std::size_t i = 0; i < theta.size(); ++i) {
                    const double g = grad[i] + params.weight_decay * theta[i];
                    m1[i] = beta1 * m1[i] + (1 - beta1) * g;
                    m2[i] = beta2 * m2[i] + (1 - beta2) * g * g;
                    theta[i] -= params.learning_rate * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + eps);
                }
                model.set_parameters(theta);
            }
            if (!std::isfinite(epoch_loss))
                throw RuntimeFailure("mlp training diverged (non-finite loss) at epoch " + std::to_string(epoch));
        }
        return model;
    }

private:
    std::vector<DenseLayer> layers_;
    std::uint64_t seed_ = 0;
};

}  // namespace xagg
