#pragma once

// CombiNet: a small temporal regressor that maps the last four normalized
// boxes of a target to its next center.
//
// Centers enter relative to the newest box and the network regresses the
// displacement to the next center, so a target standing still is the zero
// function and the L2 penalty shrinks predictions toward "no motion" rather
// than toward the image origin.
//
// Layers 1-4 each run a 1-D convolution over the time axis and a fully
// connected unit on the same input, average the two outputs and apply a leaky
// rectifier. The 64-wide result is viewed as 4 (time) x 16 (channels) for the
// next layer. Layers 5 and 6 are fully connected; layer 6 is linear.
//
// Both units of a mixed layer are linear in the input, so the layer is
// evaluated as one matrix: 0.5 * (Toeplitz(kernel) + dense). Gradients of
// that matrix are folded back onto the kernel taps.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "mttsiam/error.hpp"
#include "mttsiam/geometry.hpp"
#include "mttsiam/text.hpp"

namespace mttsiam {

inline constexpr std::size_t kWindowFrames = 4;
inline constexpr std::size_t kBoxChannels = 4;
/// Size channels enter as (size - kSizeCenter).
inline constexpr double kSizeCenter = 0.5;
/// Center channels enter as (center - newest center) * kMotionScale.
inline constexpr double kMotionScale = 10.0;

/// Four normalized boxes, oldest first.
struct PathWindow {
    std::array<NormBBox, kWindowFrames> boxes{};
};

struct TrainSample {
    PathWindow input;
    /// Box of the frame following the window. Two-output models regress its center.
    NormBBox target;
};

struct CombiNetShape {
    std::size_t channels = 16;
    std::size_t kernel = 3;
    std::size_t dense_width = 64;
    std::size_t outputs = 2;
    double leak = 0.01;

    std::size_t input_width() const { return kWindowFrames * kBoxChannels; }
    std::size_t hidden_width() const { return kWindowFrames * channels; }

    void validate() const {
        if (channels == 0 || dense_width == 0) throw ModelError("combinet: zero layer width");
        if (kernel == 0 || kernel % 2 == 0) throw ModelError("combinet: kernel size must be odd");
        if (outputs != 2 && outputs != 4) throw ModelError("combinet: outputs must be 2 or 4");
        if (!(leak >= 0.0 && leak < 1.0)) throw ModelError("combinet: leak must lie in [0, 1)");
    }
    friend bool operator==(const CombiNetShape&, const CombiNetShape&) = default;
};

struct MixedLayer {
    std::size_t in_channels = 0;
    /// channels x (in_channels * kernel); column c * kernel + k is tap k of input channel c.
    Eigen::MatrixXd kernel;
    Eigen::VectorXd kernel_bias;
    /// hidden x (4 * in_channels)
    Eigen::MatrixXd dense;
    Eigen::VectorXd dense_bias;
};

struct DenseLayer {
    Eigen::MatrixXd weight;
    Eigen::VectorXd bias;
};

template <class T>
struct BasicParameterBlock {
    std::string name;
    std::size_t rows = 0;
    std::size_t cols = 0;
    /// Column-major storage of the rows x cols tensor.
    std::span<T> values;
};
using ParameterBlock = BasicParameterBlock<double>;
using ConstParameterBlock = BasicParameterBlock<const double>;

struct CombiNetModel {
    static constexpr std::size_t kMixedLayers = 4;

    CombiNetShape shape;
    std::array<MixedLayer, kMixedLayers> mixed;
    DenseLayer head;    // layer 5
    DenseLayer output;  // layer 6

    /// All parameters zero.
    explicit CombiNetModel(CombiNetShape s = {}) : shape(s) {
        shape.validate();
        const auto hidden = static_cast<Eigen::Index>(shape.hidden_width());
        for (std::size_t l = 0; l < kMixedLayers; ++l) {
            auto& m = mixed[l];
            m.in_channels = l == 0 ? kBoxChannels : shape.channels;
            const auto in_ch = static_cast<Eigen::Index>(m.in_channels);
            m.kernel = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shape.channels),
                                             in_ch * static_cast<Eigen::Index>(shape.kernel));
            m.kernel_bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.channels));
            m.dense = Eigen::MatrixXd::Zero(hidden, in_ch * static_cast<Eigen::Index>(kWindowFrames));
            m.dense_bias = Eigen::VectorXd::Zero(hidden);
        }
        const auto dw = static_cast<Eigen::Index>(shape.dense_width);
        head.weight = Eigen::MatrixXd::Zero(dw, hidden);
        head.bias = Eigen::VectorXd::Zero(dw);
        output.weight = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(shape.outputs), dw);
        output.bias = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(shape.outputs));
    }

    /// Seeded uniform fan-in initialization. Weight bounds keep activation
    /// variance roughly constant through the leaky layers; the two units of a
    /// mixed layer get an extra sqrt(2) because their outputs are averaged.
    /// The output layer starts small with zero bias (predicts "no motion").
    static CombiNetModel random(CombiNetShape s, std::uint64_t seed) {
        CombiNetModel m(s);
        std::mt19937_64 rng(seed);
        auto fill = [&](auto& x, double bound) {
            std::uniform_real_distribution<double> dist(-bound, bound);
            for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = dist(rng);
        };
        for (auto& layer : m.mixed) {
            const double conv_fan = static_cast<double>(layer.in_channels * s.kernel);
            const double dense_fan = static_cast<double>(layer.dense.cols());
            fill(layer.kernel, std::sqrt(12.0 / conv_fan));
            fill(layer.kernel_bias, 1.0 / std::sqrt(conv_fan));
            fill(layer.dense, std::sqrt(12.0 / dense_fan));
            fill(layer.dense_bias, 1.0 / std::sqrt(dense_fan));
        }
        const double head_fan = static_cast<double>(m.head.weight.cols());
        const double out_fan = static_cast<double>(m.output.weight.cols());
        fill(m.head.weight, std::sqrt(6.0 / head_fan));
        fill(m.head.bias, 1.0 / std::sqrt(head_fan));
        fill(m.output.weight, 0.1 * std::sqrt(3.0 / out_fan));
        m.output.bias.setZero();
        return m;
    }

    /// Every parameter tensor in a fixed order (the serialization order).
    std::vector<ParameterBlock> blocks() { return collect<double>(*this); }
    std::vector<ConstParameterBlock> blocks() const { return collect<const double>(*this); }

    std::vector<double> flatten() const {
        std::vector<double> flat;
        for (const auto& b : blocks())
            flat.insert(flat.end(), b.values.begin(), b.values.end());
        return flat;
    }

    void assign(std::span<const double> flat) {
        std::size_t pos = 0;
        for (auto& b : blocks()) {
            if (pos + b.values.size() > flat.size()) throw ModelError("assign: too few values");
            std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(pos), b.values.size(),
                        b.values.begin());
            pos += b.values.size();
        }
        if (pos != flat.size()) throw ModelError("assign: too many values");
    }

    std::size_t parameter_count() const { return flatten().size(); }

    bool finite() const {
        for (double v : flatten())
            if (!std::isfinite(v)) return false;
        return true;
    }

private:
    template <class T, class Self>
    static std::vector<BasicParameterBlock<T>> collect(Self& self) {
        std::vector<BasicParameterBlock<T>> out;
        auto add = [&](std::string name, auto& x) {
            out.push_back({std::move(name), static_cast<std::size_t>(x.rows()),
                           static_cast<std::size_t>(x.cols()),
                           std::span<T>(x.data(), static_cast<std::size_t>(x.size()))});
        };
        for (std::size_t l = 0; l < kMixedLayers; ++l) {
            const std::string p = "mixed" + std::to_string(l + 1) + ".";
            add(p + "kernel", self.mixed[l].kernel);
            add(p + "kernel_bias", self.mixed[l].kernel_bias);
            add(p + "dense", self.mixed[l].dense);
            add(p + "dense_bias", self.mixed[l].dense_bias);
        }
        add("head.weight", self.head.weight);
        add("head.bias", self.head.bias);
        add("output.weight", self.output.weight);
        add("output.bias", self.output.bias);
        return out;
    }
};

namespace detail {

inline double leaky(double z, double leak) { return z > 0.0 ? z : leak * z; }
inline double leaky_slope(double z, double leak) { return z > 0.0 ? 1.0 : leak; }

/// Dense matrix of the same-padded time convolution, hidden x (4 * in_channels).
inline Eigen::MatrixXd conv_matrix(const MixedLayer& layer, const CombiNetShape& s) {
    const auto C = static_cast<long>(s.channels);
    const auto I = static_cast<long>(layer.in_channels);
    const auto K = static_cast<long>(s.kernel);
    const auto T = static_cast<long>(kWindowFrames);
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(T * C, T * I);
    for (long t = 0; t < T; ++t)
        for (long k = 0; k < K; ++k) {
            const long src = t + k - K / 2;
            if (src < 0 || src >= T) continue;
            for (long o = 0; o < C; ++o)
                for (long c = 0; c < I; ++c) m(t * C + o, src * I + c) += layer.kernel(o, c * K + k);
        }
    return m;
}

inline Eigen::MatrixXd effective_matrix(const MixedLayer& layer, const CombiNetShape& s) {
    return 0.5 * (conv_matrix(layer, s) + layer.dense);
}

inline Eigen::VectorXd effective_bias(const MixedLayer& layer, const CombiNetShape& s) {
    const auto C = static_cast<Eigen::Index>(s.channels);
    Eigen::VectorXd b = layer.dense_bias;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(kWindowFrames); ++t)
        b.segment(t * C, C) += layer.kernel_bias;
    return 0.5 * b;
}

/// Gradient of an effective matrix/bias folded back onto the layer parameters.
inline void fold_gradient(const Eigen::MatrixXd& d_eff, const Eigen::VectorXd& d_bias,
                          const CombiNetShape& s, MixedLayer& grad) {
    const auto C = static_cast<long>(s.channels);
    const auto I = static_cast<long>(grad.in_channels);
    const auto K = static_cast<long>(s.kernel);
    const auto T = static_cast<long>(kWindowFrames);
    grad.dense = 0.5 * d_eff;
    grad.dense_bias = 0.5 * d_bias;
    grad.kernel.setZero();
    grad.kernel_bias.setZero();
    for (long t = 0; t < T; ++t) {
        for (long k = 0; k < K; ++k) {
            const long src = t + k - K / 2;
            if (src < 0 || src >= T) continue;
            for (long o = 0; o < C; ++o)
                for (long c = 0; c < I; ++c)
                    grad.kernel(o, c * K + k) += 0.5 * d_eff(t * C + o, src * I + c);
        }
        grad.kernel_bias += 0.5 * d_bias.segment(t * C, C);
    }
}

}  // namespace detail

/// Column-major batch activations kept for backpropagation.
struct ForwardCache {
    std::array<Eigen::MatrixXd, CombiNetModel::kMixedLayers> effective;
    /// Pre-activations of layers 1-5.
    std::array<Eigen::MatrixXd, CombiNetModel::kMixedLayers + 1> pre;
    /// Inputs to layers 1-6 (acts[0] is the encoded window batch).
    std::array<Eigen::MatrixXd, CombiNetModel::kMixedLayers + 2> acts;
    Eigen::MatrixXd output;
};

/// Column layout: index t*4 + {cx, cy, nw, nh}. Centers are taken relative to
/// the newest box and scaled by kMotionScale; sizes are offset by kSizeCenter.
inline void encode_window(const PathWindow& w, double* column) {
    const NormBBox& a = w.boxes[kWindowFrames - 1];
    for (std::size_t t = 0; t < kWindowFrames; ++t) {
        const auto& b = w.boxes[t];
        column[t * kBoxChannels + 0] = (b.cx - a.cx) * kMotionScale;
        column[t * kBoxChannels + 1] = (b.cy - a.cy) * kMotionScale;
        column[t * kBoxChannels + 2] = b.nw - kSizeCenter;
        column[t * kBoxChannels + 3] = b.nh - kSizeCenter;
    }
}

/// Regression target: the next box minus the newest box of the window.
inline void encode_target(const NormBBox& b, const PathWindow& w, std::size_t outputs, double* column) {
    const NormBBox& a = w.boxes[kWindowFrames - 1];
    column[0] = b.cx - a.cx;
    column[1] = b.cy - a.cy;
    if (outputs == 4) {
        column[2] = b.nw - a.nw;
        column[3] = b.nh - a.nh;
    }
}

/// Forward pass over a batch, X is 16 x B. Output is the raw (unclamped) layer 6.
inline ForwardCache forward_batch(const CombiNetModel& model, const Eigen::MatrixXd& X) {
    const auto& s = model.shape;
    ForwardCache cache;
    cache.acts[0] = X;
    for (std::size_t l = 0; l < CombiNetModel::kMixedLayers; ++l) {
        cache.effective[l] = detail::effective_matrix(model.mixed[l], s);
        Eigen::MatrixXd z = cache.effective[l] * cache.acts[l];
        z.colwise() += detail::effective_bias(model.mixed[l], s);
        cache.acts[l + 1] = z.unaryExpr([&](double v) { return detail::leaky(v, s.leak); });
        cache.pre[l] = std::move(z);
    }
    constexpr std::size_t h = CombiNetModel::kMixedLayers;
    Eigen::MatrixXd z5 = model.head.weight * cache.acts[h];
    z5.colwise() += model.head.bias;
    cache.acts[h + 1] = z5.unaryExpr([&](double v) { return detail::leaky(v, s.leak); });
    cache.pre[h] = std::move(z5);
    cache.output = model.output.weight * cache.acts[h + 1];
    cache.output.colwise() += model.output.bias;
    return cache;
}

/// Backpropagates dL/dY through the cached batch. Returns the data-term gradient.
inline CombiNetModel backward(const CombiNetModel& model, const ForwardCache& cache,
                              const Eigen::MatrixXd& d_output) {
    const auto& s = model.shape;
    CombiNetModel grad(s);
    constexpr std::size_t h = CombiNetModel::kMixedLayers;
    grad.output.weight.noalias() = d_output * cache.acts[h + 1].transpose();
    grad.output.bias = d_output.rowwise().sum();
    Eigen::MatrixXd delta = model.output.weight.transpose() * d_output;
    delta = delta.cwiseProduct(
        cache.pre[h].unaryExpr([&](double v) { return detail::leaky_slope(v, s.leak); }));
    grad.head.weight.noalias() = delta * cache.acts[h].transpose();
    grad.head.bias = delta.rowwise().sum();
    Eigen::MatrixXd upstream = model.head.weight.transpose() * delta;
    for (std::size_t l = h; l-- > 0;) {
        delta = upstream.cwiseProduct(
            cache.pre[l].unaryExpr([&](double v) { return detail::leaky_slope(v, s.leak); }));
        Eigen::MatrixXd d_eff = delta * cache.acts[l].transpose();
        Eigen::VectorXd d_bias = delta.rowwise().sum();
        detail::fold_gradient(d_eff, d_bias, s, grad.mixed[l]);
        if (l > 0) upstream = cache.effective[l].transpose() * delta;
    }
    return grad;
}

struct LossAndGradient {
    /// Mean squared error plus 0.5 * weight_decay * |theta|^2.
    double loss = 0.0;
    double data_loss = 0.0;
    CombiNetModel gradient;
};

/// X is 16 x B, targets is outputs x B.
inline LossAndGradient loss_and_gradient(const CombiNetModel& model, const Eigen::MatrixXd& X,
                                         const Eigen::MatrixXd& targets, double weight_decay) {
    const ForwardCache cache = forward_batch(model, X);
    const Eigen::MatrixXd diff = cache.output - targets;
    const double denom = static_cast<double>(diff.size());
    const double data = diff.squaredNorm() / denom;
    LossAndGradient out{0.0, data, backward(model, cache, (2.0 / denom) * diff)};
    double reg = 0.0;
    auto grads = out.gradient.blocks();
    const auto params = model.blocks();
    for (std::size_t b = 0; b < params.size(); ++b)
        for (std::size_t i = 0; i < params[b].values.size(); ++i) {
            const double p = params[b].values[i];
            reg += p * p;
            grads[b].values[i] += weight_decay * p;
        }
    out.loss = data + 0.5 * weight_decay * reg;
    return out;
}

/// Raw network output for one window: displacement from the newest box, unclamped.
inline Eigen::VectorXd forward_raw(const CombiNetModel& model, const PathWindow& window) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(model.shape.input_width()), 1);
    encode_window(window, X.data());
    return forward_batch(model, X).output.col(0);
}

/// Predicted next center (pc1, pc2), clamped to [0, 1].
inline Point forward(const CombiNetModel& model, const PathWindow& window) {
    if (!model.finite()) throw ModelError("combinet: model has non-finite parameters");
    const Eigen::VectorXd y = forward_raw(model, window);
    const NormBBox& a = window.boxes[kWindowFrames - 1];
    return {std::clamp(a.cx + y(0), 0.0, 1.0), std::clamp(a.cy + y(1), 0.0, 1.0)};
}

/// Next center from a track history. Uses the network once four boxes are
/// available; before that (or without a model) extrapolates linearly from the
/// last two centers.
inline Point predict_or_extrapolate(const CombiNetModel* model, std::span<const NormBBox> history) {
    if (history.empty()) throw Error("predict_or_extrapolate: empty history");
    if (model && history.size() >= kWindowFrames) {
        PathWindow w;
        std::copy(history.end() - kWindowFrames, history.end(), w.boxes.begin());
        return forward(*model, w);
    }
    const NormBBox& last = history.back();
    if (history.size() == 1) return {last.cx, last.cy};
    const NormBBox& prev = history[history.size() - 2];
    return {std::clamp(2.0 * last.cx - prev.cx, 0.0, 1.0),
            std::clamp(2.0 * last.cy - prev.cy, 0.0, 1.0)};
}

// ---------------------------------------------------------------------------
// Training

enum class LrSchedule {
    /// lr0 for the first epoch, then decay_base^epoch.
    Literal,
    /// lr0 * decay_base^epoch.
    Multiplicative,
};

struct TrainConfig {
    std::size_t batch_size = 16384;
    double momentum = 0.9;
    double weight_decay = 0.001;
    std::size_t epochs = 1000;
    double lr0 = 0.4;
    double lr_decay_base = 0.99;
    LrSchedule schedule = LrSchedule::Literal;
    std::uint64_t seed = 0;
    CombiNetShape shape;

    void validate() const {
        if (batch_size < 1) throw ConfigError("train: batch_size must be >= 1");
        if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train: momentum must lie in [0, 1)");
        if (epochs < 1) throw ConfigError("train: epochs must be >= 1");
        if (!(lr0 > 0.0)) throw ConfigError("train: lr0 must be positive");
        if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be >= 0");
        shape.validate();
    }
};

/// Learning rate used during `epoch` (0-based).
inline double learning_rate(const TrainConfig& cfg, std::size_t epoch) {
    if (epoch == 0) return cfg.lr0;
    const double decay = std::pow(cfg.lr_decay_base, static_cast<double>(epoch));
    return cfg.schedule == LrSchedule::Literal ? decay : cfg.lr0 * decay;
}

struct TrainLog {
    /// Mean squared error over each epoch's batches (sample weighted).
    std::vector<double> epoch_loss;
    std::vector<double> epoch_lr;
};

struct TrainResult {
    CombiNetModel model;
    TrainLog log;
};

struct EncodedSamples {
    Eigen::MatrixXd inputs;
    Eigen::MatrixXd targets;
};

inline EncodedSamples encode_samples(std::span<const TrainSample> samples, std::size_t outputs) {
    EncodedSamples e;
    const auto n = static_cast<Eigen::Index>(samples.size());
    e.inputs.resize(static_cast<Eigen::Index>(kWindowFrames * kBoxChannels), n);
    e.targets.resize(static_cast<Eigen::Index>(outputs), n);
    for (Eigen::Index i = 0; i < n; ++i) {
        encode_window(samples[static_cast<std::size_t>(i)].input, e.inputs.col(i).data());
        const auto& sample = samples[static_cast<std::size_t>(i)];
        encode_target(sample.target, sample.input, outputs, e.targets.col(i).data());
    }
    return e;
}

/// SGD with momentum on the L2-regularized mean squared error. Deterministic
/// for a given (samples, cfg).
inline TrainResult train(std::span<const TrainSample> samples, const TrainConfig& cfg) {
    cfg.validate();
    if (samples.empty()) throw ConfigError("train: empty dataset");
    TrainResult result{CombiNetModel::random(cfg.shape, cfg.seed), {}};
    CombiNetModel& model = result.model;
    CombiNetModel velocity(cfg.shape);
    const EncodedSamples data = encode_samples(samples, cfg.shape.outputs);

    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::mt19937_64 shuffle_rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const std::size_t n = samples.size();
    Eigen::MatrixXd X;
    Eigen::MatrixXd Y;

    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double lr = learning_rate(cfg, epoch);
        std::shuffle(order.begin(), order.end(), shuffle_rng);
        double weighted_loss = 0.0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
            const std::size_t bs = std::min(cfg.batch_size, n - start);
            X.resize(data.inputs.rows(), static_cast<Eigen::Index>(bs));
            Y.resize(data.targets.rows(), static_cast<Eigen::Index>(bs));
            for (std::size_t j = 0; j < bs; ++j) {
                const auto src = static_cast<Eigen::Index>(order[start + j]);
                X.col(static_cast<Eigen::Index>(j)) = data.inputs.col(src);
                Y.col(static_cast<Eigen::Index>(j)) = data.targets.col(src);
            }
            LossAndGradient lg = loss_and_gradient(model, X, Y, cfg.weight_decay);
            if (!std::isfinite(lg.loss)) {
                throw ModelError("train: non-finite loss at epoch " + std::to_string(epoch) +
                                 ", batch " + std::to_string(batch_index));
            }
            weighted_loss += lg.data_loss * static_cast<double>(bs);
            auto p = model.blocks();
            auto v = velocity.blocks();
            auto g = lg.gradient.blocks();
            for (std::size_t b = 0; b < p.size(); ++b)
                for (std::size_t i = 0; i < p[b].values.size(); ++i) {
                    v[b].values[i] = cfg.momentum * v[b].values[i] + g[b].values[i];
                    p[b].values[i] -= lr * v[b].values[i];
                }
        }
        result.log.epoch_loss.push_back(weighted_loss / static_cast<double>(n));
        result.log.epoch_lr.push_back(lr);
    }
    return result;
}

// ---------------------------------------------------------------------------
// Gradient checking

namespace detail {

/// Regularized single-sample loss and the sign pattern of every pre-activation.
inline double sample_loss(const CombiNetModel& model, const TrainSample& sample,
                          double weight_decay, std::vector<bool>* pattern) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(model.shape.input_width()), 1);
    Eigen::MatrixXd T(static_cast<Eigen::Index>(model.shape.outputs), 1);
    encode_window(sample.input, X.data());
    encode_target(sample.target, sample.input, model.shape.outputs, T.data());
    const ForwardCache cache = forward_batch(model, X);
    if (pattern) {
        pattern->clear();
        for (const auto& z : cache.pre)
            for (Eigen::Index i = 0; i < z.size(); ++i) pattern->push_back(z.data()[i] > 0.0);
    }
    const double data = (cache.output - T).squaredNorm() / static_cast<double>(T.size());
    double reg = 0.0;
    for (double p : model.flatten()) reg += p * p;
    return data + 0.5 * weight_decay * reg;
}

}  // namespace detail

/// Analytic gradient of the regularized single-sample loss, flattened in block order.
inline std::vector<double> analytic_gradient(const CombiNetModel& model, const TrainSample& sample,
                                             double weight_decay) {
    Eigen::MatrixXd X(static_cast<Eigen::Index>(model.shape.input_width()), 1);
    Eigen::MatrixXd T(static_cast<Eigen::Index>(model.shape.outputs), 1);
    encode_window(sample.input, X.data());
    encode_target(sample.target, sample.input, model.shape.outputs, T.data());
    return loss_and_gradient(model, X, T, weight_decay).gradient.flatten();
}

struct GradientCheckReport {
    double max_relative_error = 0.0;
    std::size_t worst_parameter = 0;
    std::size_t parameters = 0;
};

/// Compares `analytic` against finite differences of the regularized loss.
///
/// Central differences are used unless a step crosses a rectifier kink; then a
/// second-order one-sided difference on the smooth side is taken instead. The
/// relative error is |a - n| / max(|a|, |n|, 1e-3).
inline GradientCheckReport compare_gradients(const CombiNetModel& model, const TrainSample& sample,
                                             std::span<const double> analytic, double epsilon,
                                             double weight_decay) {
    if (!(epsilon >= 1e-7 && epsilon <= 1e-3))
        throw ConfigError("gradient_check: epsilon must lie in [1e-7, 1e-3]");
    CombiNetModel probe = model;
    std::vector<double> theta = model.flatten();
    if (analytic.size() != theta.size()) throw ModelError("gradient_check: gradient size mismatch");

    std::vector<bool> base_pattern;
    detail::sample_loss(model, sample, weight_decay, &base_pattern);
    std::vector<bool> pattern;
    auto eval = [&](std::size_t i, double offset, bool* same) {
        std::vector<double> shifted = theta;
        shifted[i] += offset;
        probe.assign(shifted);
        const double l = detail::sample_loss(probe, sample, weight_decay, &pattern);
        *same = pattern == base_pattern;
        return l;
    };

    GradientCheckReport report;
    report.parameters = theta.size();
    const double f0 = detail::sample_loss(model, sample, weight_decay, nullptr);
    for (std::size_t i = 0; i < theta.size(); ++i) {
        double numeric = 0.0;
        double h = epsilon;
        for (int attempt = 0; attempt < 4; ++attempt, h /= 10.0) {
            bool plus_ok = false, minus_ok = false, plus2_ok = false, minus2_ok = false;
            const double fp = eval(i, h, &plus_ok);
            const double fm = eval(i, -h, &minus_ok);
            if (plus_ok && minus_ok) {
                numeric = (fp - fm) / (2.0 * h);
                break;
            }
            const double fp2 = eval(i, 2.0 * h, &plus2_ok);
            if (plus_ok && plus2_ok) {
                numeric = (-3.0 * f0 + 4.0 * fp - fp2) / (2.0 * h);
                break;
            }
            const double fm2 = eval(i, -2.0 * h, &minus2_ok);
            if (minus_ok && minus2_ok) {
                numeric = (3.0 * f0 - 4.0 * fm + fm2) / (2.0 * h);
                break;
            }
            numeric = (fp - fm) / (2.0 * h);
        }
        const double a = analytic[i];
        const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-3});
        if (err > report.max_relative_error) {
            report.max_relative_error = err;
            report.worst_parameter = i;
        }
    }
    return report;
}

inline GradientCheckReport gradient_check(const CombiNetModel& model, const TrainSample& sample,
                                          double epsilon, double weight_decay = 0.001) {
    const auto g = analytic_gradient(model, sample, weight_decay);
    return compare_gradients(model, sample, g, epsilon, weight_decay);
}

// ---------------------------------------------------------------------------
// Training windows from annotated tracks

struct AnnotatedTrack {
    ImageDims dims;
    /// One entry per frame; nullopt marks an absent or occluded frame.
    std::vector<std::optional<BBox>> boxes;
};

struct WindowSet {
    std::vector<TrainSample> samples;
    /// Tracks shorter than five frames.
    std::size_t skipped_tracks = 0;
};

/// Slides a five-frame window over every track: four frames of input and the
/// fifth frame as target. Windows never span an absent frame.
inline WindowSet load_windows(std::span<const AnnotatedTrack> tracks) {
    WindowSet out;
    constexpr std::size_t span_len = kWindowFrames + 1;
    for (const auto& track : tracks) {
        if (track.boxes.size() < span_len) {
            ++out.skipped_tracks;
            continue;
        }
        std::vector<std::optional<NormBBox>> norm;
        norm.reserve(track.boxes.size());
        for (const auto& b : track.boxes)
            norm.push_back(b ? try_normalize(*b, track.dims) : std::nullopt);
        for (std::size_t start = 0; start + span_len <= norm.size(); ++start) {
            bool complete = true;
            for (std::size_t k = 0; k < span_len; ++k) complete = complete && norm[start + k].has_value();
            if (!complete) continue;
            TrainSample s;
            for (std::size_t k = 0; k < kWindowFrames; ++k) s.input.boxes[k] = *norm[start + k];
            s.target = *norm[start + kWindowFrames];
            out.samples.push_back(s);
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Model file
//
//   combinet-model 2
//   channels <int>
//   kernel <int>
//   dense_width <int>
//   outputs <int>
//   leak <double>
//   tensor <name> <rows> <cols>
//   <rows lines of cols values, row-major>
//   ... (one tensor block per parameter, in CombiNetModel::blocks() order)
//   end
//
// Values are written in the shortest form that parses back to the same double,
// so a save/load round trip is bit-exact.

inline void save_model(const CombiNetModel& model, std::ostream& os) {
    const auto& s = model.shape;
    os << "combinet-model 2\n"
       << "channels " << s.channels << "\n"
       << "kernel " << s.kernel << "\n"
       << "dense_width " << s.dense_width << "\n"
       << "outputs " << s.outputs << "\n"
       << "leak " << text::format_double(s.leak) << "\n";
    for (const auto& b : model.blocks()) {
        os << "tensor " << b.name << " " << b.rows << " " << b.cols << "\n";
        for (std::size_t r = 0; r < b.rows; ++r) {
            for (std::size_t c = 0; c < b.cols; ++c) {
                if (c) os << ' ';
                os << text::format_double(b.values[c * b.rows + r]);  // column-major storage
            }
            os << '\n';
        }
    }
    os << "end\n";
}

inline void save_model(const CombiNetModel& model, const std::string& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ModelError("cannot write model file: " + path);
    save_model(model, os);
    if (!os) throw ModelError("failed writing model file: " + path);
}

inline CombiNetModel load_model(std::istream& is, const std::string& source = "<stream>") {
    std::size_t line_no = 0;
    std::string line;
    auto next = [&]() -> std::string {
        if (!std::getline(is, line)) throw ModelError(source + ": unexpected end of model file");
        ++line_no;
        return line;
    };
    auto fail = [&](const std::string& msg) -> ModelError {
        return ModelError(source + ":" + std::to_string(line_no) + ": " + msg);
    };
    auto keyed = [&](const std::string& key) -> std::string {
        std::istringstream ls(next());
        std::string k, v;
        ls >> k >> v;
        if (k != key || v.empty()) throw fail("expected '" + key + " <value>'");
        return v;
    };
    auto as_size = [&](const std::string& v) {
        auto x = text::parse_int(v);
        if (!x || *x <= 0) throw fail("expected a positive integer, got '" + v + "'");
        return static_cast<std::size_t>(*x);
    };

    if (text::trim(next()) != "combinet-model 2") throw fail("not a combinet model file (version 2)");
    CombiNetShape shape;
    shape.channels = as_size(keyed("channels"));
    shape.kernel = as_size(keyed("kernel"));
    shape.dense_width = as_size(keyed("dense_width"));
    shape.outputs = as_size(keyed("outputs"));
    {
        const auto v = keyed("leak");
        auto leak = text::parse_double(v);
        if (!leak) throw fail("bad leak value '" + v + "'");
        shape.leak = *leak;
    }
    CombiNetModel model(shape);
    for (auto& b : model.blocks()) {
        std::istringstream hs(next());
        std::string tag, name;
        std::size_t rows = 0, cols = 0;
        hs >> tag >> name >> rows >> cols;
        if (tag != "tensor" || name != b.name)
            throw fail("expected tensor '" + b.name + "', got '" + line + "'");
        if (rows != b.rows || cols != b.cols)
            throw fail("tensor '" + b.name + "' has shape " + std::to_string(rows) + "x" +
                       std::to_string(cols) + ", expected " + std::to_string(b.rows) + "x" +
                       std::to_string(b.cols));
        for (std::size_t r = 0; r < rows; ++r) {
            const std::string row = next();
            const auto fields = text::split(row, " ");
            if (fields.size() != cols) throw fail("expected " + std::to_string(cols) + " values");
            for (std::size_t c = 0; c < cols; ++c) {
                auto v = text::parse_double(fields[c]);
                if (!v) throw fail("bad number '" + std::string(fields[c]) + "'");
                b.values[c * rows + r] = *v;
            }
        }
    }
    if (text::trim(next()) != "end") throw fail("expected 'end'");
    return model;
}

inline CombiNetModel load_model(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ModelError("cannot open model file: " + path);
    return load_model(is, path);
}

}  // namespace mttsiam
