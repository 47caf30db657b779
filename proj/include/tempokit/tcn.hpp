#pragma once

#include "tempokit/error.hpp"
#include "tempokit/frontend.hpp"
#include "tempokit/postproc.hpp"
#include "tempokit/rng.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

namespace tempokit {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

// Multitask TCN: a stack of non-causal dilated convolution blocks (ELU,
// residual where shapes match, spatial dropout in training) feeding two
// heads: a per-frame sigmoid beat head and a global-average-pooled softmax
// tempo head over 1-BPM bins.
struct TcnConfig {
    int num_layers = 11;
    int kernel_size = 5;
    int num_filters = 16;
    std::vector<int> dilations = default_dilations(11);
    double dropout_rate = 0.1;
    int tempo_bins = 300;
    int input_bands = 81;

    static std::vector<int> default_dilations(int layers) {
        std::vector<int> d(static_cast<std::size_t>(layers));
        int v = 1;
        for (auto& x : d) {
            x = v;
            v *= 2;
        }
        return d;
    }

    void validate() const {
        if (num_layers < 1 || static_cast<std::size_t>(num_layers) != dilations.size()) {
            raise(Errc::invalid_config, "num_layers must match dilations");
        }
        if (kernel_size < 1 || kernel_size % 2 == 0) {
            raise(Errc::invalid_config, "kernel_size must be odd");
        }
        if (num_filters < 1) raise(Errc::invalid_config, "num_filters must be positive");
        if (input_bands < 1) raise(Errc::invalid_config, "input_bands must be positive");
        if (!(0.0 <= dropout_rate && dropout_rate < 1.0)) {
            raise(Errc::invalid_config, "dropout_rate must lie in [0, 1)");
        }
        if (tempo_bins < 2) raise(Errc::invalid_config, "tempo_bins must be >= 2");
        for (int d : dilations) {
            if (d < 1) raise(Errc::invalid_config, "dilations must be positive");
        }
    }
};

// Frames influencing one output frame: 1 + (kernel_size - 1) * sum(dilations).
inline Eigen::Index receptive_field(const TcnConfig& cfg) {
    cfg.validate();
    Eigen::Index sum = 0;
    for (int d : cfg.dilations) sum += d;
    return 1 + static_cast<Eigen::Index>(cfg.kernel_size - 1) * sum;
}

template <typename Scalar>
struct ConvLayer {
    // kernel columns are grouped per tap: tap j is kernel.middleCols(j*in, in)
    Matrix<Scalar> kernel; // out x (kernel_size * in)
    Vector<Scalar> bias;   // out
    int dilation = 1;
    int in_channels = 0;

    int taps() const { return static_cast<int>(kernel.cols() / in_channels); }
};

template <typename Scalar>
struct TcnWeights {
    TcnConfig config;
    std::vector<ConvLayer<Scalar>> layers;
    Vector<Scalar> beat_weight;  // filters
    Scalar beat_bias = Scalar(0);
    Matrix<Scalar> tempo_weight; // bins x filters
    Vector<Scalar> tempo_bias;   // bins

    template <typename Other>
    TcnWeights<Other> cast() const {
        TcnWeights<Other> out;
        out.config = config;
        out.layers.reserve(layers.size());
        for (const auto& l : layers) {
            out.layers.push_back({l.kernel.template cast<Other>(),
                                  l.bias.template cast<Other>(), l.dilation,
                                  l.in_channels});
        }
        out.beat_weight = beat_weight.template cast<Other>();
        out.beat_bias = static_cast<Other>(beat_bias);
        out.tempo_weight = tempo_weight.template cast<Other>();
        out.tempo_bias = tempo_bias.template cast<Other>();
        return out;
    }

    void set_zero() {
        for (auto& l : layers) {
            l.kernel.setZero();
            l.bias.setZero();
        }
        beat_weight.setZero();
        beat_bias = Scalar(0);
        tempo_weight.setZero();
        tempo_bias.setZero();
    }
};

// Applies fn(name, data pointer, element count) to every tensor, always in
// the same order; the optimizer state and the weight file both rely on it.
template <typename Scalar, typename Fn>
void visit_tensors(TcnWeights<Scalar>& w, Fn&& fn) {
    char name[32];
    for (std::size_t i = 0; i < w.layers.size(); ++i) {
        auto& l = w.layers[i];
        std::snprintf(name, sizeof(name), "layer%02zu.kernel", i);
        fn(std::string(name), l.kernel.data(), static_cast<Eigen::Index>(l.kernel.size()));
        std::snprintf(name, sizeof(name), "layer%02zu.bias", i);
        fn(std::string(name), l.bias.data(), static_cast<Eigen::Index>(l.bias.size()));
    }
    fn(std::string("beat_head.weight"), w.beat_weight.data(),
       static_cast<Eigen::Index>(w.beat_weight.size()));
    fn(std::string("beat_head.bias"), &w.beat_bias, Eigen::Index(1));
    fn(std::string("tempo_head.weight"), w.tempo_weight.data(),
       static_cast<Eigen::Index>(w.tempo_weight.size()));
    fn(std::string("tempo_head.bias"), w.tempo_bias.data(),
       static_cast<Eigen::Index>(w.tempo_bias.size()));
}

template <typename Scalar>
Eigen::Index param_count(const TcnWeights<Scalar>& w) {
    Eigen::Index n = 0;
    visit_tensors(const_cast<TcnWeights<Scalar>&>(w),
                  [&](const std::string&, const Scalar*, Eigen::Index count) { n += count; });
    return n;
}

// Zero-filled gradients (or accumulator) shaped like the given weights.
template <typename Scalar>
TcnWeights<Scalar> zeros_like(const TcnWeights<Scalar>& w) {
    TcnWeights<Scalar> g = w;
    g.set_zero();
    return g;
}

// Deterministic scaled-uniform fan-in initialization; biases start at zero.
// Values are drawn in double precision in tensor-visit order, so the same
// seed yields the same model for every scalar type.
template <typename Scalar>
TcnWeights<Scalar> init_model(const TcnConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    TcnWeights<Scalar> w;
    w.config = cfg;
    Rng rng(seed);

    w.layers.resize(static_cast<std::size_t>(cfg.num_layers));
    int in_ch = cfg.input_bands;
    for (int i = 0; i < cfg.num_layers; ++i) {
        auto& l = w.layers[static_cast<std::size_t>(i)];
        l.dilation = cfg.dilations[static_cast<std::size_t>(i)];
        l.in_channels = in_ch;
        l.kernel.resize(cfg.num_filters, cfg.kernel_size * in_ch);
        const double bound = 1.0 / std::sqrt(static_cast<double>(in_ch) * cfg.kernel_size);
        for (Eigen::Index idx = 0; idx < l.kernel.size(); ++idx) {
            l.kernel.data()[idx] = static_cast<Scalar>(rng.uniform(-bound, bound));
        }
        l.bias = Vector<Scalar>::Zero(cfg.num_filters);
        in_ch = cfg.num_filters;
    }

    const double head_bound = 1.0 / std::sqrt(static_cast<double>(cfg.num_filters));
    w.beat_weight.resize(cfg.num_filters);
    for (Eigen::Index i = 0; i < w.beat_weight.size(); ++i) {
        w.beat_weight[i] = static_cast<Scalar>(rng.uniform(-head_bound, head_bound));
    }
    w.beat_bias = Scalar(0);
    w.tempo_weight.resize(cfg.tempo_bins, cfg.num_filters);
    for (Eigen::Index idx = 0; idx < w.tempo_weight.size(); ++idx) {
        w.tempo_weight.data()[idx] = static_cast<Scalar>(rng.uniform(-head_bound, head_bound));
    }
    w.tempo_bias = Vector<Scalar>::Zero(cfg.tempo_bins);
    return w;
}

template <typename Scalar>
struct ModelOutput {
    Vector<Scalar> beat_activation;  // per frame, in [0, 1]
    Vector<Scalar> tempo_activation; // per bin, sums to 1
    double fps = 100.0;
};

// Intermediates kept by the forward pass for backpropagation.
template <typename Scalar>
struct ForwardCache {
    std::vector<Matrix<Scalar>> layer_in; // input feature map per layer
    std::vector<Matrix<Scalar>> preact;   // pre-activation per layer
    std::vector<Vector<Scalar>> drop_scale; // per-channel dropout scale (empty: off)
    Matrix<Scalar> features; // post-stack feature map (filters x frames)
    Vector<Scalar> pooled;
    Vector<Scalar> beat_logits;
    Vector<Scalar> tempo_logits;
};

namespace detail {

// y += conv(kernel, x) with zero padding; taps are centered (non-causal)
template <typename Scalar>
void dilated_conv_accum(const ConvLayer<Scalar>& l, const Matrix<Scalar>& x,
                        Matrix<Scalar>& y) {
    const Eigen::Index frames = x.cols();
    const int k = l.taps();
    const int half = (k - 1) / 2;
    for (int j = 0; j < k; ++j) {
        const Eigen::Index off = static_cast<Eigen::Index>(j - half) * l.dilation;
        const Eigen::Index lo = std::max<Eigen::Index>(0, -off);
        const Eigen::Index hi = std::min<Eigen::Index>(frames - 1, frames - 1 - off);
        if (lo > hi) continue;
        const Eigen::Index len = hi - lo + 1;
        y.middleCols(lo, len).noalias() +=
            l.kernel.middleCols(static_cast<Eigen::Index>(j) * l.in_channels, l.in_channels) *
            x.middleCols(lo + off, len);
    }
}

template <typename Scalar>
Matrix<Scalar> elu(const Matrix<Scalar>& z) {
    return z.unaryExpr([](Scalar v) { return v > Scalar(0) ? v : std::exp(v) - Scalar(1); });
}

template <typename Scalar>
Matrix<Scalar> elu_grad(const Matrix<Scalar>& z) {
    return z.unaryExpr([](Scalar v) { return v > Scalar(0) ? Scalar(1) : std::exp(v); });
}

} // namespace detail

// Runs the stack and both heads. In training mode spatial dropout is active
// and `rng` must be provided; pass a cache to enable backward().
template <typename Scalar>
ModelOutput<Scalar> forward(const TcnWeights<Scalar>& w, const Spectrogram& spec,
                            bool training = false, Rng* rng = nullptr,
                            ForwardCache<Scalar>* cache = nullptr) {
    w.config.validate();
    if (spec.bands() != w.config.input_bands) {
        raise(Errc::shape_mismatch, "spectrogram band count does not match the model");
    }
    if (spec.frames() < 1) raise(Errc::shape_mismatch, "empty spectrogram");
    if (training && rng == nullptr) {
        raise(Errc::invalid_config, "training mode requires an RNG for dropout");
    }

    const Eigen::Index frames = spec.frames();
    Matrix<Scalar> x = spec.values.transpose().template cast<Scalar>(); // channels x frames

    if (cache) {
        cache->layer_in.clear();
        cache->preact.clear();
        cache->drop_scale.clear();
    }

    for (const auto& l : w.layers) {
        if (cache) cache->layer_in.push_back(x);
        Matrix<Scalar> z = l.bias.replicate(1, frames);
        detail::dilated_conv_accum(l, x, z);
        if (cache) cache->preact.push_back(z);
        Matrix<Scalar> a = detail::elu(z);
        if (training && w.config.dropout_rate > 0.0) {
            Vector<Scalar> scale(a.rows());
            const auto keep_scale = static_cast<Scalar>(1.0 / (1.0 - w.config.dropout_rate));
            for (Eigen::Index c = 0; c < a.rows(); ++c) {
                scale[c] = rng->uniform() < w.config.dropout_rate ? Scalar(0) : keep_scale;
            }
            a = scale.asDiagonal() * a;
            if (cache) cache->drop_scale.push_back(scale);
        } else if (cache) {
            cache->drop_scale.emplace_back();
        }
        if (a.rows() == x.rows()) a += x; // residual when shapes match
        x = std::move(a);
    }

    ModelOutput<Scalar> out;
    out.fps = spec.fps;

    const Vector<Scalar> pooled = x.rowwise().mean();
    Vector<Scalar> beat_logits = (w.beat_weight.transpose() * x).transpose();
    beat_logits.array() += w.beat_bias;
    Vector<Scalar> tempo_logits = w.tempo_weight * pooled + w.tempo_bias;

    out.beat_activation =
        (Scalar(1) / (Scalar(1) + (-beat_logits.array()).exp())).matrix();
    const Scalar peak = tempo_logits.maxCoeff();
    Vector<Scalar> expd = (tempo_logits.array() - peak).exp().matrix();
    out.tempo_activation = expd / expd.sum();

    if (cache) {
        cache->features = std::move(x);
        cache->pooled = pooled;
        cache->beat_logits = std::move(beat_logits);
        cache->tempo_logits = std::move(tempo_logits);
    }
    return out;
}

// Gradients of the loss with respect to every weight tensor, given the loss
// gradients at the two heads' logits.
template <typename Scalar>
TcnWeights<Scalar> backward(const TcnWeights<Scalar>& w, const ForwardCache<Scalar>& cache,
                            const Vector<Scalar>& d_beat_logits,
                            const Vector<Scalar>& d_tempo_logits) {
    if (cache.layer_in.size() != w.layers.size()) {
        raise(Errc::state_shape_mismatch, "cache does not match the model");
    }
    const Eigen::Index frames = cache.features.cols();
    if (d_beat_logits.size() != frames || d_tempo_logits.size() != w.tempo_bias.size()) {
        raise(Errc::shape_mismatch, "logit gradient shapes do not match");
    }

    TcnWeights<Scalar> g = zeros_like(w);

    g.beat_weight.noalias() = cache.features * d_beat_logits;
    g.beat_bias = d_beat_logits.sum();
    g.tempo_weight.noalias() = d_tempo_logits * cache.pooled.transpose();
    g.tempo_bias = d_tempo_logits;

    // into the post-stack feature map: beat head per frame, tempo head
    // through the global average pool
    Matrix<Scalar> dy = w.beat_weight * d_beat_logits.transpose();
    const Vector<Scalar> d_pooled = w.tempo_weight.transpose() * d_tempo_logits;
    dy.colwise() += (d_pooled / static_cast<Scalar>(frames)).eval();

    for (std::size_t li = w.layers.size(); li-- > 0;) {
        const auto& l = w.layers[li];
        auto& gl = g.layers[li];
        const Matrix<Scalar>& x = cache.layer_in[li];
        const Matrix<Scalar>& z = cache.preact[li];
        const bool residual = x.rows() == dy.rows();

        Matrix<Scalar> da = dy;
        if (cache.drop_scale.size() > li && cache.drop_scale[li].size() > 0) {
            da = cache.drop_scale[li].asDiagonal() * da;
        }
        Matrix<Scalar> dz = da.cwiseProduct(detail::elu_grad(z));

        gl.bias = dz.rowwise().sum();
        const int k = l.taps();
        const int half = (k - 1) / 2;
        Matrix<Scalar> dx;
        const bool need_dx = li > 0;
        if (need_dx || residual) {
            dx = residual ? dy : Matrix<Scalar>::Zero(x.rows(), x.cols());
        }
        for (int j = 0; j < k; ++j) {
            const Eigen::Index off = static_cast<Eigen::Index>(j - half) * l.dilation;
            const Eigen::Index lo = std::max<Eigen::Index>(0, -off);
            const Eigen::Index hi = std::min<Eigen::Index>(frames - 1, frames - 1 - off);
            if (lo > hi) continue;
            const Eigen::Index len = hi - lo + 1;
            gl.kernel.middleCols(static_cast<Eigen::Index>(j) * l.in_channels, l.in_channels)
                .noalias() += dz.middleCols(lo, len) * x.middleCols(lo + off, len).transpose();
            if (need_dx) {
                dx.middleCols(lo + off, len).noalias() +=
                    l.kernel
                        .middleCols(static_cast<Eigen::Index>(j) * l.in_channels, l.in_channels)
                        .transpose() *
                    dz.middleCols(lo, len);
            }
        }
        if (need_dx) dy = std::move(dx);
    }
    return g;
}

inline BeatActivation to_beat_activation(const Eigen::VectorXd& values, double fps) {
    BeatActivation act;
    act.values = values.array();
    act.fps = fps;
    return act;
}

template <typename Scalar>
BeatActivation to_beat_activation(const ModelOutput<Scalar>& out) {
    return to_beat_activation(out.beat_activation.template cast<double>(), out.fps);
}

template <typename Scalar>
TempoActivation to_tempo_activation(const ModelOutput<Scalar>& out) {
    TempoActivation act;
    act.mass = out.tempo_activation.template cast<double>().array();
    return act;
}

} // namespace tempokit
