#pragma once

#include <cstdint>
#include <optional>

#include "rtar/kernels.hpp"

namespace rtar {

/// Inverted-residual (MBConv) block configuration.
struct MbConvSpec {
    std::int64_t in_ch = 0;
    std::int64_t out_ch = 0;
    std::int64_t expansion = 1;
    std::int64_t kernel = 3;   // odd
    std::int64_t stride = 1;   // 1 or 2
    double se_ratio = 0.0;     // 0 disables SE; otherwise reduction fraction in (0,1]
    Activation act = Activation::Relu6;

    std::int64_t expanded_ch() const { return in_ch * expansion; }
    bool has_residual() const { return stride == 1 && in_ch == out_ch; }
    bool has_se() const { return se_ratio > 0.0; }
};

struct SeSpec {
    std::int64_t channels = 0;
    std::int64_t reduction = 4;

    std::int64_t bottleneck() const { return channels / reduction; }
};

struct TsmSpec {
    double shift_fraction = 0.125;  // per direction
    std::int64_t num_frames = 1;
};

/// Squeeze-and-excitation: per-frame global pool, two FC layers, sigmoid gate,
/// channel rescale. w1 is [mid, C], w2 is [C, mid].
inline Tensor se_apply(const Tensor& input, const SeSpec& spec, const Tensor& w1,
                       const Tensor& b1, const Tensor& w2, const Tensor& b2) {
    const std::int64_t c_n = spec.channels;
    const std::int64_t mid = spec.bottleneck();
    if (mid < 1) throw ShapeMismatch("se bottleneck width must be >= 1");
    if (input.rank() != 4 || input.dim(1) != c_n)
        throw ShapeMismatch("se input " + input.shape_str() + " vs channels " +
                            std::to_string(c_n));
    if (w1.dim(0) != mid || w1.dim(1) != c_n || b1.dim(0) != mid ||
        w2.dim(0) != c_n || w2.dim(1) != mid || b2.dim(0) != c_n)
        throw ShapeMismatch("se weight shapes inconsistent with spec");

    const std::int64_t t_n = input.dim(0);
    const std::int64_t plane = input.dim(2) * input.dim(3);

    Tensor pooled({t_n, c_n});
    const Tensor gap = global_avg_pool(input);
    for (std::int64_t t = 0; t < t_n; ++t)
        for (std::int64_t c = 0; c < c_n; ++c) pooled.at2(t, c) = gap.at4(t, c, 0, 0);

    const Tensor gates =
        activation(linear(activation(linear(pooled, w1, b1), Activation::Relu), w2, b2),
                   Activation::Sigmoid);

    Tensor out(input.shape());
    for (std::int64_t t = 0; t < t_n; ++t) {
        for (std::int64_t c = 0; c < c_n; ++c) {
            const float g = gates.at2(t, c);
            const float* src = input.data() + (t * c_n + c) * plane;
            float* dst = out.data() + (t * c_n + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = g * src[i];
        }
    }
    return out;
}

/// Temporal shift: the first n = floor(C*f) channels take their value from the
/// previous frame, the next n from the following frame, the rest pass through.
/// Out-of-range frames contribute zeros. Pure data movement, no arithmetic.
inline Tensor tsm_shift(const Tensor& input, const TsmSpec& spec) {
    if (input.rank() != 4) throw ShapeMismatch("tsm expects rank-4 input");
    const std::int64_t t_n = input.dim(0), c_n = input.dim(1);
    if (t_n != spec.num_frames)
        throw FrameCountMismatch("input has " + std::to_string(t_n) + " frames, tsm expects " +
                                 std::to_string(spec.num_frames));
    const std::int64_t n = static_cast<std::int64_t>(
        static_cast<double>(c_n) * spec.shift_fraction);
    if (2 * n > c_n) throw ShapeMismatch("shift fraction too large for channel count");
    const std::int64_t plane = input.dim(2) * input.dim(3);

    Tensor out(input.shape());
    for (std::int64_t t = 0; t < t_n; ++t) {
        for (std::int64_t c = 0; c < c_n; ++c) {
            std::int64_t src_t = t;
            if (c < n) src_t = t - 1;
            else if (c < 2 * n) src_t = t + 1;
            float* dst = out.data() + (t * c_n + c) * plane;
            if (src_t < 0 || src_t >= t_n) continue;  // stays zero
            const float* src = input.data() + (src_t * c_n + c) * plane;
            std::copy(src, src + plane, dst);
        }
    }
    return out;
}

struct SeWeights {
    Tensor w1, b1, w2, b2;
};

struct MbConvWeights {
    std::optional<ConvParams> expand;  // absent when expansion == 1
    ConvParams dw;
    std::optional<SeWeights> se;
    ConvParams project;
};

/// Standard inverted-residual dataflow: expand 1x1 -> depthwise kxk -> SE ->
/// project 1x1, each conv carrying folded BN, residual add when shapes allow.
inline Tensor mbconv_forward(const Tensor& input, const MbConvSpec& spec,
                             const MbConvWeights& w) {
    if (input.dim(1) != spec.in_ch)
        throw ShapeMismatch("mbconv input channels " + std::to_string(input.dim(1)) +
                            " != spec in_ch " + std::to_string(spec.in_ch));
    if (spec.expansion > 1 && !w.expand) throw MissingWeights("mbconv expand stage");
    if (spec.has_se() && !w.se) throw MissingWeights("mbconv se stage");

    Tensor x = input;
    if (spec.expansion > 1) x = activation(conv2d(x, *w.expand), spec.act);
    x = activation(depthwise_conv2d(x, w.dw), spec.act);
    if (spec.has_se()) {
        SeSpec se{x.dim(1),
                  static_cast<std::int64_t>(std::llround(1.0 / spec.se_ratio))};
        x = se_apply(x, se, w.se->w1, w.se->b1, w.se->w2, w.se->b2);
    }
    x = conv2d(x, w.project);
    if (spec.has_residual()) x = tensor_add(x, input);
    return x;
}

/// Dropout is a training regularizer; at inference it is the identity. The
/// ratio is kept so configurations stay faithful to their training recipe.
inline Tensor dropout_inference(const Tensor& input, float ratio) {
    (void)ratio;
    return input;
}

}  // namespace rtar
