#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>

#include "rtar/tensor.hpp"
#include "rtar/threading.hpp"

namespace rtar {

/// 2D convolution parameters. kernel is [C_out, C_in/groups, K_h, K_w];
/// groups = C_in = C_out with one input channel per group is depthwise.
struct ConvParams {
    Tensor kernel;
    std::optional<Tensor> bias;  // [C_out]
    std::int64_t stride_h = 1, stride_w = 1;
    std::int64_t pad_h = 0, pad_w = 0;
    std::int64_t groups = 1;

    std::int64_t out_channels() const { return kernel.dim(0); }
    std::int64_t in_channels() const { return kernel.dim(1) * groups; }
    std::int64_t kernel_h() const { return kernel.dim(2); }
    std::int64_t kernel_w() const { return kernel.dim(3); }
};

/// Inference-time batch-norm parameters, all [C].
struct BnParams {
    Tensor gamma, beta, running_mean, running_var;
    float epsilon = 1e-5f;

    std::int64_t channels() const { return gamma.dim(0); }

    void validate() const {
        const std::int64_t c = channels();
        if (beta.dim(0) != c || running_mean.dim(0) != c || running_var.dim(0) != c)
            throw ShapeMismatch("bn parameter vectors must share length");
        for (std::int64_t i = 0; i < c; ++i)
            if (running_var[i] < 0.0f)
                throw ShapeMismatch("negative running_var at channel " + std::to_string(i));
    }
};

enum class Activation { Relu, Relu6, Sigmoid };

inline void check_conv_args(const Tensor& input, const ConvParams& p) {
    if (input.rank() != 4)
        throw ShapeMismatch("conv2d expects rank-4 input, got " + input.shape_str());
    if (p.kernel.rank() != 4)
        throw ShapeMismatch("conv kernel must be rank 4, got " + p.kernel.shape_str());
    if (p.groups < 1 || p.in_channels() % p.groups != 0 || p.out_channels() % p.groups != 0)
        throw InvalidGroups("groups=" + std::to_string(p.groups) + " must divide C_in=" +
                            std::to_string(p.in_channels()) + " and C_out=" +
                            std::to_string(p.out_channels()));
    if (input.dim(1) != p.in_channels())
        throw ShapeMismatch("input has " + std::to_string(input.dim(1)) +
                            " channels, kernel expects " + std::to_string(p.in_channels()));
    if (p.bias && p.bias->dim(0) != p.out_channels())
        throw ShapeMismatch("bias length " + std::to_string(p.bias->dim(0)) +
                            " != C_out " + std::to_string(p.out_channels()));
    const std::int64_t h_out = (input.dim(2) + 2 * p.pad_h - p.kernel_h()) / p.stride_h + 1;
    const std::int64_t w_out = (input.dim(3) + 2 * p.pad_w - p.kernel_w()) / p.stride_w + 1;
    if (input.dim(2) + 2 * p.pad_h < p.kernel_h() || input.dim(3) + 2 * p.pad_w < p.kernel_w() ||
        h_out < 1 || w_out < 1)
        throw ShapeMismatch("kernel larger than padded input");
}

inline Tensor conv2d(const Tensor& input, const ConvParams& p) {
    check_conv_args(input, p);
    const std::int64_t t_n = input.dim(0), c_in = input.dim(1);
    const std::int64_t h = input.dim(2), w = input.dim(3);
    const std::int64_t c_out = p.out_channels(), kh = p.kernel_h(), kw = p.kernel_w();
    const std::int64_t cg = c_in / p.groups;         // input channels per group
    const std::int64_t og = c_out / p.groups;        // output channels per group
    const std::int64_t h_out = (h + 2 * p.pad_h - kh) / p.stride_h + 1;
    const std::int64_t w_out = (w + 2 * p.pad_w - kw) / p.stride_w + 1;

    Tensor out({t_n, c_out, h_out, w_out});
    const float* in = input.data();
    const float* ker = p.kernel.data();
    float* dst = out.data();

    parallel_for(t_n * c_out, [&](std::int64_t job) {
        const std::int64_t t = job / c_out;
        const std::int64_t o = job % c_out;
        const std::int64_t g = o / og;
        const float b = p.bias ? (*p.bias)[o] : 0.0f;
        float* out_plane = dst + (t * c_out + o) * h_out * w_out;
        for (std::int64_t oy = 0; oy < h_out; ++oy) {
            for (std::int64_t ox = 0; ox < w_out; ++ox) {
                float acc = b;
                const std::int64_t iy0 = oy * p.stride_h - p.pad_h;
                const std::int64_t ix0 = ox * p.stride_w - p.pad_w;
                for (std::int64_t c = 0; c < cg; ++c) {
                    const float* in_plane = in + (t * c_in + g * cg + c) * h * w;
                    const float* kp = ker + ((o * cg + c) * kh) * kw;
                    for (std::int64_t ky = 0; ky < kh; ++ky) {
                        const std::int64_t iy = iy0 + ky;
                        if (iy < 0 || iy >= h) continue;
                        const float* row = in_plane + iy * w;
                        const float* krow = kp + ky * kw;
                        for (std::int64_t kx = 0; kx < kw; ++kx) {
                            const std::int64_t ix = ix0 + kx;
                            if (ix < 0 || ix >= w) continue;
                            acc += krow[kx] * row[ix];
                        }
                    }
                }
                out_plane[oy * w_out + ox] = acc;
            }
        }
    });
    return out;
}

/// Depthwise convolution: groups = C_in = C_out, one filter per channel.
inline Tensor depthwise_conv2d(const Tensor& input, const ConvParams& p) {
    if (p.groups != p.in_channels() || p.groups != p.out_channels() || p.kernel.dim(1) != 1)
        throw InvalidGroups("depthwise requires groups = C_in = C_out with 1 channel per group");
    return conv2d(input, p);
}

inline Tensor bn_apply(const Tensor& input, const BnParams& bn) {
    bn.validate();
    if (input.rank() < 2 || input.dim(1) != bn.channels())
        throw ShapeMismatch("bn expects channel axis 1 of length " +
                            std::to_string(bn.channels()) + ", input " + input.shape_str());
    const std::int64_t t_n = input.dim(0), c_n = input.dim(1);
    const std::int64_t plane = input.numel() / (t_n * c_n);
    Tensor out(input.shape());
    for (std::int64_t t = 0; t < t_n; ++t) {
        for (std::int64_t c = 0; c < c_n; ++c) {
            const float scale = bn.gamma[c] / std::sqrt(bn.running_var[c] + bn.epsilon);
            const float shift = bn.beta[c] - bn.running_mean[c] * scale;
            const float* src = input.data() + (t * c_n + c) * plane;
            float* dst = out.data() + (t * c_n + c) * plane;
            for (std::int64_t i = 0; i < plane; ++i) dst[i] = src[i] * scale + shift;
        }
    }
    return out;
}

/// Absorbs inference-time BN into the preceding convolution so the folded conv
/// reproduces bn_apply(conv2d(x, p), bn).
inline ConvParams fold_batch_norm(const ConvParams& p, const BnParams& bn) {
    bn.validate();
    if (bn.channels() != p.out_channels())
        throw ShapeMismatch("bn channels " + std::to_string(bn.channels()) +
                            " != conv C_out " + std::to_string(p.out_channels()));
    ConvParams folded = p;
    const std::int64_t c_out = p.out_channels();
    const std::int64_t per_filter = p.kernel.numel() / c_out;
    Tensor bias({c_out});
    for (std::int64_t o = 0; o < c_out; ++o) {
        const float scale = bn.gamma[o] / std::sqrt(bn.running_var[o] + bn.epsilon);
        float* kf = folded.kernel.data() + o * per_filter;
        for (std::int64_t i = 0; i < per_filter; ++i) kf[i] *= scale;
        const float b0 = p.bias ? (*p.bias)[o] : 0.0f;
        bias[o] = (b0 - bn.running_mean[o]) * scale + bn.beta[o];
    }
    folded.bias = std::move(bias);
    return folded;
}

inline Tensor activation(const Tensor& input, Activation kind) {
    Tensor out(input.shape());
    const float* src = input.data();
    float* dst = out.data();
    const std::int64_t n = input.numel();
    switch (kind) {
        case Activation::Relu:
            for (std::int64_t i = 0; i < n; ++i) dst[i] = src[i] > 0.0f ? src[i] : 0.0f;
            break;
        case Activation::Relu6:
            for (std::int64_t i = 0; i < n; ++i)
                dst[i] = std::min(std::max(src[i], 0.0f), 6.0f);
            break;
        case Activation::Sigmoid:
            for (std::int64_t i = 0; i < n; ++i) dst[i] = 1.0f / (1.0f + std::exp(-src[i]));
            break;
    }
    return out;
}

inline Tensor global_avg_pool(const Tensor& input) {
    if (input.rank() != 4) throw ShapeMismatch("gap expects rank-4 input");
    const std::int64_t t_n = input.dim(0), c_n = input.dim(1);
    const std::int64_t plane = input.dim(2) * input.dim(3);
    Tensor out({t_n, c_n, 1, 1});
    for (std::int64_t t = 0; t < t_n; ++t) {
        for (std::int64_t c = 0; c < c_n; ++c) {
            const float* src = input.data() + (t * c_n + c) * plane;
            float acc = 0.0f;
            for (std::int64_t i = 0; i < plane; ++i) acc += src[i];
            out.at4(t, c, 0, 0) = acc / static_cast<float>(plane);
        }
    }
    return out;
}

/// out = input . weight^T + bias; input [T, C_in], weight [C_out, C_in].
inline Tensor linear(const Tensor& input, const Tensor& weight,
                     const std::optional<Tensor>& bias = std::nullopt) {
    if (input.rank() != 2 || weight.rank() != 2 || input.dim(1) != weight.dim(1))
        throw ShapeMismatch("linear: input " + input.shape_str() + " vs weight " +
                            weight.shape_str());
    const std::int64_t t_n = input.dim(0), c_in = input.dim(1), c_out = weight.dim(0);
    if (bias && bias->dim(0) != c_out) throw ShapeMismatch("linear bias length");
    Tensor out({t_n, c_out});
    parallel_for(t_n, [&](std::int64_t t) {
        const float* row = input.data() + t * c_in;
        for (std::int64_t o = 0; o < c_out; ++o) {
            const float* wrow = weight.data() + o * c_in;
            float acc = bias ? (*bias)[o] : 0.0f;
            for (std::int64_t c = 0; c < c_in; ++c) acc += row[c] * wrow[c];
            out.at2(t, o) = acc;
        }
    });
    return out;
}

/// Numerically stable row softmax over [T, C].
inline Tensor softmax(const Tensor& input) {
    if (input.rank() != 2) throw ShapeMismatch("softmax expects rank-2 input");
    const std::int64_t t_n = input.dim(0), c_n = input.dim(1);
    Tensor out(input.shape());
    for (std::int64_t t = 0; t < t_n; ++t) {
        const float* row = input.data() + t * c_n;
        float* dst = out.data() + t * c_n;
        float mx = row[0];
        for (std::int64_t c = 1; c < c_n; ++c) mx = std::max(mx, row[c]);
        float sum = 0.0f;
        for (std::int64_t c = 0; c < c_n; ++c) {
            dst[c] = std::exp(row[c] - mx);
            sum += dst[c];
        }
        for (std::int64_t c = 0; c < c_n; ++c) dst[c] /= sum;
    }
    return out;
}

inline Tensor tensor_add(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw ShapeMismatch("add: " + a.shape_str() + " vs " + b.shape_str());
    Tensor out(a.shape());
    const std::int64_t n = a.numel();
    for (std::int64_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
    return out;
}

}  // namespace rtar
