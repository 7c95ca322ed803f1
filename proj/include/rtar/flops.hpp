#pragma once

#include <cstdint>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include "rtar/model.hpp"

namespace rtar {

/// Cost of one layer. FLOPs follow the multiply-add-as-one convention; bias
/// additions are not counted. Elementwise ops (activations, residual adds,
/// pooling, softmax) are counted at one op per element so totals are exactly
/// reproducible; BN, TSM and dropout cost zero at inference.
struct LayerCost {
    std::string name;
    std::string kind;
    std::int64_t flops = 0;
    std::int64_t params = 0;
};

struct FlopsReport {
    std::string model;
    std::vector<LayerCost> per_layer;
    std::int64_t total_flops = 0;
    std::int64_t total_params = 0;
    std::int64_t frames = 1;
    std::int64_t clip_flops = 0;  // frames * total_flops, exact
};

namespace detail {

inline std::int64_t conv_flops(std::int64_t k, std::int64_t c_in_per_group, std::int64_t c_out,
                               std::int64_t h_out, std::int64_t w_out) {
    return k * k * c_in_per_group * c_out * h_out * w_out;
}

// gap + two FC + relu + sigmoid + channel rescale
inline std::int64_t se_flops(std::int64_t c, std::int64_t mid, std::int64_t h, std::int64_t w) {
    return c * h * w + c * mid + mid + mid * c + c + c * h * w;
}

inline std::int64_t se_params(std::int64_t c, std::int64_t mid) {
    return mid * c + mid + c * mid + c;
}

}  // namespace detail

inline LayerCost count_layer(const LayerSpec& l, const LayerShape& in) {
    LayerCost cost{l.name, layer_kind_name(l.kind), 0, 0};
    auto out_hw = [&](std::int64_t k, std::int64_t stride, std::int64_t pad) {
        return std::pair{(in.h + 2 * pad - k) / stride + 1, (in.w + 2 * pad - k) / stride + 1};
    };
    switch (l.kind) {
        case LayerKind::Conv: {
            auto [ho, wo] = out_hw(l.kernel, l.stride, l.effective_pad());
            if (ho < 1 || wo < 1) throw ShapeMismatch("conv output collapses");
            cost.flops = detail::conv_flops(l.kernel, in.c, l.out_ch, ho, wo);
            cost.params = l.out_ch * in.c * l.kernel * l.kernel + l.out_ch;
            break;
        }
        case LayerKind::DwConv: {
            auto [ho, wo] = out_hw(l.kernel, l.stride, l.effective_pad());
            if (ho < 1 || wo < 1) throw ShapeMismatch("dwconv output collapses");
            cost.flops = detail::conv_flops(l.kernel, 1, in.c, ho, wo);
            cost.params = in.c * l.kernel * l.kernel + in.c;
            break;
        }
        case LayerKind::Bn:
            cost.params = 4 * in.c;  // folded at inference, zero flops
            break;
        case LayerKind::Act:
            cost.flops = in.flat() ? in.c : in.c * in.h * in.w;
            break;
        case LayerKind::MbConv: {
            const std::int64_t mid = in.c * l.expansion;
            auto [ho, wo] = out_hw(l.kernel, l.stride, (l.kernel - 1) / 2);
            if (ho < 1 || wo < 1) throw ShapeMismatch("mbconv output collapses");
            std::int64_t f = 0, p = 0;
            if (l.expansion > 1) {
                f += detail::conv_flops(1, in.c, mid, in.h, in.w);  // expand 1x1
                f += mid * in.h * in.w;                             // activation
                p += mid * in.c + mid;
            }
            f += detail::conv_flops(l.kernel, 1, mid, ho, wo);  // depthwise
            f += mid * ho * wo;                                 // activation
            p += mid * l.kernel * l.kernel + mid;
            if (l.se_reduction > 0) {
                f += detail::se_flops(mid, mid / l.se_reduction, ho, wo);
                p += detail::se_params(mid, mid / l.se_reduction);
            }
            f += detail::conv_flops(1, mid, l.out_ch, ho, wo);  // project 1x1
            p += l.out_ch * mid + l.out_ch;
            if (l.stride == 1 && in.c == l.out_ch) f += l.out_ch * ho * wo;  // residual add
            cost.flops = f;  // tsm placement adds nothing
            cost.params = p;
            break;
        }
        case LayerKind::Se:
            cost.flops = detail::se_flops(in.c, in.c / l.se_reduction, in.h, in.w);
            cost.params = detail::se_params(in.c, in.c / l.se_reduction);
            break;
        case LayerKind::Tsm:
            break;  // zero-cost data movement
        case LayerKind::Gap:
            cost.flops = in.c * in.h * in.w;
            break;
        case LayerKind::Linear:
            cost.flops = in.c * l.out_ch;
            cost.params = l.out_ch * in.c + l.out_ch;
            break;
        case LayerKind::Dropout:
            break;  // inference identity
        case LayerKind::Softmax:
            cost.flops = in.c;
            break;
    }
    return cost;
}

/// Per-frame cost of a whole model (frames = 1).
inline FlopsReport count_model(const ModelSpec& spec) {
    const auto shapes = propagate_shapes(spec);
    FlopsReport report;
    report.model = spec.name;
    LayerShape in{spec.in_ch, spec.in_h, spec.in_w};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        LayerCost c = count_layer(spec.layers[i], in);
        report.total_flops += c.flops;
        report.total_params += c.params;
        report.per_layer.push_back(std::move(c));
        in = shapes[i];
    }
    report.frames = 1;
    report.clip_flops = report.total_flops;
    return report;
}

/// TSN clip cost: exactly frames x the per-frame cost.
inline FlopsReport count_clip(const ModelSpec& spec, std::int64_t frames) {
    if (frames < 1) throw InvalidArgs("frames must be >= 1");
    FlopsReport report = count_model(spec);
    report.frames = frames;
    report.clip_flops = frames * report.total_flops;
    return report;
}

/// Byte-stable JSON emission (fixed key order, no whitespace variance).
inline std::string flops_report_json(const FlopsReport& r) {
    std::ostringstream os;
    os << "{\"model\":\"" << r.model << "\",\"frames\":" << r.frames << ",\"per_layer\":[";
    for (std::size_t i = 0; i < r.per_layer.size(); ++i) {
        const auto& l = r.per_layer[i];
        if (i) os << ",";
        os << "{\"name\":\"" << l.name << "\",\"kind\":\"" << l.kind
           << "\",\"flops\":" << l.flops << ",\"params\":" << l.params << "}";
    }
    os << "],\"total_flops\":" << r.total_flops << ",\"total_params\":" << r.total_params
       << ",\"clip_flops\":" << r.clip_flops << "}";
    return os.str();
}

inline std::string flops_report_table(const FlopsReport& r) {
    std::ostringstream os;
    os << std::left << std::setw(24) << "layer" << std::setw(10) << "kind" << std::right
       << std::setw(16) << "flops" << std::setw(14) << "params" << "\n";
    for (const auto& l : r.per_layer)
        os << std::left << std::setw(24) << l.name << std::setw(10) << l.kind << std::right
           << std::setw(16) << l.flops << std::setw(14) << l.params << "\n";
    os << std::left << std::setw(24) << "total" << std::setw(10) << "" << std::right
       << std::setw(16) << r.total_flops << std::setw(14) << r.total_params << "\n";
    os << std::left << std::setw(24) << ("clip (x" + std::to_string(r.frames) + ")")
       << std::setw(10) << "" << std::right << std::setw(16) << r.clip_flops << "\n";
    return os.str();
}

}  // namespace rtar
