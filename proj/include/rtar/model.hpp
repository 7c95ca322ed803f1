#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "rtar/blocks.hpp"
#include "rtar/weights.hpp"

namespace rtar {

enum class LayerKind { Conv, DwConv, Bn, Act, MbConv, Se, Tsm, Gap, Linear, Dropout, Softmax };

inline std::string layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::Conv: return "conv";
        case LayerKind::DwConv: return "dwconv";
        case LayerKind::Bn: return "bn";
        case LayerKind::Act: return "act";
        case LayerKind::MbConv: return "mbconv";
        case LayerKind::Se: return "se";
        case LayerKind::Tsm: return "tsm";
        case LayerKind::Gap: return "gap";
        case LayerKind::Linear: return "linear";
        case LayerKind::Dropout: return "dropout";
        case LayerKind::Softmax: return "softmax";
    }
    return "?";
}

/// One layer of a declarative model description. Fields are kind-specific;
/// unused ones keep their defaults.
struct LayerSpec {
    LayerKind kind = LayerKind::Conv;
    std::string name;

    std::int64_t out_ch = 0;     // conv, mbconv, linear
    std::int64_t kernel = 3;     // conv, dwconv, mbconv
    std::int64_t stride = 1;     // conv, dwconv, mbconv
    std::int64_t pad = -1;       // conv, dwconv; -1 = (kernel-1)/2
    std::int64_t expansion = 1;  // mbconv
    std::int64_t se_reduction = 0;  // mbconv (0 = no SE), se
    bool tsm = false;               // mbconv: shift before the depthwise stage
    double tsm_fraction = 0.125;    // tsm, mbconv
    double dropout_ratio = 0.0;     // dropout
    std::int64_t declared_in = 0;   // linear: optional declared in-features
    Activation act = Activation::Relu6;

    std::int64_t effective_pad() const { return pad >= 0 ? pad : (kernel - 1) / 2; }
    bool uses_tsm() const { return kind == LayerKind::Tsm || (kind == LayerKind::MbConv && tsm); }
};

struct ModelSpec {
    std::string name;
    std::int64_t in_ch = 3, in_h = 224, in_w = 224;
    std::int64_t num_classes = 0;
    std::vector<LayerSpec> layers;

    bool has_tsm() const {
        for (const auto& l : layers)
            if (l.uses_tsm()) return true;
        return false;
    }
    bool ends_with_softmax() const {
        return !layers.empty() && layers.back().kind == LayerKind::Softmax;
    }
};

struct LayerShape {
    std::int64_t c = 0, h = 0, w = 0;  // h=w=0 means flattened [T,C]
    bool flat() const { return h == 0; }
};

/// Propagates the frame shape through every layer, validating consistency.
/// Returns the shape *after* each layer.
inline std::vector<LayerShape> propagate_shapes(const ModelSpec& spec) {
    std::vector<LayerShape> out;
    LayerShape s{spec.in_ch, spec.in_h, spec.in_w};
    std::set<std::string> names;
    bool saw_softmax = false;
    for (const auto& l : spec.layers) {
        if (l.name.empty()) throw ValidationError("layer with empty name");
        if (!names.insert(l.name).second)
            throw ValidationError("duplicate layer name '" + l.name + "'");
        if (saw_softmax)
            throw ValidationError("softmax must be the last layer ('" + l.name + "' follows it)");
        auto conv_out = [&](std::int64_t k, std::int64_t stride, std::int64_t pad,
                            std::int64_t c_out) {
            if (s.flat()) throw ValidationError("'" + l.name + "': conv after flatten");
            const std::int64_t h = (s.h + 2 * pad - k) / stride + 1;
            const std::int64_t w = (s.w + 2 * pad - k) / stride + 1;
            if (s.h + 2 * pad < k || s.w + 2 * pad < k || h < 1 || w < 1)
                throw ValidationError("'" + l.name + "': kernel exceeds padded input");
            s = {c_out, h, w};
        };
        switch (l.kind) {
            case LayerKind::Conv:
                if (l.out_ch < 1) throw ValidationError("'" + l.name + "': conv needs out>0");
                conv_out(l.kernel, l.stride, l.effective_pad(), l.out_ch);
                break;
            case LayerKind::DwConv:
                conv_out(l.kernel, l.stride, l.effective_pad(), s.c);
                break;
            case LayerKind::Bn:
            case LayerKind::Act:
            case LayerKind::Dropout:
                break;
            case LayerKind::MbConv: {
                if (l.out_ch < 1 || l.expansion < 1 || l.kernel % 2 == 0 ||
                    (l.stride != 1 && l.stride != 2))
                    throw ValidationError("'" + l.name + "': bad mbconv parameters");
                if (l.se_reduction > 0 && s.c * l.expansion / l.se_reduction < 1)
                    throw ValidationError("'" + l.name + "': se bottleneck collapses to zero");
                conv_out(l.kernel, l.stride, (l.kernel - 1) / 2, l.out_ch);
                break;
            }
            case LayerKind::Se:
                if (s.flat() || l.se_reduction < 1 || s.c / l.se_reduction < 1)
                    throw ValidationError("'" + l.name + "': bad se placement or reduction");
                break;
            case LayerKind::Tsm:
                if (s.flat()) throw ValidationError("'" + l.name + "': tsm after flatten");
                if (2 * static_cast<std::int64_t>(s.c * l.tsm_fraction) > s.c)
                    throw ValidationError("'" + l.name + "': tsm fraction too large");
                break;
            case LayerKind::Gap:
                if (s.flat()) throw ValidationError("'" + l.name + "': gap after flatten");
                s = {s.c, 0, 0};
                break;
            case LayerKind::Linear: {
                if (!s.flat() && (s.h != 1 || s.w != 1))
                    throw ValidationError("'" + l.name + "': linear needs pooled input");
                if (l.declared_in > 0 && l.declared_in != s.c)
                    throw ValidationError("'" + l.name + "': declared in-features " +
                                          std::to_string(l.declared_in) +
                                          " contradicts incoming channels " +
                                          std::to_string(s.c));
                if (l.out_ch < 1) throw ValidationError("'" + l.name + "': linear needs out>0");
                s = {l.out_ch, 0, 0};
                break;
            }
            case LayerKind::Softmax:
                if (!s.flat() && (s.h != 1 || s.w != 1))
                    throw ValidationError("'" + l.name + "': softmax needs vector input");
                saw_softmax = true;
                s = {s.c, 0, 0};
                break;
        }
        out.push_back(s);
    }
    if (out.empty()) throw ValidationError("model has no layers");
    if (s.c != spec.num_classes || (!s.flat() && (s.h != 1 || s.w != 1)))
        throw ValidationError("model output has " + std::to_string(s.c) +
                              " features, expected num_classes " +
                              std::to_string(spec.num_classes));
    return out;
}

namespace detail {

inline Activation parse_act(const std::string& s) {
    if (s == "relu") return Activation::Relu;
    if (s == "relu6") return Activation::Relu6;
    if (s == "sigmoid") return Activation::Sigmoid;
    throw ParseError("unknown activation '" + s + "'");
}

inline LayerKind parse_kind(const std::string& s) {
    static const std::map<std::string, LayerKind> kinds = {
        {"conv", LayerKind::Conv},     {"dwconv", LayerKind::DwConv},
        {"bn", LayerKind::Bn},         {"act", LayerKind::Act},
        {"mbconv", LayerKind::MbConv}, {"se", LayerKind::Se},
        {"tsm", LayerKind::Tsm},       {"gap", LayerKind::Gap},
        {"linear", LayerKind::Linear}, {"dropout", LayerKind::Dropout},
        {"softmax", LayerKind::Softmax}};
    auto it = kinds.find(s);
    if (it == kinds.end()) throw ParseError("unknown layer kind '" + s + "'");
    return it->second;
}

}  // namespace detail

/// Parses the plain-text model description: one directive per line,
/// `model`/`input`/`classes` headers then ordered `layer KIND NAME k=v...`
/// lines. '#' starts a comment. Shape-validates before returning.
inline ModelSpec parse_model_spec(const std::string& text) {
    ModelSpec spec;
    bool have_input = false, have_classes = false;
    std::istringstream stream(text);
    std::string line;
    int lineno = 0;
    while (std::getline(stream, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;
        auto fail = [&](const std::string& msg) {
            throw ParseError("line " + std::to_string(lineno) + ": " + msg);
        };
        if (word == "model") {
            if (!(ls >> spec.name)) fail("model needs a name");
        } else if (word == "input") {
            if (!(ls >> spec.in_ch >> spec.in_h >> spec.in_w) || spec.in_ch < 1 ||
                spec.in_h < 1 || spec.in_w < 1)
                fail("input needs three positive extents C H W");
            have_input = true;
        } else if (word == "classes") {
            if (!(ls >> spec.num_classes) || spec.num_classes < 1)
                fail("classes needs a positive count");
            have_classes = true;
        } else if (word == "layer") {
            LayerSpec l;
            std::string kind;
            if (!(ls >> kind >> l.name)) fail("layer needs a kind and a name");
            l.kind = detail::parse_kind(kind);
            std::string kv;
            while (ls >> kv) {
                const auto eq = kv.find('=');
                if (eq == std::string::npos) fail("expected key=value, got '" + kv + "'");
                const std::string key = kv.substr(0, eq);
                const std::string val = kv.substr(eq + 1);
                try {
                    if (key == "out") l.out_ch = std::stoll(val);
                    else if (key == "k") l.kernel = std::stoll(val);
                    else if (key == "s") l.stride = std::stoll(val);
                    else if (key == "p") l.pad = std::stoll(val);
                    else if (key == "expand") l.expansion = std::stoll(val);
                    else if (key == "se") l.se_reduction = std::stoll(val);
                    else if (key == "tsm") l.tsm = std::stoll(val) != 0;
                    else if (key == "frac") l.tsm_fraction = std::stod(val);
                    else if (key == "ratio") l.dropout_ratio = std::stod(val);
                    else if (key == "in") l.declared_in = std::stoll(val);
                    else if (key == "kind") l.act = detail::parse_act(val);
                    else fail("unknown key '" + key + "'");
                } catch (const std::invalid_argument&) {
                    fail("bad value for '" + key + "': '" + val + "'");
                }
            }
            spec.layers.push_back(l);
        } else {
            fail("unknown directive '" + word + "'");
        }
    }
    if (spec.name.empty()) throw ParseError("missing 'model' directive");
    if (!have_input) throw ParseError("missing 'input' directive");
    if (!have_classes) throw ParseError("missing 'classes' directive");
    propagate_shapes(spec);  // throws ValidationError on inconsistency
    return spec;
}

inline ModelSpec parse_model_spec_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open model spec: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return parse_model_spec(text);
}

// -------------------------------------------------------------------------
// Network construction

struct BuiltLayer {
    LayerSpec spec;
    LayerShape in_shape;  // shape entering this layer
    std::optional<ConvParams> conv;      // conv / dwconv
    std::optional<BnParams> bn;          // bn
    std::optional<MbConvSpec> mb_spec;   // mbconv
    std::optional<MbConvWeights> mb_w;   // mbconv
    std::optional<SeWeights> se_w;       // se
    std::optional<Tensor> lin_weight;    // linear
    std::optional<Tensor> lin_bias;      // linear
};

/// Executable network. Forward is per-frame independent except for TSM layers,
/// which couple the T axis; the frame-forward counter instruments how many
/// frame inferences have run.
class Network {
public:
    Network(ModelSpec spec, std::vector<BuiltLayer> layers, std::int64_t num_frames)
        : spec_(std::move(spec)), layers_(std::move(layers)), num_frames_(num_frames) {}

    const ModelSpec& spec() const { return spec_; }
    std::int64_t num_frames() const { return num_frames_; }
    bool has_tsm() const { return spec_.has_tsm(); }

    std::int64_t frame_forwards() const { return frame_forwards_; }
    void reset_counter() { frame_forwards_ = 0; }

    /// Runs all layers including any trailing softmax.
    Tensor forward(const Tensor& input) { return run(input, false); }

    /// Runs all layers except a trailing softmax; yields raw class scores for
    /// score aggregation.
    Tensor forward_scores(const Tensor& input) { return run(input, true); }

    /// Folds every bn layer into the immediately preceding conv/dwconv layer,
    /// removing the bn layers. Output is unchanged up to rounding.
    void fold_batch_norms() {
        std::vector<BuiltLayer> folded;
        for (auto& l : layers_) {
            if (l.spec.kind == LayerKind::Bn && !folded.empty() && folded.back().conv) {
                folded.back().conv = fold_batch_norm(*folded.back().conv, *l.bn);
                continue;
            }
            folded.push_back(std::move(l));
        }
        layers_ = std::move(folded);
    }

private:
    Tensor run(const Tensor& input, bool skip_trailing_softmax) {
        if (input.rank() != 4 || input.dim(1) != spec_.in_ch || input.dim(2) != spec_.in_h ||
            input.dim(3) != spec_.in_w)
            throw ShapeMismatch("network input " + input.shape_str() + ", expected [T," +
                                std::to_string(spec_.in_ch) + "," + std::to_string(spec_.in_h) +
                                "," + std::to_string(spec_.in_w) + "]");
        if (has_tsm() && input.dim(0) != num_frames_)
            throw FrameCountMismatch("network built for " + std::to_string(num_frames_) +
                                     " frames, got " + std::to_string(input.dim(0)));
        frame_forwards_ += input.dim(0);
        Tensor x = input;
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            const auto& l = layers_[i];
            const bool last = i + 1 == layers_.size();
            switch (l.spec.kind) {
                case LayerKind::Conv: x = conv2d(x, *l.conv); break;
                case LayerKind::DwConv: x = depthwise_conv2d(x, *l.conv); break;
                case LayerKind::Bn: x = bn_apply(x, *l.bn); break;
                case LayerKind::Act: x = activation(x, l.spec.act); break;
                case LayerKind::MbConv: {
                    if (l.spec.tsm)
                        x = tsm_shift(x, TsmSpec{l.spec.tsm_fraction, x.dim(0)});
                    x = mbconv_forward(x, *l.mb_spec, *l.mb_w);
                    break;
                }
                case LayerKind::Se: {
                    SeSpec se{x.dim(1), l.spec.se_reduction};
                    x = se_apply(x, se, l.se_w->w1, l.se_w->b1, l.se_w->w2, l.se_w->b2);
                    break;
                }
                case LayerKind::Tsm:
                    x = tsm_shift(x, TsmSpec{l.spec.tsm_fraction, x.dim(0)});
                    break;
                case LayerKind::Gap:
                    x = global_avg_pool(x);
                    x = Tensor({x.dim(0), x.dim(1)}, x.vec());
                    break;
                case LayerKind::Linear:
                    if (x.rank() == 4) x = Tensor({x.dim(0), x.dim(1)}, x.vec());
                    x = linear(x, *l.lin_weight, l.lin_bias);
                    break;
                case LayerKind::Dropout: x = dropout_inference(x, (float)l.spec.dropout_ratio); break;
                case LayerKind::Softmax:
                    if (x.rank() == 4) x = Tensor({x.dim(0), x.dim(1)}, x.vec());
                    if (!(last && skip_trailing_softmax)) x = softmax(x);
                    break;
            }
        }
        return x;
    }

    ModelSpec spec_;
    std::vector<BuiltLayer> layers_;
    std::int64_t num_frames_;
    std::int64_t frame_forwards_ = 0;
};

namespace detail {

inline Tensor fetch(const WeightStore& w, const std::string& key,
                    const std::vector<std::int64_t>& shape) {
    const Tensor& t = w.get(key);
    if (t.shape() != shape) {
        Tensor want(shape);
        throw ShapeMismatch("weight '" + key + "' has shape " + t.shape_str() + ", expected " +
                            want.shape_str());
    }
    return t;
}

inline ConvParams fetch_conv(const WeightStore& w, const std::string& prefix,
                             std::int64_t c_out, std::int64_t c_in_per_group, std::int64_t k,
                             std::int64_t stride, std::int64_t pad, std::int64_t groups) {
    ConvParams p;
    p.kernel = fetch(w, prefix + ".kernel", {c_out, c_in_per_group, k, k});
    p.bias = fetch(w, prefix + ".bias", {c_out});
    p.stride_h = p.stride_w = stride;
    p.pad_h = p.pad_w = pad;
    p.groups = groups;
    return p;
}

inline SeWeights fetch_se(const WeightStore& w, const std::string& prefix, std::int64_t c,
                          std::int64_t reduction) {
    const std::int64_t mid = c / reduction;
    return SeWeights{fetch(w, prefix + ".w1", {mid, c}), fetch(w, prefix + ".b1", {mid}),
                     fetch(w, prefix + ".w2", {c, mid}), fetch(w, prefix + ".b2", {c})};
}

}  // namespace detail

inline Network build_network(const ModelSpec& spec, const WeightStore& weights,
                             std::int64_t num_frames = 1) {
    const auto shapes = propagate_shapes(spec);
    if (spec.has_tsm() && num_frames < 1)
        throw InvalidArgs("tsm model needs a positive frame count");
    std::vector<BuiltLayer> built;
    LayerShape in{spec.in_ch, spec.in_h, spec.in_w};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        BuiltLayer b;
        b.spec = l;
        b.in_shape = in;
        switch (l.kind) {
            case LayerKind::Conv:
                b.conv = detail::fetch_conv(weights, l.name, l.out_ch, in.c, l.kernel, l.stride,
                                            l.effective_pad(), 1);
                break;
            case LayerKind::DwConv:
                b.conv = detail::fetch_conv(weights, l.name, in.c, 1, l.kernel, l.stride,
                                            l.effective_pad(), in.c);
                break;
            case LayerKind::Bn: {
                BnParams bn;
                bn.gamma = detail::fetch(weights, l.name + ".gamma", {in.c});
                bn.beta = detail::fetch(weights, l.name + ".beta", {in.c});
                bn.running_mean = detail::fetch(weights, l.name + ".mean", {in.c});
                bn.running_var = detail::fetch(weights, l.name + ".var", {in.c});
                bn.epsilon = 1e-5f;
                b.bn = std::move(bn);
                break;
            }
            case LayerKind::MbConv: {
                MbConvSpec mb;
                mb.in_ch = in.c;
                mb.out_ch = l.out_ch;
                mb.expansion = l.expansion;
                mb.kernel = l.kernel;
                mb.stride = l.stride;
                mb.se_ratio = l.se_reduction > 0 ? 1.0 / (double)l.se_reduction : 0.0;
                mb.act = l.act;
                MbConvWeights mw;
                const std::int64_t mid = mb.expanded_ch();
                if (l.expansion > 1)
                    mw.expand = detail::fetch_conv(weights, l.name + ".expand", mid, in.c, 1, 1, 0, 1);
                mw.dw = detail::fetch_conv(weights, l.name + ".dw", mid, 1, l.kernel, l.stride,
                                           (l.kernel - 1) / 2, mid);
                if (l.se_reduction > 0)
                    mw.se = detail::fetch_se(weights, l.name + ".se", mid, l.se_reduction);
                mw.project = detail::fetch_conv(weights, l.name + ".project", l.out_ch, mid, 1, 1, 0, 1);
                b.mb_spec = mb;
                b.mb_w = std::move(mw);
                break;
            }
            case LayerKind::Se:
                b.se_w = detail::fetch_se(weights, l.name, in.c, l.se_reduction);
                break;
            case LayerKind::Linear:
                b.lin_weight = detail::fetch(weights, l.name + ".weight", {l.out_ch, in.c});
                b.lin_bias = detail::fetch(weights, l.name + ".bias", {l.out_ch});
                break;
            default: break;
        }
        built.push_back(std::move(b));
        in = shapes[i];
    }
    return Network(spec, std::move(built), num_frames);
}

/// Deterministic seeded weights: conv/linear from a zero-mean normal scaled by
/// 1/sqrt(fan_in), biases zero, BN at identity.
inline WeightStore init_random_weights(const ModelSpec& spec, std::uint64_t seed) {
    propagate_shapes(spec);
    std::mt19937_64 rng(seed);
    WeightStore store;
    auto randn = [&](const std::vector<std::int64_t>& shape, std::int64_t fan_in) {
        Tensor t(shape);
        std::normal_distribution<float> dist(0.0f, 1.0f / std::sqrt((float)fan_in));
        for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = dist(rng);
        return t;
    };
    auto zeros = [](std::int64_t n) { return Tensor({n}); };
    auto add_conv = [&](const std::string& prefix, std::int64_t c_out, std::int64_t c_in_pg,
                        std::int64_t k) {
        store.put(prefix + ".kernel", randn({c_out, c_in_pg, k, k}, c_in_pg * k * k));
        store.put(prefix + ".bias", zeros(c_out));
    };
    LayerShape in{spec.in_ch, spec.in_h, spec.in_w};
    const auto shapes = propagate_shapes(spec);
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const LayerSpec& l = spec.layers[i];
        switch (l.kind) {
            case LayerKind::Conv: add_conv(l.name, l.out_ch, in.c, l.kernel); break;
            case LayerKind::DwConv: add_conv(l.name, in.c, 1, l.kernel); break;
            case LayerKind::Bn: {
                store.put(l.name + ".gamma", Tensor({in.c}, 1.0f));
                store.put(l.name + ".beta", zeros(in.c));
                store.put(l.name + ".mean", zeros(in.c));
                store.put(l.name + ".var", Tensor({in.c}, 1.0f));
                break;
            }
            case LayerKind::MbConv: {
                const std::int64_t mid = in.c * l.expansion;
                if (l.expansion > 1) add_conv(l.name + ".expand", mid, in.c, 1);
                add_conv(l.name + ".dw", mid, 1, l.kernel);
                if (l.se_reduction > 0) {
                    const std::int64_t bott = mid / l.se_reduction;
                    store.put(l.name + ".se.w1", randn({bott, mid}, mid));
                    store.put(l.name + ".se.b1", zeros(bott));
                    store.put(l.name + ".se.w2", randn({mid, bott}, bott));
                    store.put(l.name + ".se.b2", zeros(mid));
                }
                add_conv(l.name + ".project", l.out_ch, mid, 1);
                break;
            }
            case LayerKind::Se: {
                const std::int64_t bott = in.c / l.se_reduction;
                store.put(l.name + ".w1", randn({bott, in.c}, in.c));
                store.put(l.name + ".b1", zeros(bott));
                store.put(l.name + ".w2", randn({in.c, bott}, bott));
                store.put(l.name + ".b2", zeros(in.c));
                break;
            }
            case LayerKind::Linear:
                store.put(l.name + ".weight", randn({l.out_ch, in.c}, in.c));
                store.put(l.name + ".bias", zeros(l.out_ch));
                break;
            default: break;
        }
        in = shapes[i];
    }
    return store;
}

}  // namespace rtar
