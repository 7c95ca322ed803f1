#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <random>
#include <vector>

#include "rtar/model.hpp"

namespace rtar {

/// ImageNet-convention preprocessing constants; the upstream protocol leaves
/// them open, these are the ones the pretrained backbones assume.
inline constexpr float kNormMean[3] = {0.485f, 0.456f, 0.406f};
inline constexpr float kNormStd[3] = {0.229f, 0.224f, 0.225f};
inline constexpr std::int64_t kDefaultSegments = 8;

enum class SampleMode { Center, Random };

/// TSN segment plan: k contiguous segments partitioning [0, N) and the one
/// frame chosen from each.
struct SegmentPlan {
    std::int64_t num_frames_available = 0;
    std::int64_t num_segments = 0;
    std::vector<std::pair<std::int64_t, std::int64_t>> boundaries;  // [start, end)
    std::vector<std::int64_t> chosen;
};

/// Segment boundaries are floor(i*N/k); center mode picks the segment middle,
/// random mode draws uniformly in-segment. Empty segments (N < k) fall back to
/// the clamped center index, so short clips yield duplicate frames rather than
/// an error.
inline SegmentPlan plan_segments(std::int64_t num_frames, std::int64_t segments,
                                 SampleMode mode = SampleMode::Center,
                                 std::uint64_t seed = 0) {
    if (num_frames < 1 || segments < 1)
        throw InvalidArgs("plan_segments needs N >= 1 and k >= 1");
    SegmentPlan plan;
    plan.num_frames_available = num_frames;
    plan.num_segments = segments;
    std::mt19937_64 rng(seed);
    for (std::int64_t i = 0; i < segments; ++i) {
        const std::int64_t start = i * num_frames / segments;
        const std::int64_t end = (i + 1) * num_frames / segments;
        plan.boundaries.emplace_back(start, end);
        std::int64_t pick;
        if (mode == SampleMode::Random && end > start) {
            std::uniform_int_distribution<std::int64_t> dist(start, end - 1);
            pick = dist(rng);
        } else {
            pick = (start + end) / 2;
        }
        plan.chosen.push_back(std::clamp<std::int64_t>(pick, 0, num_frames - 1));
    }
    return plan;
}

/// Raw 8-bit RGB frame, row-major.
struct Frame {
    std::int64_t width = 0, height = 0;
    std::vector<std::uint8_t> pixels;  // width*height*3

    void validate() const {
        if (width < 1 || height < 1)
            throw InvalidFrame("zero dimension " + std::to_string(width) + "x" +
                               std::to_string(height));
        if (static_cast<std::int64_t>(pixels.size()) != width * height * 3)
            throw InvalidFrame("pixel buffer size " + std::to_string(pixels.size()) +
                               " != " + std::to_string(width * height * 3));
    }
};

/// Bilinear resize straight to the target (single crop-free resize, no
/// augmentation), scale to [0,1], then per-channel mean/std normalization.
/// Output layout [1, 3, H, W].
inline Tensor preprocess(const Frame& frame, std::int64_t target_h, std::int64_t target_w) {
    frame.validate();
    if (target_h < 1 || target_w < 1) throw InvalidArgs("preprocess target must be positive");
    Tensor out({1, 3, target_h, target_w});
    const float scale_y = static_cast<float>(frame.height) / static_cast<float>(target_h);
    const float scale_x = static_cast<float>(frame.width) / static_cast<float>(target_w);
    for (std::int64_t y = 0; y < target_h; ++y) {
        // half-pixel-center mapping, clamped at the borders
        const float sy = std::max(0.0f, (static_cast<float>(y) + 0.5f) * scale_y - 0.5f);
        const std::int64_t y0 = std::min<std::int64_t>(static_cast<std::int64_t>(sy),
                                                       frame.height - 1);
        const std::int64_t y1 = std::min<std::int64_t>(y0 + 1, frame.height - 1);
        const float fy = sy - static_cast<float>(y0);
        for (std::int64_t x = 0; x < target_w; ++x) {
            const float sx = std::max(0.0f, (static_cast<float>(x) + 0.5f) * scale_x - 0.5f);
            const std::int64_t x0 = std::min<std::int64_t>(static_cast<std::int64_t>(sx),
                                                           frame.width - 1);
            const std::int64_t x1 = std::min<std::int64_t>(x0 + 1, frame.width - 1);
            const float fx = sx - static_cast<float>(x0);
            for (std::int64_t c = 0; c < 3; ++c) {
                auto px = [&](std::int64_t yy, std::int64_t xx) {
                    return static_cast<float>(frame.pixels[(yy * frame.width + xx) * 3 + c]);
                };
                const float top = px(y0, x0) * (1.0f - fx) + px(y0, x1) * fx;
                const float bot = px(y1, x0) * (1.0f - fx) + px(y1, x1) * fx;
                const float v = (top * (1.0f - fy) + bot * fy) / 255.0f;
                out.at4(0, c, y, x) = (v - kNormMean[c]) / kNormStd[c];
            }
        }
    }
    return out;
}

struct Prediction {
    std::vector<float> probabilities;
    std::vector<std::pair<std::int64_t, float>> top_k;  // descending prob, ties by lower id
    std::int64_t frames_used = 0;
};

/// Averages pre-softmax score vectors, applies softmax once, extracts top-k.
/// The per-class addends are sorted before summation, so the result is bitwise
/// independent of input order.
inline Prediction aggregate_scores(const std::vector<std::vector<float>>& scores,
                                   std::size_t top_k = 5) {
    if (scores.empty()) throw EmptyInput();
    const std::size_t classes = scores.front().size();
    for (const auto& s : scores)
        if (s.size() != classes) throw ShapeMismatch("score vectors differ in length");

    Tensor mean({1, static_cast<std::int64_t>(classes)});
    std::vector<float> addends(scores.size());
    for (std::size_t c = 0; c < classes; ++c) {
        for (std::size_t i = 0; i < scores.size(); ++i) addends[i] = scores[i][c];
        std::sort(addends.begin(), addends.end());
        double acc = 0.0;
        for (float v : addends) acc += v;
        mean[static_cast<std::int64_t>(c)] =
            static_cast<float>(acc / static_cast<double>(scores.size()));
    }

    Prediction pred;
    pred.probabilities = softmax(mean).vec();
    pred.frames_used = static_cast<std::int64_t>(scores.size());

    std::vector<std::int64_t> order(classes);
    for (std::size_t i = 0; i < classes; ++i) order[i] = static_cast<std::int64_t>(i);
    std::sort(order.begin(), order.end(), [&](std::int64_t a, std::int64_t b) {
        const float pa = pred.probabilities[static_cast<std::size_t>(a)];
        const float pb = pred.probabilities[static_cast<std::size_t>(b)];
        return pa != pb ? pa > pb : a < b;
    });
    const std::size_t k = std::min(top_k, classes);
    for (std::size_t i = 0; i < k; ++i)
        pred.top_k.emplace_back(order[i], pred.probabilities[static_cast<std::size_t>(order[i])]);
    return pred;
}

/// Whole-clip inference: center-sample k frames, preprocess, one batched
/// forward, average the pre-softmax scores, softmax once.
inline Prediction infer_clip(const std::vector<Frame>& frames, Network& net,
                             std::int64_t segments = kDefaultSegments) {
    if (frames.empty()) throw EmptyClip();
    const auto& spec = net.spec();
    const SegmentPlan plan = plan_segments(static_cast<std::int64_t>(frames.size()), segments);
    Tensor batch({segments, spec.in_ch, spec.in_h, spec.in_w});
    const std::int64_t frame_elems = spec.in_ch * spec.in_h * spec.in_w;
    for (std::int64_t i = 0; i < segments; ++i) {
        const Tensor one = preprocess(frames[static_cast<std::size_t>(plan.chosen[i])],
                                      spec.in_h, spec.in_w);
        std::copy(one.data(), one.data() + frame_elems, batch.data() + i * frame_elems);
    }
    const Tensor scores = net.forward_scores(batch);
    std::vector<std::vector<float>> rows;
    for (std::int64_t t = 0; t < segments; ++t)
        rows.emplace_back(scores.data() + t * scores.dim(1),
                          scores.data() + (t + 1) * scores.dim(1));
    return aggregate_scores(rows);
}

/// FIFO window of the most recent per-frame score vectors.
class ScoreBuffer {
public:
    explicit ScoreBuffer(std::int64_t capacity) : capacity_(capacity) {
        if (capacity < 1) throw InvalidArgs("score buffer capacity must be >= 1");
    }

    void push(std::vector<float> scores) {
        if (static_cast<std::int64_t>(entries_.size()) == capacity_) entries_.pop_front();
        entries_.push_back(std::move(scores));
    }

    std::int64_t size() const { return static_cast<std::int64_t>(entries_.size()); }
    std::int64_t capacity() const { return capacity_; }

    std::vector<std::vector<float>> snapshot() const {
        return {entries_.begin(), entries_.end()};
    }

private:
    std::int64_t capacity_;
    std::deque<std::vector<float>> entries_;
};

/// Sequential (streaming) inference with cached per-frame scores: one network
/// forward per pushed frame, prediction from the windowed score average.
/// Networks containing TSM cannot stream, since the shift needs the whole clip.
class StreamEngine {
public:
    StreamEngine(Network net, std::int64_t window = kDefaultSegments)
        : net_(std::move(net)), buffer_(window) {
        if (net_.has_tsm())
            throw BatchOnlyModule("model '" + net_.spec().name + "' contains a tsm layer");
    }

    Prediction push(const Frame& frame) {
        const auto& spec = net_.spec();
        const Tensor input = preprocess(frame, spec.in_h, spec.in_w);
        const Tensor scores = net_.forward_scores(input);
        buffer_.push({scores.data(), scores.data() + scores.dim(1)});
        return aggregate_scores(buffer_.snapshot());
    }

    Network& network() { return net_; }
    const ScoreBuffer& buffer() const { return buffer_; }

private:
    Network net_;
    ScoreBuffer buffer_;
};

inline Prediction stream_push(const Frame& frame, StreamEngine& engine) {
    return engine.push(frame);
}

}  // namespace rtar
