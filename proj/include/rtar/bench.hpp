#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rtar/pipeline.hpp"

namespace rtar {

enum class BenchMode { BatchClip, SequentialFrame };

inline std::string bench_mode_name(BenchMode m) {
    return m == BenchMode::BatchClip ? "batch_clip" : "sequential_frame";
}

/// Repeat-and-average timing statistics. The timed loop runs exactly
/// timed_runs measurements after warmup_runs untimed ones.
struct LatencyReport {
    std::int64_t warmup_runs = 10;
    std::int64_t timed_runs = 100;
    double mean_ms = 0.0, std_ms = 0.0, min_ms = 0.0, max_ms = 0.0;
    BenchMode mode = BenchMode::BatchClip;
    int threads = 1;
    std::int64_t forwards_per_run = 0;  // instrumented frame forwards per timed run
};

inline Frame synthetic_frame(std::int64_t width, std::int64_t height, std::uint64_t seed) {
    Frame f;
    f.width = width;
    f.height = height;
    f.pixels.resize(static_cast<std::size_t>(width) * height * 3);
    std::mt19937_64 rng(seed);
    for (auto& p : f.pixels) p = static_cast<std::uint8_t>(rng() & 0xff);
    return f;
}

/// Monotonic-clock timing of one unit of work: a full k-frame clip inference
/// (batch mode) or a single cached-score frame push (sequential mode).
/// Preprocessing is inside the timed region; frame decoding is not.
inline LatencyReport run_latency_bench(Network net, BenchMode mode, std::int64_t segments,
                                       std::int64_t timed_runs = 100,
                                       std::int64_t warmup_runs = 10,
                                       std::uint64_t seed = 0) {
    if (timed_runs < 1) throw InvalidArgs("timed_runs must be >= 1");
    if (warmup_runs < 0) throw InvalidArgs("warmup_runs must be >= 0");
    const auto& spec = net.spec();

    std::vector<Frame> clip;
    for (std::int64_t i = 0; i < segments; ++i)
        clip.push_back(synthetic_frame(spec.in_w, spec.in_h, seed + static_cast<std::uint64_t>(i)));

    std::function<void()> work;
    std::optional<StreamEngine> engine;
    if (mode == BenchMode::SequentialFrame) {
        engine.emplace(std::move(net), segments);
        work = [&] { engine->push(clip.front()); };
    } else {
        work = [&] { infer_clip(clip, net, segments); };
    }
    Network& instrumented = engine ? engine->network() : net;

    for (std::int64_t i = 0; i < warmup_runs; ++i) work();

    instrumented.reset_counter();
    using clock = std::chrono::steady_clock;
    std::vector<double> samples;
    samples.reserve(static_cast<std::size_t>(timed_runs));
    for (std::int64_t i = 0; i < timed_runs; ++i) {
        const auto t0 = clock::now();
        work();
        const auto t1 = clock::now();
        samples.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
    }

    LatencyReport r;
    r.warmup_runs = warmup_runs;
    r.timed_runs = timed_runs;
    r.mode = mode;
    r.threads = num_threads();
    r.forwards_per_run = instrumented.frame_forwards() / timed_runs;
    r.min_ms = r.max_ms = samples.front();
    double sum = 0.0;
    for (double s : samples) {
        sum += s;
        r.min_ms = std::min(r.min_ms, s);
        r.max_ms = std::max(r.max_ms, s);
    }
    r.mean_ms = sum / static_cast<double>(timed_runs);
    double var = 0.0;
    for (double s : samples) var += (s - r.mean_ms) * (s - r.mean_ms);
    r.std_ms = std::sqrt(var / static_cast<double>(timed_runs));
    return r;
}

inline std::string latency_report_json(const LatencyReport& r) {
    std::ostringstream os;
    os << "{\"mode\":\"" << bench_mode_name(r.mode) << "\",\"warmup_runs\":" << r.warmup_runs
       << ",\"timed_runs\":" << r.timed_runs << ",\"threads\":" << r.threads
       << ",\"forwards_per_run\":" << r.forwards_per_run << ",\"mean_ms\":" << r.mean_ms
       << ",\"std_ms\":" << r.std_ms << ",\"min_ms\":" << r.min_ms << ",\"max_ms\":" << r.max_ms
       << "}";
    return os.str();
}

}  // namespace rtar
