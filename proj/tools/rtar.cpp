// rtar: streaming action-recognition inference and benchmarking CLI.
//
// Subcommands: infer (whole-clip TSN inference), stream (sequential frames
// with cached scores), bench (repeat-and-average latency), flops (analytic
// cost report), inspect (weights container listing).
//
// Structured output is JSON lines on stdout; diagnostics go to stderr.
// Exit codes: 0 ok, 2 configuration error, 3 I/O or format error, 4 model error.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "rtar/rtar.hpp"

namespace fs = std::filesystem;
using namespace rtar;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitIo = 3;
constexpr int kExitModel = 4;

std::string fmt_float(double v) {
    std::ostringstream os;
    os << std::setprecision(9) << v;
    return os.str();
}

std::string prediction_json(const Prediction& p, std::int64_t frame_index, double latency_ms) {
    std::ostringstream os;
    os << "{\"frame_index\":" << frame_index << ",\"frames_used\":" << p.frames_used
       << ",\"top_k\":[";
    for (std::size_t i = 0; i < p.top_k.size(); ++i) {
        if (i) os << ",";
        os << "{\"class\":" << p.top_k[i].first << ",\"prob\":" << fmt_float(p.top_k[i].second)
           << "}";
    }
    os << "],\"latency_ms\":" << fmt_float(latency_ms) << "}";
    return os.str();
}

std::vector<Frame> load_frames_dir(const std::string& dir) {
    std::vector<fs::path> paths;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".ppm")
            paths.push_back(entry.path());
    }
    if (ec) throw IoError("cannot read directory: " + dir);
    std::sort(paths.begin(), paths.end());
    std::vector<Frame> frames;
    for (const auto& p : paths) frames.push_back(read_ppm_file(p.string()));
    if (frames.empty()) throw IoError("no .ppm frames in: " + dir);
    return frames;
}

Network load_model(const std::string& spec_path, const std::string& weights_path,
                   std::int64_t num_frames) {
    const ModelSpec spec = parse_model_spec_file(spec_path);
    const WeightStore weights = load_weights(weights_path);
    return build_network(spec, weights, num_frames);
}

struct CommonOpts {
    std::string spec_path, weights_path, frames_dir;
    std::int64_t segments = kDefaultSegments;
    std::int64_t size = 0;  // 0 = use the spec's input resolution
    int threads = 1;
};

void add_model_opts(CLI::App* cmd, CommonOpts& o, bool need_weights = true) {
    cmd->add_option("--spec", o.spec_path, "model spec file")
        ->required()
        ->envname("RTAR_SPEC");
    auto* w = cmd->add_option("--weights", o.weights_path, "RTAW weights file")
                  ->envname("RTAR_WEIGHTS");
    if (need_weights) w->required();
    cmd->add_option("--segments", o.segments, "TSN segment count k")->envname("RTAR_SEGMENTS");
    cmd->add_option("--size", o.size, "expected input resolution (must match the spec)")
        ->envname("RTAR_SIZE");
    cmd->add_option("--threads", o.threads, "kernel worker threads")->envname("RTAR_THREADS");
}

void check_size(const CommonOpts& o, const ModelSpec& spec) {
    if (o.size > 0 && (spec.in_h != o.size || spec.in_w != o.size))
        throw InvalidArgs("--size " + std::to_string(o.size) + " does not match spec input " +
                          std::to_string(spec.in_h) + "x" + std::to_string(spec.in_w));
    if (o.segments < 1) throw InvalidArgs("--segments must be >= 1");
}

int cmd_infer(const CommonOpts& o) {
    set_num_threads(o.threads);
    Network net = load_model(o.spec_path, o.weights_path, o.segments);
    check_size(o, net.spec());
    const std::vector<Frame> frames = load_frames_dir(o.frames_dir);
    const auto t0 = std::chrono::steady_clock::now();
    const Prediction pred = infer_clip(frames, net, o.segments);
    const auto t1 = std::chrono::steady_clock::now();
    std::cout << prediction_json(pred, 0,
                                 std::chrono::duration<double, std::milli>(t1 - t0).count())
              << "\n";
    return 0;
}

int cmd_stream(const CommonOpts& o, const std::string& raw_geom) {
    set_num_threads(o.threads);
    // TSM guard runs before any input is consumed
    StreamEngine engine(load_model(o.spec_path, o.weights_path, 1), o.segments);
    check_size(o, engine.network().spec());

    std::int64_t index = 0;
    auto emit = [&](const Frame& frame) {
        const auto t0 = std::chrono::steady_clock::now();
        const Prediction pred = engine.push(frame);
        const auto t1 = std::chrono::steady_clock::now();
        std::cout << prediction_json(pred, index++,
                                     std::chrono::duration<double, std::milli>(t1 - t0).count())
                  << "\n";
    };

    if (!raw_geom.empty()) {
        const auto x = raw_geom.find('x');
        if (x == std::string::npos)
            throw InvalidArgs("--raw expects WIDTHxHEIGHT, got '" + raw_geom + "'");
        const std::int64_t w = std::stoll(raw_geom.substr(0, x));
        const std::int64_t h = std::stoll(raw_geom.substr(x + 1));
        if (w < 1 || h < 1) throw InvalidArgs("--raw dimensions must be positive");
        Frame frame;
        while (read_raw_frame(std::cin, w, h, frame)) emit(frame);
    } else if (!o.frames_dir.empty()) {
        for (const Frame& f : load_frames_dir(o.frames_dir)) emit(f);
    } else {
        throw InvalidArgs("stream needs --raw WxH or --frames-dir");
    }
    return 0;
}

int cmd_bench(const CommonOpts& o, const std::string& mode_str, std::int64_t runs,
              std::int64_t warmup, std::uint64_t seed) {
    set_num_threads(o.threads);
    BenchMode mode;
    if (mode_str == "batch") mode = BenchMode::BatchClip;
    else if (mode_str == "seq") mode = BenchMode::SequentialFrame;
    else throw InvalidArgs("--mode must be batch or seq, got '" + mode_str + "'");
    Network net = load_model(o.spec_path, o.weights_path, o.segments);
    check_size(o, net.spec());
    const LatencyReport report =
        run_latency_bench(std::move(net), mode, o.segments, runs, warmup, seed);
    std::cout << latency_report_json(report) << "\n";
    return 0;
}

int cmd_flops(const std::string& spec_path, std::int64_t frames, bool table) {
    const ModelSpec spec = parse_model_spec_file(spec_path);
    const FlopsReport report = count_clip(spec, frames);
    if (table) std::cout << flops_report_table(report);
    else std::cout << flops_report_json(report) << "\n";
    return 0;
}

std::uint64_t fnv1a(const unsigned char* data, std::size_t len) {
    std::uint64_t h = 1469598103934665603ull;
    for (std::size_t i = 0; i < len; ++i) {
        h ^= data[i];
        h *= 1099511628211ull;
    }
    return h;
}

int cmd_inspect(const std::string& weights_path) {
    const WeightStore store = load_weights(weights_path);
    for (const auto& [name, t] : store.entries()) {
        std::ostringstream os;
        os << "{\"name\":\"" << name << "\",\"shape\":[";
        for (std::size_t i = 0; i < t.shape().size(); ++i) {
            if (i) os << ",";
            os << t.shape()[i];
        }
        os << "],\"count\":" << t.numel() << ",\"checksum\":\"" << std::hex << std::setw(16)
           << std::setfill('0')
           << fnv1a(reinterpret_cast<const unsigned char*>(t.data()),
                    static_cast<std::size_t>(t.numel()) * 4)
           << "\"}";
        std::cout << os.str() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"real-time action recognition inference and benchmark harness"};
    app.require_subcommand(1);

    CommonOpts infer_opts, stream_opts, bench_opts;
    std::string bench_mode = "batch", raw_geom, flops_spec, inspect_weights;
    std::int64_t bench_runs = 100, bench_warmup = 10, flops_frames = kDefaultSegments;
    std::uint64_t bench_seed = 0;
    bool flops_table = false;

    auto* infer = app.add_subcommand("infer", "run whole-clip TSN inference");
    add_model_opts(infer, infer_opts);
    infer->add_option("--frames-dir", infer_opts.frames_dir, "directory of .ppm frames")
        ->required()
        ->envname("RTAR_FRAMES_DIR");

    auto* stream = app.add_subcommand("stream", "sequential per-frame inference");
    add_model_opts(stream, stream_opts);
    stream->add_option("--frames-dir", stream_opts.frames_dir, "directory of .ppm frames")
        ->envname("RTAR_FRAMES_DIR");
    stream->add_option("--raw", raw_geom, "read raw RGB24 frames of WxH from stdin")
        ->envname("RTAR_RAW");

    auto* bench = app.add_subcommand("bench", "latency benchmark (repeat and average)");
    add_model_opts(bench, bench_opts);
    bench->add_option("--mode", bench_mode, "batch | seq")->envname("RTAR_MODE");
    bench->add_option("--runs", bench_runs, "timed runs")->envname("RTAR_RUNS");
    bench->add_option("--warmup", bench_warmup, "untimed warmup runs")->envname("RTAR_WARMUP");
    bench->add_option("--seed", bench_seed, "synthetic frame seed")->envname("RTAR_SEED");

    auto* flops = app.add_subcommand("flops", "analytic FLOPs/params report");
    flops->add_option("--spec", flops_spec, "model spec file")->required()->envname("RTAR_SPEC");
    flops->add_option("--frames", flops_frames, "TSN frame multiplier")->envname("RTAR_FRAMES");
    flops->add_flag("--table", flops_table, "aligned text table instead of JSON");

    auto* inspect = app.add_subcommand("inspect", "list tensors in a weights file");
    inspect->add_option("--weights", inspect_weights, "RTAW weights file")
        ->required()
        ->envname("RTAR_WEIGHTS");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }

    try {
        if (app.got_subcommand(infer)) return cmd_infer(infer_opts);
        if (app.got_subcommand(stream)) return cmd_stream(stream_opts, raw_geom);
        if (app.got_subcommand(bench))
            return cmd_bench(bench_opts, bench_mode, bench_runs, bench_warmup, bench_seed);
        if (app.got_subcommand(flops)) return cmd_flops(flops_spec, flops_frames, flops_table);
        if (app.got_subcommand(inspect)) return cmd_inspect(inspect_weights);
    } catch (const ParseError& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitConfig;
    } catch (const ValidationError& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitConfig;
    } catch (const InvalidArgs& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitConfig;
    } catch (const IoError& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitIo;
    } catch (const FormatError& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitIo;
    } catch (const InvalidFrame& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "rtar: " << e.what() << "\n";
        return kExitModel;
    }
    return 0;
}
