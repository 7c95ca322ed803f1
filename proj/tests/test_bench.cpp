#include <catch2/catch_amalgamated.hpp>

#include "rtar/bench.hpp"

using namespace rtar;

namespace {

const char* kBenchSpec = R"(
model bench_tiny
input 3 8 8
classes 3
layer conv c1 out=4 k=3 s=2 p=1
layer act a1 kind=relu6
layer gap pool
layer linear fc out=3
layer softmax prob
)";

Network make_net() {
    const ModelSpec spec = parse_model_spec(kBenchSpec);
    return build_network(spec, init_random_weights(spec, 1), 1);
}

}  // namespace

TEST_CASE("latency bench protocol") {
    SECTION("defaults to exactly 100 timed runs") {
        const LatencyReport r = run_latency_bench(make_net(), BenchMode::BatchClip, 4);
        REQUIRE(r.timed_runs == 100);
        REQUIRE(r.warmup_runs == 10);
    }
    SECTION("batch mode runs k forwards per run, sequential runs one") {
        const LatencyReport batch =
            run_latency_bench(make_net(), BenchMode::BatchClip, 8, 20, 2);
        REQUIRE(batch.forwards_per_run == 8);
        const LatencyReport seq =
            run_latency_bench(make_net(), BenchMode::SequentialFrame, 8, 20, 2);
        REQUIRE(seq.forwards_per_run == 1);
    }
    SECTION("statistics are consistent") {
        const LatencyReport r = run_latency_bench(make_net(), BenchMode::BatchClip, 4, 30, 2);
        REQUIRE(r.min_ms <= r.mean_ms);
        REQUIRE(r.mean_ms <= r.max_ms);
        REQUIRE(r.min_ms > 0.0);
        REQUIRE(r.std_ms >= 0.0);
    }
    SECTION("batch mean exceeds sequential mean on the same model") {
        const LatencyReport batch =
            run_latency_bench(make_net(), BenchMode::BatchClip, 8, 40, 5);
        const LatencyReport seq =
            run_latency_bench(make_net(), BenchMode::SequentialFrame, 8, 40, 5);
        REQUIRE(batch.mean_ms > seq.mean_ms);
    }
    SECTION("invalid run counts") {
        REQUIRE_THROWS_AS(run_latency_bench(make_net(), BenchMode::BatchClip, 4, 0),
                          InvalidArgs);
    }
}
