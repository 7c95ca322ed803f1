// End-to-end checks of the rtar binary: exit codes, JSON-lines output, and
// single-thread determinism.
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <regex>
#include <string>

#include <catch2/catch_amalgamated.hpp>

#include "rtar/model.hpp"
#include "rtar/ppm.hpp"
#include "rtar/weights.hpp"

namespace fs = std::filesystem;
using namespace rtar;

namespace {

struct RunResult {
    int exit_code = -1;
    std::string stdout_text;
};

RunResult run_cli(const std::string& args) {
    const std::string cmd = std::string(RTAR_CLI_PATH) + " " + args + " 2>/dev/null";
    FILE* pipe = popen(cmd.c_str(), "r");
    REQUIRE(pipe != nullptr);
    RunResult r;
    char buf[4096];
    while (std::size_t n = fread(buf, 1, sizeof buf, pipe)) r.stdout_text.append(buf, n);
    const int status = pclose(pipe);
    r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    return r;
}

std::string strip_latency(std::string s) {
    return std::regex_replace(s, std::regex(R"("latency_ms":[0-9.eE+-]+)"), "\"latency_ms\":0");
}

struct Fixture {
    fs::path dir;
    std::string spec_path, tsm_spec_path, weights_path, frames_dir;

    Fixture() {
        dir = fs::temp_directory_path() / "rtar_cli_test";
        fs::create_directories(dir);
        spec_path = std::string(SPECS_DIR) + "/tiny.spec";
        tsm_spec_path = std::string(SPECS_DIR) + "/tiny-tsm.spec";

        const ModelSpec spec = parse_model_spec_file(spec_path);
        weights_path = (dir / "tiny.rtaw").string();
        save_weights(init_random_weights(spec, 77), weights_path);

        frames_dir = (dir / "frames").string();
        fs::create_directories(frames_dir);
        std::mt19937_64 rng(5);
        for (int i = 0; i < 16; ++i) {
            Frame f;
            f.width = f.height = 16;
            f.pixels.resize(16 * 16 * 3);
            for (auto& p : f.pixels) p = std::uint8_t(rng() & 0xff);
            char name[32];
            std::snprintf(name, sizeof name, "frame_%03d.ppm", i);
            write_ppm_file(f, (fs::path(frames_dir) / name).string());
        }
    }
    ~Fixture() {
        std::error_code ec;
        fs::remove_all(dir, ec);
    }
};

}  // namespace

TEST_CASE_METHOD(Fixture, "cli infer") {
    SECTION("emits one valid prediction line") {
        const RunResult r = run_cli("infer --spec " + spec_path + " --weights " + weights_path +
                                    " --frames-dir " + frames_dir);
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.stdout_text.rfind("{\"frame_index\":0,\"frames_used\":8,", 0) == 0);
        // probabilities of the top_k entries are within [0,1]
        std::regex prob_re(R"("prob":([0-9.eE+-]+))");
        auto begin = std::sregex_iterator(r.stdout_text.begin(), r.stdout_text.end(), prob_re);
        REQUIRE(begin != std::sregex_iterator());
        for (auto it = begin; it != std::sregex_iterator(); ++it) {
            const double p = std::stod((*it)[1]);
            REQUIRE(p >= 0.0);
            REQUIRE(p <= 1.0);
        }
    }
    SECTION("missing weights file exits 3") {
        const RunResult r = run_cli("infer --spec " + spec_path +
                                    " --weights /nonexistent/w.rtaw --frames-dir " + frames_dir);
        REQUIRE(r.exit_code == 3);
    }
    SECTION("size flag contradicting the spec exits 2") {
        const RunResult r = run_cli("infer --spec " + spec_path + " --weights " + weights_path +
                                    " --frames-dir " + frames_dir + " --size 224");
        REQUIRE(r.exit_code == 2);
    }
    SECTION("two single-thread runs are bitwise identical modulo latency") {
        const std::string args = "infer --spec " + spec_path + " --weights " + weights_path +
                                 " --frames-dir " + frames_dir + " --threads 1";
        const RunResult a = run_cli(args);
        const RunResult b = run_cli(args);
        REQUIRE(a.exit_code == 0);
        REQUIRE(strip_latency(a.stdout_text) == strip_latency(b.stdout_text));
    }
}

TEST_CASE_METHOD(Fixture, "cli stream") {
    SECTION("frames_used warms up 1..k") {
        const RunResult r = run_cli("stream --spec " + spec_path + " --weights " + weights_path +
                                    " --frames-dir " + frames_dir + " --segments 8");
        REQUIRE(r.exit_code == 0);
        std::istringstream lines(r.stdout_text);
        std::string line;
        int index = 0;
        while (std::getline(lines, line)) {
            const int expected_used = std::min(index + 1, 8);
            REQUIRE(line.rfind("{\"frame_index\":" + std::to_string(index) +
                                   ",\"frames_used\":" + std::to_string(expected_used) + ",",
                               0) == 0);
            ++index;
        }
        REQUIRE(index == 16);
    }
    SECTION("tsm spec exits 4 before consuming input") {
        const ModelSpec tsm_spec = parse_model_spec_file(tsm_spec_path);
        const std::string tsm_weights = (dir / "tsm.rtaw").string();
        save_weights(init_random_weights(tsm_spec, 77), tsm_weights);
        const RunResult r = run_cli("stream --spec " + tsm_spec_path + " --weights " +
                                    tsm_weights + " --frames-dir " + frames_dir);
        REQUIRE(r.exit_code == 4);
        REQUIRE(r.stdout_text.empty());
    }
    SECTION("repeated identical frame converges to a fixed point") {
        const std::string one_dir = (dir / "one_frame").string();
        fs::create_directories(one_dir);
        const Frame f = read_ppm_file((fs::path(frames_dir) / "frame_000.ppm").string());
        for (int i = 0; i < 10; ++i) {
            char name[32];
            std::snprintf(name, sizeof name, "f_%02d.ppm", i);
            write_ppm_file(f, (fs::path(one_dir) / name).string());
        }
        const RunResult r = run_cli("stream --spec " + spec_path + " --weights " + weights_path +
                                    " --frames-dir " + one_dir + " --segments 8");
        REQUIRE(r.exit_code == 0);
        std::istringstream lines(r.stdout_text);
        std::vector<std::string> all;
        std::string line;
        while (std::getline(lines, line)) all.push_back(strip_latency(line));
        REQUIRE(all.size() == 10);
        // once warm, the windowed average stops moving
        const std::string tail8 = all[8].substr(all[8].find("top_k"));
        const std::string tail9 = all[9].substr(all[9].find("top_k"));
        REQUIRE(tail8 == tail9);
    }
}

TEST_CASE_METHOD(Fixture, "cli bench") {
    SECTION("defaults report 100 timed runs") {
        const RunResult r = run_cli("bench --spec " + spec_path + " --weights " + weights_path +
                                    " --mode seq --segments 4");
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.stdout_text.find("\"timed_runs\":100") != std::string::npos);
        REQUIRE(r.stdout_text.find("\"forwards_per_run\":1") != std::string::npos);
    }
    SECTION("batch mode reports k forwards per run") {
        const RunResult r = run_cli("bench --spec " + spec_path + " --weights " + weights_path +
                                    " --mode batch --segments 4 --runs 10 --warmup 1");
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.stdout_text.find("\"mode\":\"batch_clip\"") != std::string::npos);
        REQUIRE(r.stdout_text.find("\"forwards_per_run\":4") != std::string::npos);
    }
    SECTION("unknown mode exits 2") {
        const RunResult r = run_cli("bench --spec " + spec_path + " --weights " + weights_path +
                                    " --mode turbo");
        REQUIRE(r.exit_code == 2);
    }
}

TEST_CASE_METHOD(Fixture, "cli flops") {
    SECTION("matches the committed fixture byte-for-byte") {
        const RunResult r = run_cli("flops --spec " + spec_path + " --frames 8");
        REQUIRE(r.exit_code == 0);
        std::ifstream fixture(std::string(FIXTURES_DIR) + "/tiny_flops_frames8.json",
                              std::ios::binary);
        const std::string expected((std::istreambuf_iterator<char>(fixture)),
                                   std::istreambuf_iterator<char>());
        REQUIRE(r.stdout_text == expected);
    }
    SECTION("frames=1 collapses clip cost to single-image cost") {
        const RunResult r = run_cli("flops --spec " + spec_path + " --frames 1");
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.stdout_text.find("\"total_flops\":83842") != std::string::npos);
        REQUIRE(r.stdout_text.find("\"clip_flops\":83842") != std::string::npos);
    }
    SECTION("unparseable spec exits 2") {
        const std::string bad = (dir / "bad.spec").string();
        std::ofstream(bad) << "model broken\nlayer conv x out=nope\n";
        REQUIRE(run_cli("flops --spec " + bad).exit_code == 2);
    }
}

TEST_CASE_METHOD(Fixture, "cli inspect") {
    SECTION("lists every tensor of a written store") {
        const RunResult r = run_cli("inspect --weights " + weights_path);
        REQUIRE(r.exit_code == 0);
        const WeightStore store = load_weights(weights_path);
        std::istringstream lines(r.stdout_text);
        std::string line;
        std::size_t count = 0;
        while (std::getline(lines, line)) {
            REQUIRE(line.find("\"name\":\"" + store.entries()[count].first + "\"") !=
                    std::string::npos);
            ++count;
        }
        REQUIRE(count == store.size());
    }
    SECTION("truncated file exits 3") {
        std::ifstream src(weights_path, std::ios::binary);
        std::string bytes((std::istreambuf_iterator<char>(src)), std::istreambuf_iterator<char>());
        const std::string truncated_path = (dir / "trunc.rtaw").string();
        std::ofstream(truncated_path, std::ios::binary)
            .write(bytes.data(), std::streamsize(bytes.size() / 2));
        REQUIRE(run_cli("inspect --weights " + truncated_path).exit_code == 3);
    }
    SECTION("empty store is valid and lists nothing") {
        const std::string empty_path = (dir / "empty.rtaw").string();
        save_weights(WeightStore{}, empty_path);
        const RunResult r = run_cli("inspect --weights " + empty_path);
        REQUIRE(r.exit_code == 0);
        REQUIRE(r.stdout_text.empty());
    }
}
