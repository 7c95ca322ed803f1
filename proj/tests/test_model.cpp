#include <cstdio>
#include <filesystem>

#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "rtar/model.hpp"
#include "rtar/weights.hpp"

using namespace rtar;
using oracle::max_rel_err;
using oracle::random_tensor;

namespace {

const char* kMinimalSpec = R"(
model minimal
input 3 8 8
classes 2
layer conv c1 out=4 k=3 s=1 p=1
layer gap pool
layer linear fc out=2
layer softmax prob
)";

std::string temp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

}  // namespace

TEST_CASE("parse_model_spec") {
    SECTION("minimal spec parses with derived output shape") {
        const ModelSpec spec = parse_model_spec(kMinimalSpec);
        REQUIRE(spec.name == "minimal");
        REQUIRE(spec.layers.size() == 4);
        const auto shapes = propagate_shapes(spec);
        REQUIRE(shapes.back().c == 2);
        REQUIRE(shapes.back().flat());
    }
    SECTION("linear in-features contradiction") {
        const std::string bad = R"(
model bad
input 3 8 8
classes 2
layer conv c1 out=4 k=3 s=1 p=1
layer gap pool
layer linear fc out=2 in=8
layer softmax prob
)";
        REQUIRE_THROWS_AS(parse_model_spec(bad), ValidationError);
    }
    SECTION("duplicate layer names") {
        const std::string bad = R"(
model bad
input 3 8 8
classes 4
layer conv c1 out=4 k=3 s=1 p=1
layer conv c1 out=4 k=3 s=1 p=1
layer gap pool
layer linear fc out=4
)";
        REQUIRE_THROWS_AS(parse_model_spec(bad), ValidationError);
    }
    SECTION("softmax must be last") {
        const std::string bad = R"(
model bad
input 3 8 8
classes 4
layer conv c1 out=4 k=3 s=1 p=1
layer gap pool
layer softmax prob
layer linear fc out=4
)";
        REQUIRE_THROWS_AS(parse_model_spec(bad), ValidationError);
    }
    SECTION("malformed documents") {
        REQUIRE_THROWS_AS(parse_model_spec("model x\nlayer conv"), ParseError);
        REQUIRE_THROWS_AS(parse_model_spec("bogus directive"), ParseError);
        REQUIRE_THROWS_AS(parse_model_spec("model x\ninput 3 8 8\nclasses 2\nlayer conv c out=q"),
                          ParseError);
    }
}

TEST_CASE("every shipped spec parses, builds, and runs") {
    for (const auto& entry : std::filesystem::directory_iterator(SPECS_DIR)) {
        if (entry.path().extension() != ".spec") continue;
        CAPTURE(entry.path().filename().string());
        const ModelSpec spec = parse_model_spec_file(entry.path().string());
        const auto shapes = propagate_shapes(spec);
        REQUIRE(shapes.back().c == spec.num_classes);
        if (spec.in_h > 32) continue;  // full-size backbones checked at parse level only
        const WeightStore weights = init_random_weights(spec, 7);
        Network net = build_network(spec, weights, 2);
        const Tensor out = net.forward(random_tensor({2, spec.in_ch, spec.in_h, spec.in_w}, 9));
        REQUIRE(out.shape() == std::vector<std::int64_t>{2, spec.num_classes});
        for (float v : out.vec()) REQUIRE(std::isfinite(v));
    }
}

TEST_CASE("build_network") {
    const ModelSpec spec = parse_model_spec(kMinimalSpec);
    const WeightStore weights = init_random_weights(spec, 11);

    SECTION("forward returns finite [T, classes]") {
        Network net = build_network(spec, weights, 3);
        const Tensor out = net.forward(random_tensor({3, 3, 8, 8}, 13));
        REQUIRE(out.shape() == std::vector<std::int64_t>{3, 2});
        for (float v : out.vec()) REQUIRE(std::isfinite(v));
    }
    SECTION("missing weight names the key") {
        WeightStore partial;
        for (const auto& [name, t] : weights.entries())
            if (name != "fc.bias") partial.put(name, t);
        REQUIRE_THROWS_WITH(build_network(spec, partial, 1),
                            Catch::Matchers::ContainsSubstring("fc.bias"));
    }
    SECTION("frame-forward counter counts frames") {
        Network net = build_network(spec, weights, 1);
        net.forward(random_tensor({4, 3, 8, 8}, 15));
        net.forward(random_tensor({1, 3, 8, 8}, 16));
        REQUIRE(net.frame_forwards() == 5);
    }
}

TEST_CASE("bn folding preserves network outputs") {
    const std::string text = R"(
model bn_net
input 3 10 10
classes 3
layer conv c1 out=6 k=3 s=1 p=1
layer bn b1
layer act a1 kind=relu6
layer conv c2 out=8 k=3 s=2 p=1
layer bn b2
layer act a2 kind=relu
layer gap pool
layer linear fc out=3
layer softmax prob
)";
    const ModelSpec spec = parse_model_spec(text);
    WeightStore weights = init_random_weights(spec, 21);
    // identity BN from init would make folding vacuous; randomize it
    WeightStore rnd;
    for (const auto& [name, t] : weights.entries()) {
        if (name.find(".gamma") != std::string::npos)
            rnd.put(name, random_tensor(t.shape(), 31, 0.5f, 1.5f));
        else if (name.find(".beta") != std::string::npos)
            rnd.put(name, random_tensor(t.shape(), 32));
        else if (name.find(".mean") != std::string::npos)
            rnd.put(name, random_tensor(t.shape(), 33));
        else if (name.find(".var") != std::string::npos)
            rnd.put(name, random_tensor(t.shape(), 34, 0.2f, 2.0f));
        else
            rnd.put(name, t);
    }
    Network plain = build_network(spec, rnd, 1);
    Network folded = build_network(spec, rnd, 1);
    folded.fold_batch_norms();
    for (std::uint64_t seed = 41; seed < 44; ++seed) {
        const Tensor in = random_tensor({2, 3, 10, 10}, seed);
        REQUIRE(max_rel_err(folded.forward(in), plain.forward(in)) < 1e-5f);
    }
}

TEST_CASE("init_random_weights") {
    const ModelSpec spec = parse_model_spec(kMinimalSpec);
    SECTION("deterministic per seed") {
        const WeightStore a = init_random_weights(spec, 5);
        const WeightStore b = init_random_weights(spec, 5);
        REQUIRE(serialize_weights(a) == serialize_weights(b));
    }
    SECTION("different seeds differ") {
        REQUIRE(serialize_weights(init_random_weights(spec, 5)) !=
                serialize_weights(init_random_weights(spec, 6)));
    }
    SECTION("bn initialized to identity") {
        const std::string text = R"(
model bn_only
input 2 4 4
classes 2
layer bn b1
layer gap pool
layer linear fc out=2
)";
        const ModelSpec s = parse_model_spec(text);
        const WeightStore w = init_random_weights(s, 3);
        BnParams bn{w.get("b1.gamma"), w.get("b1.beta"), w.get("b1.mean"), w.get("b1.var"), 0.0f};
        const Tensor in = random_tensor({1, 2, 4, 4}, 8);
        REQUIRE(bn_apply(in, bn).vec() == in.vec());
    }
}

TEST_CASE("weights container round-trip") {
    SECTION("property: random stores survive bitwise (100 cases)") {
        std::mt19937_64 rng(12345);
        for (int round = 0; round < 100; ++round) {
            WeightStore store;
            const int tensors = static_cast<int>(rng() % 6);
            for (int i = 0; i < tensors; ++i) {
                std::vector<std::int64_t> shape;
                const int rank = 1 + static_cast<int>(rng() % 4);
                for (int d = 0; d < rank; ++d) shape.push_back(1 + std::int64_t(rng() % 5));
                store.put("t" + std::to_string(round) + "_" + std::to_string(i),
                          random_tensor(shape, rng()));
            }
            const std::string bytes = serialize_weights(store);
            const WeightStore loaded = deserialize_weights(bytes);
            REQUIRE(serialize_weights(loaded) == bytes);
        }
    }
    SECTION("save/load through a file") {
        WeightStore store;
        store.put("a", random_tensor({2, 3}, 1));
        store.put("b", random_tensor({4}, 2));
        store.put("c", random_tensor({1, 2, 3, 4}, 3));
        const std::string path = temp_path("rtar_weights_test.rtaw");
        save_weights(store, path);
        const WeightStore loaded = load_weights(path);
        REQUIRE(serialize_weights(loaded) == serialize_weights(store));
        std::remove(path.c_str());
    }
    SECTION("corrupted magic") {
        WeightStore store;
        store.put("a", random_tensor({2}, 1));
        std::string bytes = serialize_weights(store);
        bytes[0] = 'X';
        REQUIRE_THROWS_AS(deserialize_weights(bytes), FormatError);
    }
    SECTION("truncation reports an offset") {
        WeightStore store;
        store.put("long_tensor_name", random_tensor({8, 8}, 1));
        std::string bytes = serialize_weights(store);
        bytes.resize(bytes.size() - 7);
        REQUIRE_THROWS_WITH(deserialize_weights(bytes),
                            Catch::Matchers::ContainsSubstring("offset"));
    }
    SECTION("empty store is a valid file") {
        const std::string bytes = serialize_weights(WeightStore{});
        REQUIRE(deserialize_weights(bytes).size() == 0);
    }
    SECTION("duplicate tensor name rejected") {
        WeightStore store;
        store.put("a", random_tensor({2}, 1));
        REQUIRE_THROWS_AS(store.put("a", random_tensor({2}, 2)), DuplicateName);
    }
}
