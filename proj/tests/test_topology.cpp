#include <doctest.h>

#include <sstream>

#include "ftdl/analyzer.hpp"
#include "ftdl/network.hpp"
#include "ftdl/rng.hpp"

using namespace ftdl;

namespace {

Topology topo_from(const std::string& text) {
    std::istringstream ss(text);
    return parse_topology(ss, "<test>");
}

}  // namespace

TEST_SUITE_BEGIN("topology");

TEST_CASE("first AlexNet conv layer: 34,848 parameters, 301,056 activations") {
    LayerSpec s;
    s.kind = LayerSpec::Kind::Convolution;
    s.n1 = 3;
    s.n2 = 96;
    s.x1 = s.x2 = 224;
    s.w1 = s.w2 = 11;
    s.s1 = s.s2 = 4;
    const LayerCost c = count_layer(s);
    CHECK(c.parameters == 34848);
    CHECK(c.activations == 301056);
    CHECK(c.biases == 96);
    CHECK_FALSE(c.parameter_dominated());
}

TEST_CASE("final AlexNet fc layer: 4,096,000 parameters, 1,000 activations") {
    LayerSpec s;
    s.kind = LayerSpec::Kind::FullyConnected;
    s.n1 = 4096;
    s.n2 = 1000;
    const LayerCost c = count_layer(s);
    CHECK(c.parameters == 4096000);
    CHECK(c.activations == 1000);
    CHECK(c.parameter_dominated());
}

TEST_CASE("window equal to the image with unit stride and single features") {
    LayerSpec s;
    s.kind = LayerSpec::Kind::Convolution;
    s.n1 = s.n2 = 1;
    s.x1 = s.x2 = 7;
    s.w1 = s.w2 = 7;
    s.s1 = s.s2 = 1;
    const LayerCost c = count_layer(s);
    CHECK(c.parameters == 49);
    CHECK(c.activations == 49);
}

TEST_CASE("stride that does not divide the extent is rejected") {
    LayerSpec s;
    s.kind = LayerSpec::Kind::Convolution;
    s.n1 = 1;
    s.n2 = 2;
    s.x1 = s.x2 = 7;
    s.w1 = s.w2 = 3;
    s.s1 = s.s2 = 2;
    CHECK_THROWS_AS(count_layer(s), ConfigError);
}

TEST_CASE("counts match an independent wide-integer recomputation") {
    SplitMix64 rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        LayerSpec s;
        if (rng.next() & 1) {
            s.kind = LayerSpec::Kind::Convolution;
            s.s1 = 1 + rng.next_below(4);
            s.s2 = 1 + rng.next_below(4);
            s.x1 = s.s1 * (1 + rng.next_below(128));
            s.x2 = s.s2 * (1 + rng.next_below(128));
            s.w1 = 1 + rng.next_below(std::min<uint64_t>(s.x1, 11));
            s.w2 = 1 + rng.next_below(std::min<uint64_t>(s.x2, 11));
            s.n1 = 1 + rng.next_below(512);
            s.n2 = 1 + rng.next_below(512);
            const LayerCost c = count_layer(s);
            const __int128 params = static_cast<__int128>(s.w1) * s.w2 * s.n1 * s.n2;
            const __int128 acts = static_cast<__int128>(s.x1 / s.s1) * (s.x2 / s.s2) * s.n2;
            CHECK(static_cast<__int128>(c.parameters) == params);
            CHECK(static_cast<__int128>(c.activations) == acts);
        } else {
            s.kind = LayerSpec::Kind::FullyConnected;
            s.n1 = 1 + rng.next_below(1 << 20);
            s.n2 = 1 + rng.next_below(1 << 13);
            const LayerCost c = count_layer(s);
            CHECK(static_cast<__int128>(c.parameters) ==
                  static_cast<__int128>(s.n1) * s.n2);
            CHECK(c.activations == s.n2);
        }
    }
}

TEST_CASE("convolutions have fewer parameters than activations in the image regime") {
    // hypothesis: w_i < x_i/s_i with few input features relative to the output
    // spatial size (the n1 tradeoff is otherwise unconstrained)
    SplitMix64 rng(8);
    int tested = 0;
    while (tested < 200) {
        LayerSpec s;
        s.kind = LayerSpec::Kind::Convolution;
        s.s1 = 1 + rng.next_below(4);
        s.s2 = 1 + rng.next_below(4);
        s.x1 = s.s1 * (20 + rng.next_below(100));
        s.x2 = s.s2 * (20 + rng.next_below(100));
        s.w1 = 1 + rng.next_below(11);
        s.w2 = 1 + rng.next_below(11);
        s.n1 = 1 + rng.next_below(4);
        s.n2 = s.n1 + rng.next_below(64);
        if (!(s.w1 < s.x1 / s.s1 && s.w2 < s.x2 / s.s2)) continue;
        if (!(s.w1 * s.w2 * s.n1 < (s.x1 / s.s1) * (s.x2 / s.s2))) continue;
        const LayerCost c = count_layer(s);
        CHECK(c.parameters < c.activations);
        ++tested;
    }
}

TEST_CASE("an fc layer after a conv uses the total activation count as n1") {
    auto specs = resolve_layer_specs(
        topo_from("input 28 28 1\nconv 5 5 8 2 2\nrelu\nfc 10\nsoftmaxxent\n"));
    REQUIRE(specs.size() == 2);
    CHECK(specs[0].kind == LayerSpec::Kind::Convolution);
    CHECK(specs[1].kind == LayerSpec::Kind::FullyConnected);
    CHECK(specs[1].n1 == 14 * 14 * 8);
    CHECK(specs[1].n2 == 10);
}

TEST_CASE("analyzer totals equal the trainable parameter vector length") {
    const std::string text = "input 28 28 1\nconv 5 5 8 2 2\nrelu\nconv 5 5 16 2 2\nrelu\nfc 10\nsoftmaxxent\n";
    Network net(topo_from(text), 1);
    auto report = compare_parallelism(resolve_layer_specs(topo_from(text)), 32, 4);
    CHECK(report.total_trainable() == net.parameter_count());
}

TEST_CASE("parallelism proxies: single node, batch linearity, dominance flags") {
    // AlexNet-like chain: conv front, large fc tail
    std::vector<LayerSpec> specs;
    {
        LayerSpec conv;
        conv.kind = LayerSpec::Kind::Convolution;
        conv.n1 = 3;
        conv.n2 = 96;
        conv.x1 = conv.x2 = 224;
        conv.w1 = conv.w2 = 11;
        conv.s1 = conv.s2 = 4;
        LayerSpec fc1;
        fc1.kind = LayerSpec::Kind::FullyConnected;
        fc1.n1 = 301056;
        fc1.n2 = 4096;
        LayerSpec fc2;
        fc2.kind = LayerSpec::Kind::FullyConnected;
        fc2.n1 = 4096;
        fc2.n2 = 1000;
        specs = {conv, fc1, fc2};
    }
    auto single = compare_parallelism(specs, 128, 1);
    CHECK(single.data_parallel_comm() == 0.0);  // log2(1) = 0

    auto base = compare_parallelism(specs, 128, 4);
    auto doubled = compare_parallelism(specs, 256, 4);
    CHECK(doubled.model_parallel_comm() == 2.0 * base.model_parallel_comm());
    CHECK(doubled.data_parallel_comm() == base.data_parallel_comm());

    CHECK_FALSE(base.layers.front().cost.parameter_dominated());  // first conv: activations
    CHECK(base.layers.back().cost.parameter_dominated());         // final fc: parameters
}

TEST_CASE("topology parser rejects malformed files") {
    CHECK_THROWS_AS(topo_from("fc 10\n"), ConfigError);                    // missing input
    CHECK_THROWS_AS(topo_from("input 28 28 1\nblorp 3\n"), ConfigError);   // unknown kind
    CHECK_THROWS_AS(topo_from("input 28 28 1\nconv 5 5 8 2\n"), ConfigError);  // missing field
    CHECK_THROWS_AS(topo_from("input 28 28 1\n"), ConfigError);            // no layers
}

TEST_SUITE_END();
