#include <doctest.h>

#include <sstream>

#include "ftdl/network.hpp"
#include "ftdl/rng.hpp"
#include "oracles.hpp"

using namespace ftdl;

namespace {

Topology topo_from(const std::string& text) {
    std::istringstream ss(text);
    return parse_topology(ss, "<test>");
}

Tensor random_batch(std::vector<size_t> shape, uint64_t seed) {
    Tensor t(std::move(shape));
    SplitMix64 rng(seed);
    for (double& v : t.data) v = rng.next_double();
    return t;
}

}  // namespace

TEST_SUITE_BEGIN("nn");

TEST_CASE("identity fc with relu clamps negatives") {
    Network net(topo_from("input 1 1 2\nfc 2\nrelu\n"), 1);
    FlatVector p = {1, 0, 0, 1, 0, 0};  // W = I, b = 0
    net.load_parameter_vector(p);
    Tensor in({1, 2}, {3.0, -1.0});
    const Tensor& out = net.forward(in);
    CHECK(out.data[0] == 3.0);
    CHECK(out.data[1] == 0.0);
}

TEST_CASE("zero weights give a uniform softmax") {
    Network net(topo_from("input 1 1 5\nfc 4\nsoftmaxxent\n"), 1);
    net.load_parameter_vector(FlatVector(net.parameter_count(), 0.0));
    const Tensor& out = net.forward(random_batch({3, 5}, 2));
    for (double v : out.data) CHECK(v == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("conv net forward matches the direct-convolution oracle") {
    // LeNet-3-style strided conv stack on a fixed random 28x28 input
    Network net(topo_from("input 28 28 1\nconv 5 5 8 2 2\nrelu\nconv 5 5 16 2 2\nrelu\nfc 10\nsoftmaxxent\n"), 42);
    Tensor in = random_batch({2, 28, 28, 1}, 7);
    const Tensor& out = net.forward(in);
    const auto expect = oracle::direct_forward(net, in);
    REQUIRE(out.size() == expect.size());
    for (size_t i = 0; i < expect.size(); ++i) CHECK(std::abs(out.data[i] - expect[i]) <= 1e-12);
}

TEST_CASE("finite differences confirm every parameter gradient of a 2-layer net") {
    Network net(topo_from("input 1 1 6\nfc 5\nrelu\nfc 3\nsoftmaxxent\n"), 3);
    Tensor x = random_batch({4, 6}, 11);
    const Tensor y = one_hot({0, 2, 1, 2}, 3);
    std::vector<size_t> all(net.parameter_count());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(oracle::max_grad_error(net, x, y, all) <= 1e-6);
}

TEST_CASE("finite differences confirm convolution gradients") {
    Network net(topo_from("input 6 6 2\nconv 3 3 4 2 2\nrelu\nfc 3\nsoftmaxxent\n"), 5);
    Tensor x = random_batch({3, 6, 6, 2}, 13);
    const Tensor y = one_hot({1, 0, 2}, 3);
    std::vector<size_t> all(net.parameter_count());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    CHECK(oracle::max_grad_error(net, x, y, all) <= 1e-6);
}

TEST_CASE("perfect predictions give zero loss and negligible gradient") {
    const size_t k = 4;
    Network net(topo_from("input 1 1 4\nfc 4\nsoftmaxxent\n"), 1);
    FlatVector p(net.parameter_count(), 0.0);
    for (size_t i = 0; i < k; ++i) p[i * k + i] = 1000.0;  // W = 1000 * I saturates softmax
    net.load_parameter_vector(p);
    const Tensor x = one_hot({0, 1, 2, 3}, k);
    const Tensor y = one_hot({0, 1, 2, 3}, k);
    net.forward(x);
    auto [loss, grad] = net.backward(y);
    CHECK(std::abs(loss) <= 1e-9);
    double norm = 0;
    for (double g : grad) norm += g * g;
    CHECK(std::sqrt(norm) <= 1e-6);
}

TEST_CASE("duplicating every sample leaves loss and gradient unchanged") {
    Network net(topo_from("input 1 1 6\nfc 4\nsoftmaxxent\n"), 9);
    Tensor x = random_batch({3, 6}, 21);
    const Tensor y = one_hot({0, 3, 1}, 4);
    net.forward(x);
    auto [loss1, grad1] = net.backward(y);

    Tensor x2({6, 6});
    std::vector<uint32_t> labels2;
    const std::vector<uint32_t> labels = {0, 3, 1};
    for (size_t i = 0; i < 3; ++i)
        for (int rep = 0; rep < 2; ++rep) {
            std::copy(x.data.begin() + i * 6, x.data.begin() + (i + 1) * 6,
                      x2.data.begin() + (2 * i + rep) * 6);
            labels2.push_back(labels[i]);
        }
    net.forward(x2);
    auto [loss2, grad2] = net.backward(one_hot(labels2, 4));
    CHECK(std::abs(loss1 - loss2) <= 1e-12);
    for (size_t i = 0; i < grad1.size(); ++i) CHECK(std::abs(grad1[i] - grad2[i]) <= 1e-12);
}

TEST_CASE("zero learning rate leaves parameters bitwise unchanged") {
    Network net(topo_from("input 1 1 6\nfc 4\nsoftmaxxent\n"), 17);
    const FlatVector before = net.parameter_vector();
    FlatVector grad(net.parameter_count());
    SplitMix64 rng(3);
    for (double& g : grad) g = rng.next_symmetric(1.0);
    net.apply_update(grad, 0.0);
    CHECK(net.parameter_vector() == before);
}

TEST_CASE("a single update step does the arithmetic") {
    Network net(topo_from("input 1 1 1\nfc 1\n"), 1);
    net.load_parameter_vector({1.0, 0.0});
    net.apply_update({0.5, 0.0}, 0.1);
    CHECK(net.parameter_vector()[0] == doctest::Approx(0.95).epsilon(1e-15));
    CHECK(net.parameter_vector()[1] == 0.0);
}

TEST_CASE("full-batch descent on a separable toy set strictly decreases the loss") {
    // two linearly separable point clouds, logistic-style model
    Network net(topo_from("input 1 1 2\nfc 2\nsoftmaxxent\n"), 2);
    Tensor x({8, 2});
    std::vector<uint32_t> labels;
    SplitMix64 rng(5);
    for (size_t i = 0; i < 8; ++i) {
        const bool cls = i % 2;
        x.at(i, 0) = (cls ? 2.0 : -2.0) + rng.next_symmetric(0.3);
        x.at(i, 1) = (cls ? 1.5 : -1.5) + rng.next_symmetric(0.3);
        labels.push_back(cls ? 1 : 0);
    }
    const Tensor y = one_hot(labels, 2);
    net.forward(x);
    double prev = net.loss(y);  // recomputed-loss oracle: evaluate fresh each step
    for (int step = 0; step < 50; ++step) {
        net.forward(x);
        auto [loss, grad] = net.backward(y);
        (void)loss;
        net.apply_update(grad, 0.1);
        net.forward(x);
        const double cur = net.loss(y);
        CHECK(cur < prev);
        prev = cur;
    }
}

TEST_CASE("parameter vector round-trips bitwise") {
    Network net(topo_from("input 6 6 2\nconv 3 3 4 2 2\nrelu\nfc 5\nsoftmaxxent\n"), 77);
    const FlatVector v = net.parameter_vector();
    Network other(topo_from("input 6 6 2\nconv 3 3 4 2 2\nrelu\nfc 5\nsoftmaxxent\n"), 78);
    other.load_parameter_vector(v);
    CHECK(other.parameter_vector() == v);
    CHECK_THROWS_AS(other.load_parameter_vector(FlatVector(v.size() + 1)), ShapeError);
}

TEST_CASE("fc 784->10 has 7850 parameters") {
    Network net(topo_from("input 28 28 1\nfc 10\nsoftmaxxent\n"), 1);
    CHECK(net.parameter_count() == 7850);
}

TEST_CASE("batch-mean gradients recombine linearly over any split") {
    Network net(topo_from("input 1 1 8\nfc 6\nrelu\nfc 3\nsoftmaxxent\n"), 23);
    SplitMix64 rng(99);
    for (int trial = 0; trial < 5; ++trial) {
        const size_t n1 = 1 + rng.next_below(5), n2 = 1 + rng.next_below(5);
        Tensor xa = random_batch({n1, 8}, 100 + trial);
        Tensor xb = random_batch({n2, 8}, 200 + trial);
        std::vector<uint32_t> la, lb;
        for (size_t i = 0; i < n1; ++i) la.push_back(static_cast<uint32_t>(rng.next_below(3)));
        for (size_t i = 0; i < n2; ++i) lb.push_back(static_cast<uint32_t>(rng.next_below(3)));

        net.forward(xa);
        auto [lossa, ga] = net.backward(one_hot(la, 3));
        net.forward(xb);
        auto [lossb, gb] = net.backward(one_hot(lb, 3));

        Tensor joint({n1 + n2, 8});
        std::copy(xa.data.begin(), xa.data.end(), joint.data.begin());
        std::copy(xb.data.begin(), xb.data.end(), joint.data.begin() + n1 * 8);
        std::vector<uint32_t> lj = la;
        lj.insert(lj.end(), lb.begin(), lb.end());
        net.forward(joint);
        auto [lossj, gj] = net.backward(one_hot(lj, 3));

        const double wa = double(n1) / double(n1 + n2), wb = double(n2) / double(n1 + n2);
        CHECK(std::abs(lossj - (wa * lossa + wb * lossb)) <= 1e-12);
        for (size_t i = 0; i < gj.size(); ++i)
            CHECK(std::abs(gj[i] - (wa * ga[i] + wb * gb[i])) <= 1e-12);
    }
}

TEST_CASE("same seed and inputs give bitwise-identical loss and gradients") {
    auto run = [] {
        Network net(topo_from("input 6 6 1\nconv 3 3 2 2 2\nrelu\nfc 3\nsoftmaxxent\n"), 31);
        Tensor x = random_batch({4, 6, 6, 1}, 8);
        net.forward(x);
        return net.backward(one_hot({0, 1, 2, 0}, 3));
    };
    auto [l1, g1] = run();
    auto [l2, g2] = run();
    CHECK(l1 == l2);
    CHECK(g1 == g2);
}

TEST_CASE("forward caches are overwritten between batches") {
    Network net(topo_from("input 1 1 4\nfc 3\nsoftmaxxent\n"), 31);
    Tensor a = random_batch({2, 4}, 1), b = random_batch({2, 4}, 2);
    const Tensor y = one_hot({0, 1}, 3);
    net.forward(a);
    auto [la1, ga1] = net.backward(y);
    net.forward(b);
    net.backward(y);
    net.forward(a);
    auto [la2, ga2] = net.backward(y);
    CHECK(la1 == la2);
    CHECK(ga1 == ga2);
}

TEST_CASE("errors name the offending layer and precondition") {
    Network net(topo_from("input 1 1 4\nfc 3\nsoftmaxxent\n"), 31);
    CHECK_THROWS_AS(net.forward(random_batch({2, 5}, 1)), ShapeError);
    Network fresh(topo_from("input 1 1 4\nfc 3\nsoftmaxxent\n"), 31);
    CHECK_THROWS_WITH_AS(fresh.backward(one_hot({0}, 3)), doctest::Contains("before forward"),
                         Error);
    fresh.forward(random_batch({2, 4}, 1));
    CHECK_THROWS_AS(fresh.backward(one_hot({0, 1, 2}, 3)), ShapeError);  // label shape mismatch
    CHECK_THROWS_AS(Network(topo_from("input 5 5 1\nconv 3 3 2 2 2\nsoftmaxxent\n"), 1),
                    ConfigError);  // stride does not divide extent
}

TEST_SUITE_END();
