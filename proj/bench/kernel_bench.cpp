// Compares the serial and OpenMP kernel paths on training-shaped workloads
// and reports the fault-tolerance overhead of the retry wrapper on a
// fault-free allreduce. Both kernel paths must agree bitwise; this binary
// checks that too.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include <omp.h>

#include "ftdl/collective.hpp"
#include "ftdl/inproc_transport.hpp"
#include "ftdl/kernels.hpp"
#include "ftdl/rng.hpp"

using namespace ftdl;
namespace k = ftdl::kernels;

namespace {

double now_ms() {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now().time_since_epoch())
        .count();
}

template <typename F>
double time_loop(int iters, F&& fn) {
    fn();  // warm up
    const double t0 = now_ms();
    for (int i = 0; i < iters; ++i) fn();
    return (now_ms() - t0) / iters;
}

std::vector<double> random_vec(size_t n, uint64_t seed) {
    std::vector<double> v(n);
    SplitMix64 rng(seed);
    for (double& x : v) x = rng.next_symmetric(1.0);
    return v;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
    return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * 8) == 0;
}

struct Row {
    const char* name;
    double serial_ms;
    double parallel_ms;
    bool identical;
};

void print_rows(const std::vector<Row>& rows) {
    std::printf("%-26s %12s %12s %9s %10s\n", "kernel", "serial ms", "omp ms", "speedup",
                "bitwise");
    for (const auto& r : rows)
        std::printf("%-26s %12.3f %12.3f %8.2fx %10s\n", r.name, r.serial_ms, r.parallel_ms,
                    r.serial_ms / r.parallel_ms, r.identical ? "equal" : "DIFFER");
}

}  // namespace

int main() {
    std::printf("openmp max threads: %d\n\n", omp_get_max_threads());
    std::vector<Row> rows;

    // fc 784 -> 256, batch 64
    {
        const size_t batch = 64, n1 = 784, n2 = 256;
        auto x = random_vec(batch * n1, 1), w = random_vec(n2 * n1, 2), b = random_vec(n2, 3);
        std::vector<double> ys(batch * n2), yp(batch * n2);
        k::set_mode(k::Mode::Serial);
        const double ts = time_loop(20, [&] { k::fc_forward(x.data(), w.data(), b.data(), ys.data(), batch, n1, n2); });
        k::set_mode(k::Mode::Parallel);
        const double tp = time_loop(20, [&] { k::fc_forward(x.data(), w.data(), b.data(), yp.data(), batch, n1, n2); });
        rows.push_back({"fc_forward 64x784x256", ts, tp, bitwise_equal(ys, yp)});

        auto dy = random_vec(batch * n2, 4);
        std::vector<double> dws(n2 * n1), dwp(n2 * n1);
        k::set_mode(k::Mode::Serial);
        const double gs = time_loop(20, [&] { k::fc_grad_weights(x.data(), dy.data(), dws.data(), batch, n1, n2); });
        k::set_mode(k::Mode::Parallel);
        const double gp = time_loop(20, [&] { k::fc_grad_weights(x.data(), dy.data(), dwp.data(), batch, n1, n2); });
        rows.push_back({"fc_grad_weights", gs, gp, bitwise_equal(dws, dwp)});
    }

    // conv 28x28x1 -> 8 features, 5x5 window, stride 1, batch 16
    {
        k::ConvGeom g{28, 28, 1, 8, 5, 5, 1, 1};
        const size_t batch = 16;
        auto x = random_vec(batch * g.x1 * g.x2 * g.n1, 5);
        auto w = random_vec(g.w1 * g.w2 * g.n1 * g.n2, 6);
        auto b = random_vec(g.n2, 7);
        std::vector<double> cols(batch * g.o1() * g.o2() * g.patch());
        std::vector<double> ys(batch * g.o1() * g.o2() * g.n2), yp(ys.size());
        k::set_mode(k::Mode::Serial);
        const double ts = time_loop(10, [&] { k::conv_forward(x.data(), w.data(), b.data(), ys.data(), g, batch, cols.data()); });
        k::set_mode(k::Mode::Parallel);
        const double tp = time_loop(10, [&] { k::conv_forward(x.data(), w.data(), b.data(), yp.data(), g, batch, cols.data()); });
        rows.push_back({"conv_forward 16@28x28 5x5", ts, tp, bitwise_equal(ys, yp)});

        auto dy = random_vec(ys.size(), 8);
        std::vector<double> dxs(x.size()), dxp(x.size());
        std::vector<double> scratch(cols.size());
        k::set_mode(k::Mode::Serial);
        const double gs = time_loop(10, [&] { k::conv_grad_input(dy.data(), w.data(), dxs.data(), g, batch, scratch.data()); });
        k::set_mode(k::Mode::Parallel);
        const double gp = time_loop(10, [&] { k::conv_grad_input(dy.data(), w.data(), dxp.data(), g, batch, scratch.data()); });
        rows.push_back({"conv_grad_input", gs, gp, bitwise_equal(dxs, dxp)});
    }

    print_rows(rows);
    k::set_mode(k::Mode::Serial);

    // plain allreduce vs the fault-tolerant retry wrapper, no faults injected
    {
        const uint32_t n = 4;
        const size_t len = 50890;  // mlp-sized gradient
        std::vector<NodeId> ids{0, 1, 2, 3};
        InprocNet net(ids);
        double plain_ms = 0, ft_ms = 0;
        std::vector<std::thread> threads;
        std::vector<double> plain_each(n), ft_each(n);
        for (uint32_t i = 0; i < n; ++i) {
            threads.emplace_back([&, i] {
                Communicator comm(net.node(ids[i]), ids, RunClock{true});
                auto data = random_vec(len, 100 + i);
                const int iters = 300;
                for (int it = 0; it < 5; ++it) comm.allreduce_sum(data);  // warm up
                comm.barrier();
                double t0 = now_ms();
                for (int it = 0; it < iters; ++it) comm.allreduce_sum(data);
                plain_each[i] = (now_ms() - t0) / iters;
                comm.barrier();  // separate the phases
                t0 = now_ms();
                for (int it = 0; it < iters; ++it) comm.allreduce_until_success(data);
                ft_each[i] = (now_ms() - t0) / iters;
            });
        }
        for (auto& t : threads) t.join();
        for (uint32_t i = 0; i < n; ++i) {
            plain_ms += plain_each[i] / n;
            ft_ms += ft_each[i] / n;
        }
        std::printf("\nallreduce %zu doubles, %u nodes: plain %.3f ms, until-success %.3f ms, overhead %+.2f%%\n",
                    len, n, plain_ms, ft_ms, 100.0 * (ft_ms - plain_ms) / plain_ms);
    }
    return 0;
}
