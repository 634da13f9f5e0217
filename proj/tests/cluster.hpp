// Thread-per-node driver for in-process protocol tests.
#pragma once

#include <functional>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "ftdl/inproc_transport.hpp"

namespace cluster {

template <typename R>
struct NodeRun {
    std::optional<R> value;
    bool killed = false;
    std::string error;
};

/// Runs fn(node_id) on one thread per node. KilledSignal marks the node as
/// killed; any other exception is captured as text.
template <typename R, typename F>
std::vector<NodeRun<R>> run(const std::vector<ftdl::NodeId>& ids, F fn) {
    std::vector<NodeRun<R>> out(ids.size());
    std::vector<std::thread> threads;
    for (size_t i = 0; i < ids.size(); ++i) {
        threads.emplace_back([&, i] {
            try {
                out[i].value = fn(ids[i]);
            } catch (const ftdl::KilledSignal&) {
                out[i].killed = true;
            } catch (const std::exception& e) {
                out[i].error = e.what();
            }
        });
    }
    for (auto& t : threads) t.join();
    return out;
}

}  // namespace cluster
