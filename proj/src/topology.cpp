#include "ftdl/topology.hpp"

#include <fstream>
#include <sstream>

namespace ftdl {

const char* layer_kind_name(LayerKind k) {
    switch (k) {
        case LayerKind::FullyConnected: return "fc";
        case LayerKind::Convolution: return "conv";
        case LayerKind::ReLU: return "relu";
        case LayerKind::SoftmaxXent: return "softmaxxent";
    }
    return "?";
}

Topology parse_topology(std::istream& in, const std::string& origin) {
    Topology topo;
    std::string line;
    int lineno = 0;
    bool have_input = false;
    auto fail = [&](const std::string& msg) {
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": " + msg);
    };
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        std::istringstream ls(line);
        std::string word;
        if (!(ls >> word)) continue;

        auto want = [&](size_t n, long long* out) {
            for (size_t i = 0; i < n; ++i) {
                if (!(ls >> out[i]) || out[i] <= 0) fail("expected " + std::to_string(n) + " positive integers after '" + word + "'");
            }
        };
        long long v[5];
        if (word == "input") {
            if (have_input) fail("duplicate input line");
            want(3, v);
            topo.in_x1 = static_cast<size_t>(v[0]);
            topo.in_x2 = static_cast<size_t>(v[1]);
            topo.in_c = static_cast<size_t>(v[2]);
            have_input = true;
            continue;
        }
        if (!have_input) fail("first non-comment line must be 'input x1 x2 channels'");
        Topology::Line l;
        if (word == "conv") {
            l.kind = LayerKind::Convolution;
            want(5, v);
            l.w1 = static_cast<size_t>(v[0]);
            l.w2 = static_cast<size_t>(v[1]);
            l.n2 = static_cast<size_t>(v[2]);
            l.s1 = static_cast<size_t>(v[3]);
            l.s2 = static_cast<size_t>(v[4]);
        } else if (word == "fc") {
            l.kind = LayerKind::FullyConnected;
            want(1, v);
            l.n2 = static_cast<size_t>(v[0]);
        } else if (word == "relu") {
            l.kind = LayerKind::ReLU;
        } else if (word == "softmaxxent") {
            l.kind = LayerKind::SoftmaxXent;
        } else {
            fail("unknown layer kind '" + word + "'");
        }
        std::string extra;
        if (ls >> extra) fail("trailing tokens after '" + word + "' layer");
        topo.lines.push_back(l);
    }
    if (!have_input) throw ConfigError(origin + ": missing input line");
    if (topo.lines.empty()) throw ConfigError(origin + ": no layers");
    return topo;
}

Topology parse_topology_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open topology file: " + path);
    return parse_topology(f, path);
}

}  // namespace ftdl
