#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "ftdl/common.hpp"

namespace ftdl {

enum class LayerKind { FullyConnected, Convolution, ReLU, SoftmaxXent };

const char* layer_kind_name(LayerKind k);

/// Parsed model topology file. Grammar (one layer per line, '#' comments):
///
///   input <x1> <x2> <channels>
///   conv <w1> <w2> <out_features> <s1> <s2>
///   relu
///   fc <out_features>
///   softmaxxent
///
/// The `input` line must come first; all feature/extent chaining (n1 for each
/// layer, spatial extents) is inferred from it. See docs/formats.md.
struct Topology {
    struct Line {
        LayerKind kind;
        size_t w1 = 0, w2 = 0, n2 = 0, s1 = 0, s2 = 0;  // conv: all; fc: n2 only
    };
    size_t in_x1 = 0, in_x2 = 0, in_c = 0;
    std::vector<Line> lines;
};

Topology parse_topology(std::istream& in, const std::string& origin = "<stream>");
Topology parse_topology_file(const std::string& path);

}  // namespace ftdl
