#include "ftdl/metrics.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ftdl/common.hpp"
#include "ftdl/io_audit.hpp"

namespace ftdl {

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void RunMetrics::validate() const {
    uint32_t prev_live = UINT32_MAX;
    uint64_t expect_batch = 0;
    for (const auto& r : records) {
        if (r.batch != expect_batch++) throw Error("metrics: batch indices not contiguous");
        if (r.live_nodes > prev_live) throw Error("metrics: live-node count increased");
        prev_live = r.live_nodes;
        if (r.shrink_count == 0 && r.shrink_ms != 0.0)
            throw Error("metrics: shrink time on a batch without shrinks");
    }
}

void RunMetrics::recompute_summary_totals() {
    summary.total_batches = records.size();
    summary.total_ms = 0.0;
    summary.total_shrinks = 0;
    summary.total_shrink_ms = 0.0;
    for (const auto& r : records) {
        summary.total_ms += r.compute_ms + r.comm_ms + r.shrink_ms + r.reload_ms;
        summary.total_shrinks += r.shrink_count;
        summary.total_shrink_ms += r.shrink_ms;
    }
    if (!records.empty()) {
        summary.nodes_start = records.front().live_nodes;
        summary.nodes_end = records.back().live_nodes;
    }
}

void write_metrics_csv(const std::string& path, const RunMetrics& m) {
    std::ofstream f(path, std::ios::trunc);
    if (!f) throw IoError("cannot write metrics csv: " + path);
    f << "# ftdl-metrics v1\n";
    f << "batch,comm_epoch,live_nodes,loss,compute_ms,comm_ms,shrink_count,shrink_ms,"
         "reload_bytes,reload_ms\n";
    for (const auto& r : m.records) {
        f << r.batch << ',' << r.comm_epoch << ',' << r.live_nodes << ',' << format_double(r.loss)
          << ',' << format_double(r.compute_ms) << ',' << format_double(r.comm_ms) << ','
          << r.shrink_count << ',' << format_double(r.shrink_ms) << ',' << r.reload_bytes << ','
          << format_double(r.reload_ms) << '\n';
    }
    const auto& s = m.summary;
    f << "# mode " << s.mode << '\n';
    f << "# nodes_start " << s.nodes_start << '\n';
    f << "# nodes_end " << s.nodes_end << '\n';
    f << "# seed " << s.seed << '\n';
    f << "# total_batches " << s.total_batches << '\n';
    f << "# total_ms " << format_double(s.total_ms) << '\n';
    f << "# total_shrinks " << s.total_shrinks << '\n';
    f << "# total_shrink_ms " << format_double(s.total_shrink_ms) << '\n';
    f << "# initial_load_bytes " << s.initial_load_bytes << '\n';
    f << "# initial_load_ms " << format_double(s.initial_load_ms) << '\n';
    f << "# reload_bytes " << s.reload_bytes << '\n';
    f << "# reload_ms " << format_double(s.reload_ms) << '\n';
    if (!f) throw IoError("short write to metrics csv: " + path);
    io_audit::record_write("metrics", path, static_cast<uint64_t>(f.tellp()));
}

RunMetrics read_metrics_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw IoError("cannot open metrics csv: " + path);
    std::string line;
    if (!std::getline(f, line) || line.rfind("# ftdl-metrics v1", 0) != 0)
        throw IoError("not a ftdl metrics csv: " + path);
    RunMetrics m;
    while (std::getline(f, line)) {
        if (line.empty()) continue;
        if (line[0] == '#') {
            std::istringstream ss(line.substr(1));
            std::string key;
            ss >> key;
            auto& s = m.summary;
            if (key == "mode") ss >> s.mode;
            else if (key == "nodes_start") ss >> s.nodes_start;
            else if (key == "nodes_end") ss >> s.nodes_end;
            else if (key == "seed") ss >> s.seed;
            else if (key == "total_batches") ss >> s.total_batches;
            else if (key == "total_ms") ss >> s.total_ms;
            else if (key == "total_shrinks") ss >> s.total_shrinks;
            else if (key == "total_shrink_ms") ss >> s.total_shrink_ms;
            else if (key == "initial_load_bytes") ss >> s.initial_load_bytes;
            else if (key == "initial_load_ms") ss >> s.initial_load_ms;
            else if (key == "reload_bytes") ss >> s.reload_bytes;
            else if (key == "reload_ms") ss >> s.reload_ms;
            continue;
        }
        if (line.rfind("batch,", 0) == 0) continue;  // column header
        BatchRecord r;
        char comma;
        std::istringstream ss(line);
        ss >> r.batch >> comma >> r.comm_epoch >> comma >> r.live_nodes >> comma >> r.loss >>
            comma >> r.compute_ms >> comma >> r.comm_ms >> comma >> r.shrink_count >> comma >>
            r.shrink_ms >> comma >> r.reload_bytes >> comma >> r.reload_ms;
        if (!ss) throw IoError("bad metrics row in " + path + ": " + line);
        m.records.push_back(r);
    }
    return m;
}

}  // namespace ftdl
