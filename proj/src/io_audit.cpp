#include "ftdl/io_audit.hpp"

namespace ftdl::io_audit {

namespace {
std::mutex g_mutex;
std::vector<WriteRecord> g_records;
}  // namespace

void record_write(const std::string& label, const std::string& path, uint64_t bytes) {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_records.push_back({label, path, bytes});
}

std::vector<WriteRecord> snapshot() {
    std::lock_guard<std::mutex> lock(g_mutex);
    return g_records;
}

uint64_t bytes_written(const std::string& label) {
    std::lock_guard<std::mutex> lock(g_mutex);
    uint64_t total = 0;
    for (const auto& r : g_records)
        if (r.label == label) total += r.bytes;
    return total;
}

void reset() {
    std::lock_guard<std::mutex> lock(g_mutex);
    g_records.clear();
}

}  // namespace ftdl::io_audit
