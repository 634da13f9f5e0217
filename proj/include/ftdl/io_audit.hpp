#pragma once

#include <cstdint>
#include <mutex>
#include <string>
#include <vector>

namespace ftdl::io_audit {

/// Process-wide ledger of storage writes, keyed by a free-form label
/// ("model", "metrics", "dataset"). The trainer's recovery path is required
/// to perform zero "model" writes; tests assert it through this ledger.
struct WriteRecord {
    std::string label;
    std::string path;
    uint64_t bytes;
};

void record_write(const std::string& label, const std::string& path, uint64_t bytes);
std::vector<WriteRecord> snapshot();
uint64_t bytes_written(const std::string& label);
void reset();

}  // namespace ftdl::io_audit
