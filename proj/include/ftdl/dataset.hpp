#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ftdl/partition.hpp"
#include "ftdl/tensor.hpp"

namespace ftdl {

/// Dataset descriptor. Serialized as a small JSON file next to the data so a
/// run references one path. Two on-disk layouts are supported:
///   - "idx":  the standard IDX format (big-endian, magic 0x0000080x)
///   - "raw":  our raw shard format (little-endian, fixed header; see
///             docs/formats.md for exact byte offsets)
struct DatasetMeta {
    uint64_t sample_count = 0;
    std::vector<uint64_t> sample_shape;  // per-sample extents, e.g. {28, 28, 1}
    uint32_t class_count = 0;
    std::string format;  // "idx" or "raw"
    std::string samples_path;
    std::string labels_path;

    uint64_t sample_features() const {
        uint64_t n = 1;
        for (uint64_t d : sample_shape) n *= d;
        return n;
    }
};

DatasetMeta load_dataset_meta(const std::string& json_path);
void save_dataset_meta(const std::string& json_path, const DatasetMeta& meta);

/// Result of a ranged load. bytes_* count what was actually read from storage;
/// payload bytes are proportional to the requested ranges only.
struct LoadedRanges {
    std::vector<ShardRange> ranges;     // in index order
    Tensor samples;                     // [n, sample_shape...], values in [0, 1] for idx data
    std::vector<uint32_t> labels;       // class ids, parallel to samples
    uint64_t payload_bytes = 0;
    uint64_t header_bytes = 0;
    double wall_ms = 0.0;
};

/// Reads exactly the requested sample ranges (and their labels) in index
/// order. Ranges must be in bounds; files are validated against the meta.
LoadedRanges load_ranges(const DatasetMeta& meta, const std::vector<ShardRange>& ranges);

// ---- IDX format ------------------------------------------------------------

struct IdxHeader {
    uint8_t dtype = 0;  // 0x08 ubyte, 0x0D float32, 0x0E float64
    std::vector<uint64_t> dims;
    uint64_t header_bytes = 0;
    uint64_t elem_bytes = 0;
};

IdxHeader read_idx_header(const std::string& path);
void write_idx_ubyte(const std::string& path, const std::vector<uint64_t>& dims,
                     const std::vector<uint8_t>& data);

// ---- raw shard format -------------------------------------------------------

struct RawHeader {
    uint32_t dtype = 0;  // 0 = float64, 1 = uint8
    uint64_t sample_count = 0;
    std::vector<uint64_t> dims;  // per-sample extents
    uint64_t header_bytes = 0;
    uint64_t elem_bytes = 0;
};

RawHeader read_raw_header(const std::string& path);
void write_raw_f64(const std::string& path, uint64_t sample_count,
                   const std::vector<uint64_t>& sample_dims, const std::vector<double>& data);
void write_raw_u8(const std::string& path, uint64_t sample_count,
                  const std::vector<uint64_t>& sample_dims, const std::vector<uint8_t>& data);

// ---- synthetic data ---------------------------------------------------------

struct SynthOptions {
    uint64_t sample_count = 1024;
    uint64_t x1 = 28, x2 = 28, channels = 1;
    uint32_t class_count = 10;
    uint64_t seed = 1;
    double noise = 0.25;         // relative to the class prototype contrast
    std::string format = "idx";  // "idx" or "raw"
};

/// Generates a seeded class-prototype dataset (each class is a distinct
/// pattern plus noise, so small models can actually learn it) and writes
/// samples, labels and the meta JSON. Returns the meta.
DatasetMeta make_synthetic_dataset(const std::string& out_prefix, const SynthOptions& opts);

}  // namespace ftdl
