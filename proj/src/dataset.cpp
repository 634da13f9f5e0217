#include "ftdl/dataset.hpp"

#include <algorithm>
#include <chrono>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "ftdl/io_audit.hpp"
#include "ftdl/rng.hpp"

namespace ftdl {

namespace {

constexpr uint32_t kRawMagic = 0x48535446;  // "FTSH" little-endian
constexpr uint32_t kRawVersion = 1;

uint32_t be32(const uint8_t* p) {
    return (uint32_t(p[0]) << 24) | (uint32_t(p[1]) << 16) | (uint32_t(p[2]) << 8) | uint32_t(p[3]);
}

void put_be32(std::ofstream& f, uint32_t v) {
    uint8_t b[4] = {uint8_t(v >> 24), uint8_t(v >> 16), uint8_t(v >> 8), uint8_t(v)};
    f.write(reinterpret_cast<const char*>(b), 4);
}

template <typename T>
void put_le(std::ofstream& f, T v) {
    f.write(reinterpret_cast<const char*>(&v), sizeof(T));  // x86-64: native little-endian
}

template <typename T>
T get_le(std::ifstream& f, const std::string& path) {
    T v{};
    f.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!f) throw IoError("short read in " + path);
    return v;
}

uint64_t elem_size_for_dtype(uint8_t dtype, const std::string& path) {
    switch (dtype) {
        case 0x08: return 1;  // unsigned byte
        case 0x0D: return 4;  // float32
        case 0x0E: return 8;  // float64
        default: throw IoError("corrupt header: unsupported IDX dtype in " + path);
    }
}

}  // namespace

IdxHeader read_idx_header(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    uint8_t magic[4];
    f.read(reinterpret_cast<char*>(magic), 4);
    if (!f || magic[0] != 0 || magic[1] != 0)
        throw IoError("corrupt header: bad IDX magic in " + path);
    IdxHeader h;
    h.dtype = magic[2];
    h.elem_bytes = elem_size_for_dtype(h.dtype, path);
    const uint8_t ndims = magic[3];
    if (ndims == 0 || ndims > 8) throw IoError("corrupt header: bad IDX rank in " + path);
    for (uint8_t i = 0; i < ndims; ++i) {
        uint8_t raw[4];
        f.read(reinterpret_cast<char*>(raw), 4);
        if (!f) throw IoError("corrupt header: truncated IDX dims in " + path);
        h.dims.push_back(be32(raw));
    }
    h.header_bytes = 4 + 4ull * ndims;
    return h;
}

void write_idx_ubyte(const std::string& path, const std::vector<uint64_t>& dims,
                     const std::vector<uint8_t>& data) {
    uint64_t n = 1;
    for (uint64_t d : dims) n *= d;
    if (n != data.size()) throw IoError("idx write: dims do not match data length");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    uint8_t magic[4] = {0, 0, 0x08, static_cast<uint8_t>(dims.size())};
    f.write(reinterpret_cast<const char*>(magic), 4);
    for (uint64_t d : dims) put_be32(f, static_cast<uint32_t>(d));
    f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    if (!f) throw IoError("short write to " + path);
    io_audit::record_write("dataset", path, 4 + 4 * dims.size() + data.size());
}

RawHeader read_raw_header(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw IoError("cannot open " + path);
    RawHeader h;
    if (get_le<uint32_t>(f, path) != kRawMagic)
        throw IoError("corrupt header: bad raw-shard magic in " + path);
    if (get_le<uint32_t>(f, path) != kRawVersion)
        throw IoError("corrupt header: unsupported raw-shard version in " + path);
    h.dtype = get_le<uint32_t>(f, path);
    if (h.dtype > 1) throw IoError("corrupt header: bad raw-shard dtype in " + path);
    h.elem_bytes = h.dtype == 0 ? 8 : 1;
    h.sample_count = get_le<uint64_t>(f, path);
    const uint32_t ndims = get_le<uint32_t>(f, path);
    if (ndims == 0 || ndims > 8) throw IoError("corrupt header: bad raw-shard rank in " + path);
    for (uint32_t i = 0; i < ndims; ++i) h.dims.push_back(get_le<uint64_t>(f, path));
    h.header_bytes = 4 + 4 + 4 + 8 + 4 + 8ull * ndims;
    return h;
}

namespace {

void write_raw(const std::string& path, uint32_t dtype, uint64_t sample_count,
               const std::vector<uint64_t>& sample_dims, const void* data, uint64_t data_bytes) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw IoError("cannot write " + path);
    put_le(f, kRawMagic);
    put_le(f, kRawVersion);
    put_le(f, dtype);
    put_le(f, sample_count);
    put_le(f, static_cast<uint32_t>(sample_dims.size()));
    for (uint64_t d : sample_dims) put_le(f, d);
    f.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(data_bytes));
    if (!f) throw IoError("short write to " + path);
    io_audit::record_write("dataset", path, data_bytes);
}

}  // namespace

void write_raw_f64(const std::string& path, uint64_t sample_count,
                   const std::vector<uint64_t>& sample_dims, const std::vector<double>& data) {
    write_raw(path, 0, sample_count, sample_dims, data.data(), data.size() * 8);
}

void write_raw_u8(const std::string& path, uint64_t sample_count,
                  const std::vector<uint64_t>& sample_dims, const std::vector<uint8_t>& data) {
    write_raw(path, 1, sample_count, sample_dims, data.data(), data.size());
}

DatasetMeta load_dataset_meta(const std::string& json_path) {
    std::ifstream f(json_path);
    if (!f) throw IoError("cannot open dataset meta: " + json_path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const std::exception& e) {
        throw IoError("bad dataset meta " + json_path + ": " + e.what());
    }
    DatasetMeta m;
    m.sample_count = j.at("sample_count").get<uint64_t>();
    m.sample_shape = j.at("sample_shape").get<std::vector<uint64_t>>();
    m.class_count = j.at("class_count").get<uint32_t>();
    m.format = j.at("format").get<std::string>();
    m.samples_path = j.at("samples").get<std::string>();
    m.labels_path = j.at("labels").get<std::string>();
    if (m.sample_count == 0) throw IoError("dataset meta has zero samples: " + json_path);
    // resolve paths relative to the meta file
    const auto dir = json_path.find_last_of('/');
    if (dir != std::string::npos) {
        const std::string base = json_path.substr(0, dir + 1);
        if (!m.samples_path.empty() && m.samples_path[0] != '/') m.samples_path = base + m.samples_path;
        if (!m.labels_path.empty() && m.labels_path[0] != '/') m.labels_path = base + m.labels_path;
    }
    return m;
}

void save_dataset_meta(const std::string& json_path, const DatasetMeta& meta) {
    nlohmann::json j;
    j["sample_count"] = meta.sample_count;
    j["sample_shape"] = meta.sample_shape;
    j["class_count"] = meta.class_count;
    j["format"] = meta.format;
    // store basenames so the directory can be moved as a unit
    auto base = [](const std::string& p) {
        const auto s = p.find_last_of('/');
        return s == std::string::npos ? p : p.substr(s + 1);
    };
    j["samples"] = base(meta.samples_path);
    j["labels"] = base(meta.labels_path);
    std::ofstream f(json_path, std::ios::trunc);
    if (!f) throw IoError("cannot write dataset meta: " + json_path);
    f << j.dump(2) << "\n";
    io_audit::record_write("dataset", json_path, j.dump(2).size());
}

LoadedRanges load_ranges(const DatasetMeta& meta, const std::vector<ShardRange>& ranges) {
    const auto t0 = std::chrono::steady_clock::now();
    LoadedRanges out;
    out.ranges = ranges;
    std::sort(out.ranges.begin(), out.ranges.end(),
              [](const ShardRange& a, const ShardRange& b) { return a.begin < b.begin; });
    uint64_t total = 0;
    for (const auto& r : out.ranges) {
        if (r.begin >= r.end || r.end > meta.sample_count)
            throw IoError("load_ranges: range out of bounds");
        total += r.size();
    }
    const uint64_t feat = meta.sample_features();

    uint64_t sample_elem = 0, sample_payload_off = 0;
    uint64_t label_elem = 0, label_payload_off = 0;
    uint32_t sample_dtype = 0, label_dtype = 0;
    if (meta.format == "idx") {
        IdxHeader sh = read_idx_header(meta.samples_path);
        IdxHeader lh = read_idx_header(meta.labels_path);
        uint64_t file_feat = 1;
        for (size_t i = 1; i < sh.dims.size(); ++i) file_feat *= sh.dims[i];
        if (sh.dims.empty() || sh.dims[0] != meta.sample_count || file_feat != feat)
            throw IoError("sample file shape disagrees with dataset meta: " + meta.samples_path);
        if (lh.dims.size() != 1 || lh.dims[0] != meta.sample_count)
            throw IoError("label file shape disagrees with dataset meta: " + meta.labels_path);
        sample_elem = sh.elem_bytes;
        label_elem = lh.elem_bytes;
        sample_payload_off = sh.header_bytes;
        label_payload_off = lh.header_bytes;
        sample_dtype = sh.dtype;
        label_dtype = lh.dtype;
        out.header_bytes = sh.header_bytes + lh.header_bytes;
    } else if (meta.format == "raw") {
        RawHeader sh = read_raw_header(meta.samples_path);
        RawHeader lh = read_raw_header(meta.labels_path);
        uint64_t file_feat = 1;
        for (uint64_t d : sh.dims) file_feat *= d;
        if (sh.sample_count != meta.sample_count || file_feat != feat)
            throw IoError("sample file shape disagrees with dataset meta: " + meta.samples_path);
        if (lh.sample_count != meta.sample_count)
            throw IoError("label file shape disagrees with dataset meta: " + meta.labels_path);
        sample_elem = sh.elem_bytes;
        label_elem = lh.elem_bytes;
        sample_payload_off = sh.header_bytes;
        label_payload_off = lh.header_bytes;
        sample_dtype = sh.dtype == 0 ? 0x0E : 0x08;
        label_dtype = lh.dtype == 0 ? 0x0E : 0x08;
        out.header_bytes = sh.header_bytes + lh.header_bytes;
    } else {
        throw IoError("unknown dataset format '" + meta.format + "'");
    }

    std::vector<size_t> tshape{static_cast<size_t>(total)};
    for (uint64_t d : meta.sample_shape) tshape.push_back(static_cast<size_t>(d));
    out.samples = Tensor(tshape);
    out.labels.resize(total);

    std::ifstream sf(meta.samples_path, std::ios::binary);
    std::ifstream lf(meta.labels_path, std::ios::binary);
    if (!sf || !lf) throw IoError("cannot open dataset payload files");

    uint64_t cursor = 0;
    std::vector<uint8_t> buf;
    for (const auto& r : out.ranges) {
        const uint64_t n = r.size();
        // samples
        const uint64_t sbytes = n * feat * sample_elem;
        buf.resize(sbytes);
        sf.seekg(static_cast<std::streamoff>(sample_payload_off + r.begin * feat * sample_elem));
        sf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(sbytes));
        if (!sf) throw IoError("short read of samples in " + meta.samples_path);
        double* dst = out.samples.data.data() + cursor * feat;
        if (sample_dtype == 0x08) {
            for (uint64_t i = 0; i < n * feat; ++i) dst[i] = buf[i] / 255.0;
        } else if (sample_dtype == 0x0E) {
            std::memcpy(dst, buf.data(), sbytes);
        } else {  // float32
            const float* src = reinterpret_cast<const float*>(buf.data());
            for (uint64_t i = 0; i < n * feat; ++i) dst[i] = src[i];
        }
        out.payload_bytes += sbytes;
        // labels
        const uint64_t lbytes = n * label_elem;
        buf.resize(lbytes);
        lf.seekg(static_cast<std::streamoff>(label_payload_off + r.begin * label_elem));
        lf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(lbytes));
        if (!lf) throw IoError("short read of labels in " + meta.labels_path);
        for (uint64_t i = 0; i < n; ++i) {
            uint32_t cls;
            if (label_dtype == 0x08) cls = buf[i];
            else if (label_dtype == 0x0E) cls = static_cast<uint32_t>(reinterpret_cast<const double*>(buf.data())[i]);
            else cls = static_cast<uint32_t>(reinterpret_cast<const float*>(buf.data())[i]);
            if (cls >= meta.class_count)
                throw IoError("label out of range in " + meta.labels_path);
            out.labels[cursor + i] = cls;
        }
        cursor += n;
    }
    out.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

DatasetMeta make_synthetic_dataset(const std::string& out_prefix, const SynthOptions& opts) {
    if (opts.sample_count == 0 || opts.class_count == 0)
        throw ConfigError("synthetic dataset needs samples and classes");
    const uint64_t feat = opts.x1 * opts.x2 * opts.channels;

    // distinct half-bright/bright prototype per class; noise keeps it learnable
    // rather than memorizable
    std::vector<double> protos(opts.class_count * feat);
    SplitMix64 proto_rng(derive_seed(opts.seed, 0xda7a, 1));
    for (double& p : protos) p = (proto_rng.next() & 1) ? 0.85 : 0.15;

    SplitMix64 rng(derive_seed(opts.seed, 0xda7a, 2));
    std::vector<uint8_t> labels(opts.sample_count);
    std::vector<uint8_t> pixels_u8;
    std::vector<double> pixels_f64;
    const bool raw = opts.format == "raw";
    if (raw) pixels_f64.resize(opts.sample_count * feat);
    else pixels_u8.resize(opts.sample_count * feat);

    for (uint64_t i = 0; i < opts.sample_count; ++i) {
        const uint32_t cls = static_cast<uint32_t>(rng.next_below(opts.class_count));
        labels[i] = static_cast<uint8_t>(cls);
        const double* p = protos.data() + static_cast<uint64_t>(cls) * feat;
        for (uint64_t f = 0; f < feat; ++f) {
            double v = p[f] + opts.noise * rng.next_symmetric(1.0);
            v = std::min(1.0, std::max(0.0, v));
            if (raw) pixels_f64[i * feat + f] = v;
            else pixels_u8[i * feat + f] = static_cast<uint8_t>(v * 255.0 + 0.5);
        }
    }

    DatasetMeta meta;
    meta.sample_count = opts.sample_count;
    meta.sample_shape = {opts.x1, opts.x2, opts.channels};
    meta.class_count = opts.class_count;
    meta.format = raw ? "raw" : "idx";
    meta.samples_path = out_prefix + (raw ? "-samples.rawshard" : "-samples.idx");
    meta.labels_path = out_prefix + (raw ? "-labels.rawshard" : "-labels.idx");
    if (raw) {
        write_raw_f64(meta.samples_path, opts.sample_count, meta.sample_shape, pixels_f64);
        write_raw_u8(meta.labels_path, opts.sample_count, {1}, labels);
    } else {
        // channel-1 images use the classic 3-dim layout
        std::vector<uint64_t> dims = opts.channels == 1
                                         ? std::vector<uint64_t>{opts.sample_count, opts.x1, opts.x2}
                                         : std::vector<uint64_t>{opts.sample_count, opts.x1, opts.x2,
                                                                 opts.channels};
        write_idx_ubyte(meta.samples_path, dims, pixels_u8);
        write_idx_ubyte(meta.labels_path, {opts.sample_count}, labels);
    }
    save_dataset_meta(out_prefix + ".json", meta);
    return meta;
}

}  // namespace ftdl
