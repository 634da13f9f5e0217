#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ftdl/dataset.hpp"
#include "ftdl/rng.hpp"

using namespace ftdl;

namespace {

struct TempDir {
    std::string path;
    TempDir() {
        char tmpl[] = "/tmp/ftdl-test-XXXXXX";
        path = mkdtemp(tmpl);
    }
    ~TempDir() { std::system(("rm -rf " + path).c_str()); }
    std::string operator/(const std::string& name) const { return path + "/" + name; }
};

std::vector<uint8_t> file_bytes(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    REQUIRE(f);
    return std::vector<uint8_t>((std::istreambuf_iterator<char>(f)),
                                std::istreambuf_iterator<char>());
}

}  // namespace

TEST_SUITE_BEGIN("dataset");

TEST_CASE("idx files carry the standard big-endian layout") {
    TempDir dir;
    const std::string path = dir / "tiny.idx";
    write_idx_ubyte(path, {2, 3}, {1, 2, 3, 4, 5, 6});
    const auto bytes = file_bytes(path);
    REQUIRE(bytes.size() == 4 + 8 + 6);
    // magic: 0x00000803 (ubyte, 2 dims -> 0x08, 0x02)
    CHECK(bytes[0] == 0);
    CHECK(bytes[1] == 0);
    CHECK(bytes[2] == 0x08);
    CHECK(bytes[3] == 0x02);
    // dims big-endian
    CHECK((bytes[4] == 0 && bytes[5] == 0 && bytes[6] == 0 && bytes[7] == 2));
    CHECK((bytes[8] == 0 && bytes[9] == 0 && bytes[10] == 0 && bytes[11] == 3));
    CHECK(bytes[12] == 1);
    CHECK(bytes[17] == 6);

    IdxHeader h = read_idx_header(path);
    CHECK(h.dtype == 0x08);
    CHECK(h.dims == std::vector<uint64_t>{2, 3});
    CHECK(h.header_bytes == 12);
}

TEST_CASE("corrupt headers are reported as such") {
    TempDir dir;
    const std::string path = dir / "bad.idx";
    std::ofstream(path, std::ios::binary) << "garbage-that-is-not-idx";
    CHECK_THROWS_WITH_AS(read_idx_header(path), doctest::Contains("corrupt header"), IoError);
    const std::string rpath = dir / "bad.rawshard";
    std::ofstream(rpath, std::ios::binary) << "garbage-that-is-not-a-shard-file";
    CHECK_THROWS_WITH_AS(read_raw_header(rpath), doctest::Contains("corrupt header"), IoError);
}

TEST_CASE("synthetic dataset generation is deterministic") {
    TempDir dir;
    SynthOptions opts;
    opts.sample_count = 64;
    opts.seed = 99;
    make_synthetic_dataset(dir / "a", opts);
    make_synthetic_dataset(dir / "b", opts);
    CHECK(file_bytes(dir / "a-samples.idx") == file_bytes(dir / "b-samples.idx"));
    CHECK(file_bytes(dir / "a-labels.idx") == file_bytes(dir / "b-labels.idx"));
    opts.seed = 100;
    make_synthetic_dataset(dir / "c", opts);
    CHECK(file_bytes(dir / "a-samples.idx") != file_bytes(dir / "c-samples.idx"));
}

TEST_CASE("ranged loads: prefix consistency and exact byte accounting") {
    TempDir dir;
    SynthOptions opts;
    opts.sample_count = 400;
    opts.seed = 5;
    make_synthetic_dataset(dir / "d", opts);
    DatasetMeta meta = load_dataset_meta(dir / "d.json");
    REQUIRE(meta.sample_count == 400);

    LoadedRanges full = load_ranges(meta, {{0, 400}});
    LoadedRanges prefix = load_ranges(meta, {{0, 100}});
    for (size_t i = 0; i < prefix.samples.size(); ++i)
        REQUIRE(prefix.samples.data[i] == full.samples.data[i]);
    for (size_t i = 0; i < prefix.labels.size(); ++i)
        REQUIRE(prefix.labels[i] == full.labels[i]);

    LoadedRanges piece = load_ranges(meta, {{50, 300}});
    CHECK(piece.payload_bytes == 250 * 28 * 28);  // payload proportional to the range alone
    CHECK(piece.header_bytes == full.header_bytes);

    CHECK_THROWS_AS(load_ranges(meta, {{100, 401}}), IoError);
}

TEST_CASE("concatenated per-rank loads reproduce the sequential full read bitwise") {
    TempDir dir;
    SynthOptions opts;
    opts.sample_count = 333;
    opts.seed = 6;
    opts.format = "raw";
    make_synthetic_dataset(dir / "r", opts);
    DatasetMeta meta = load_dataset_meta(dir / "r.json");

    LoadedRanges full = load_ranges(meta, {{0, 333}});
    auto pm = partition(333, {0, 1, 2, 3, 4});
    std::vector<double> cat;
    std::vector<uint32_t> labels;
    for (const auto& [id, ranges] : pm.assignment) {
        LoadedRanges part = load_ranges(meta, ranges);
        cat.insert(cat.end(), part.samples.data.begin(), part.samples.data.end());
        labels.insert(labels.end(), part.labels.begin(), part.labels.end());
    }
    CHECK(cat == full.samples.data);
    CHECK(labels == full.labels);
}

TEST_CASE("partial reload after a 1-of-16 failure reads at most 1/15 of a full load") {
    TempDir dir;
    SynthOptions opts;
    opts.sample_count = 1600;
    opts.seed = 8;
    make_synthetic_dataset(dir / "p", opts);
    DatasetMeta meta = load_dataset_meta(dir / "p.json");

    std::vector<NodeId> ranks(16);
    for (NodeId i = 0; i < 16; ++i) ranks[i] = i;
    auto pm = partition(1600, ranks);
    std::vector<NodeId> survivors;
    for (NodeId i = 0; i < 16; ++i)
        if (i != 7) survivors.push_back(i);
    auto [next, plan] = repartition_after_failure(pm, {7}, survivors, 1);

    const uint64_t full_payload = load_ranges(meta, {{0, 1600}}).payload_bytes;
    uint64_t reload_payload = 0;
    for (const auto& [id, ranges] : plan) reload_payload += load_ranges(meta, ranges).payload_bytes;
    CHECK(reload_payload == pm.owned_count(7) * meta.sample_features());
    CHECK(reload_payload <= full_payload / 15);
}

TEST_CASE("dataset meta round-trips through json") {
    TempDir dir;
    SynthOptions opts;
    opts.sample_count = 32;
    opts.x1 = 8;
    opts.x2 = 6;
    opts.channels = 2;
    opts.class_count = 4;
    opts.format = "raw";
    DatasetMeta meta = make_synthetic_dataset(dir / "m", opts);
    DatasetMeta back = load_dataset_meta(dir / "m.json");
    CHECK(back.sample_count == meta.sample_count);
    CHECK(back.sample_shape == meta.sample_shape);
    CHECK(back.class_count == meta.class_count);
    CHECK(back.format == "raw");
    LoadedRanges all = load_ranges(back, {{0, 32}});
    CHECK(all.samples.shape == std::vector<size_t>{32, 8, 6, 2});
}

TEST_SUITE_END();
