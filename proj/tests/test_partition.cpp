#include <doctest.h>

#include "ftdl/partition.hpp"
#include "ftdl/rng.hpp"

using namespace ftdl;

TEST_SUITE_BEGIN("partition");

TEST_CASE("even split over four ranks") {
    auto pm = partition(1000, {0, 1, 2, 3});
    CHECK(pm.assignment[0] == std::vector<ShardRange>{{0, 250}});
    CHECK(pm.assignment[1] == std::vector<ShardRange>{{250, 500}});
    CHECK(pm.assignment[2] == std::vector<ShardRange>{{500, 750}});
    CHECK(pm.assignment[3] == std::vector<ShardRange>{{750, 1000}});
    pm.validate();
}

TEST_CASE("remainder spreads one extra sample over the first ranks") {
    auto pm = partition(10, {0, 1, 2});
    CHECK(pm.owned_count(0) == 4);
    CHECK(pm.owned_count(1) == 3);
    CHECK(pm.owned_count(2) == 3);
    pm.validate();
}

TEST_CASE("60000 samples over 16 ranks: equal shards, full disjoint cover") {
    std::vector<NodeId> ranks(16);
    for (NodeId i = 0; i < 16; ++i) ranks[i] = i;
    auto pm = partition(60000, ranks);
    // brute-force membership scan: every index owned exactly once
    std::vector<int> seen(60000, 0);
    for (const auto& [id, ranges] : pm.assignment) {
        CHECK(pm.owned_count(id) == 3750);
        for (const auto& r : ranges)
            for (uint64_t i = r.begin; i < r.end; ++i) seen[i]++;
    }
    for (int c : seen) REQUIRE(c == 1);
}

TEST_CASE("empty rank list and undersized datasets are rejected") {
    CHECK_THROWS_AS(partition(10, {}), Error);
    CHECK_THROWS_AS(partition(2, {0, 1, 2}), Error);
}

TEST_CASE("one failure: survivors keep shards, the lost shard is split near-evenly") {
    auto pm = partition(1000, {0, 1, 2, 3});
    auto [next, plan] = repartition_after_failure(pm, {2}, {0, 1, 3}, 1);
    next.validate();
    CHECK(next.epoch == 1);
    // survivors keep their original 250
    CHECK(next.assignment[0].front() == ShardRange{0, 250});
    CHECK(next.assignment[1].front() == ShardRange{250, 500});
    CHECK(next.assignment[3].front() == ShardRange{750, 1000});
    // lost range [500, 750) split {84, 83, 83}
    uint64_t reload_total = 0;
    std::vector<uint64_t> sizes;
    for (NodeId s : {0u, 1u, 3u}) {
        uint64_t mine = 0;
        for (const auto& r : plan[s]) {
            CHECK(r.begin >= 500);
            CHECK(r.end <= 750);
            mine += r.size();
        }
        sizes.push_back(mine);
        reload_total += mine;
    }
    CHECK(sizes == std::vector<uint64_t>{84, 83, 83});
    CHECK(reload_total == 250);  // exactly the lost shard
}

TEST_CASE("no failures: epoch advances, map unchanged, empty reload plan") {
    auto pm = partition(1000, {0, 1, 2, 3});
    auto [next, plan] = repartition_after_failure(pm, {}, {0, 1, 2, 3}, 5);
    CHECK(plan.empty());
    CHECK(next.epoch == 5);
    CHECK(next.assignment == pm.assignment);
}

TEST_CASE("all but one fail: the sole survivor reloads everything else") {
    auto pm = partition(1000, {0, 1, 2, 3});
    auto [next, plan] = repartition_after_failure(pm, {0, 1, 3}, {2}, 1);
    next.validate();
    uint64_t reload = 0;
    for (const auto& r : plan[2]) reload += r.size();
    CHECK(reload == 750);
    CHECK(next.owned_count(2) == 1000);
    CHECK_THROWS_AS(repartition_after_failure(pm, {0, 1, 2, 3}, {}, 1), UnrecoverableError);
}

TEST_CASE("random failure sequences preserve the disjoint-cover invariant") {
    SplitMix64 rng(17);
    for (int trial = 0; trial < 30; ++trial) {
        const uint64_t samples = 100 + rng.next_below(5000);
        std::vector<NodeId> live;
        const uint32_t n = 2 + static_cast<uint32_t>(rng.next_below(15));
        for (NodeId i = 0; i < n; ++i) live.push_back(i);
        if (samples < live.size()) continue;
        auto pm = partition(samples, live);
        uint64_t epoch = 0;
        while (live.size() > 1) {
            // kill a random non-empty subset, keeping at least one survivor
            const size_t kills = 1 + rng.next_below(live.size() - 1);
            std::set<NodeId> failed;
            std::vector<NodeId> pool = live;
            SplitMix64 pick(rng.next());
            shuffle(pool, pick);
            for (size_t i = 0; i < kills; ++i) failed.insert(pool[i]);
            std::vector<NodeId> survivors;
            for (NodeId id : live)
                if (!failed.count(id)) survivors.push_back(id);

            uint64_t lost = 0;
            for (NodeId f : failed) lost += pm.owned_count(f);
            auto [next, plan] = repartition_after_failure(pm, failed, survivors, ++epoch);
            next.validate();  // disjoint cover after every step
            uint64_t reloaded = 0;
            for (const auto& [id, ranges] : plan) {
                CHECK(next.assignment.count(id));
                for (const auto& r : ranges) reloaded += r.size();
            }
            CHECK(reloaded == lost);  // reload locality, exactly
            // survivors keep what they had
            for (NodeId s : survivors) CHECK(next.owned_count(s) >= pm.owned_count(s));
            pm = std::move(next);
            live = survivors;
        }
    }
}

TEST_CASE("stale partition maps are rejected") {
    auto pm = partition(100, {0, 1});
    CHECK_NOTHROW(require_epoch(pm, 0));
    CHECK_THROWS_AS(require_epoch(pm, 3), Error);
}

TEST_SUITE_END();
