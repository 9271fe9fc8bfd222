#include <doctest.h>

#include <atomic>
#include <stdexcept>
#include <vector>

#include "shapmarket/parallel.hpp"

using namespace shapmarket;

TEST_CASE("parallel_for visits every index exactly once") {
    std::vector<std::atomic<int>> hits(257);
    parallel_for(hits.size(), [&](std::size_t i) { hits[i].fetch_add(1); });
    for (const auto& h : hits) CHECK(h.load() == 1);
}

TEST_CASE("parallel_for handles the empty range") {
    bool called = false;
    parallel_for(0, [&](std::size_t) { called = true; });
    CHECK_FALSE(called);
}

TEST_CASE("nested parallel_for runs inline instead of deadlocking") {
    std::atomic<int> total{0};
    parallel_for(4, [&](std::size_t) {
        parallel_for(4, [&](std::size_t) { total.fetch_add(1); });
    });
    CHECK(total.load() == 16);
}

TEST_CASE("exceptions inside the body propagate to the caller") {
    CHECK_THROWS_AS(
        parallel_for(8, [](std::size_t i) {
            if (i == 3) throw std::runtime_error("boom");
        }),
        std::runtime_error);
}

TEST_CASE("worker_threads reports at least one thread") {
    CHECK(worker_threads() >= 1);
}
