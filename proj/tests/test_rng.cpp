#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <vector>

#include "txmorph/rng.hpp"

using namespace txmorph;

TEST_CASE("same key reproduces the same stream") {
    CounterRng a(42), b(42);
    for (int i = 0; i < 100; ++i) CHECK(a.next_u64() == b.next_u64());
}

TEST_CASE("derived keys differ by any word") {
    auto a = CounterRng::derive({1, 2, 3});
    auto b = CounterRng::derive({1, 2, 4});
    auto c = CounterRng::derive({1, 2, 3});
    CHECK(a.next_u64() != b.next_u64());
    CounterRng a2 = CounterRng::derive({1, 2, 3});
    CHECK(a2.next_u64() == c.next_u64());
}

TEST_CASE("uniform_below stays in range and is roughly uniform") {
    CounterRng rng(7);
    const int n = 40000;
    std::vector<int> counts(4, 0);
    for (int i = 0; i < n; ++i) {
        const auto v = rng.uniform_below(4);
        REQUIRE(v < 4);
        ++counts[static_cast<std::size_t>(v)];
    }
    const double expected = n / 4.0;
    const double sigma = std::sqrt(n * 0.25 * 0.75);
    for (int c : counts) CHECK(std::abs(c - expected) < 4.0 * sigma);
}

TEST_CASE("uniform01 lies in [0,1)") {
    CounterRng rng(9);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform01();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("normal has sane first moments") {
    CounterRng rng(11);
    const int n = 50000;
    double sum = 0.0, sum_sq = 0.0;
    for (int i = 0; i < n; ++i) {
        const double x = rng.normal();
        sum += x;
        sum_sq += x * x;
    }
    CHECK(std::abs(sum / n) < 0.02);
    CHECK(std::abs(sum_sq / n - 1.0) < 0.03);
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> v1{0, 1, 2, 3, 4, 5, 6, 7};
    std::vector<int> v2 = v1;
    CounterRng a(13), b(13);
    a.shuffle(v1);
    b.shuffle(v2);
    CHECK(v1 == v2);
    std::vector<int> sorted = v1;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});
}
