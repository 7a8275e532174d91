#include "txmorph/rng.hpp"

#include <cmath>

namespace txmorph {

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

CounterRng CounterRng::derive(std::initializer_list<std::uint64_t> words) {
    std::uint64_t key = 0x2545f4914f6cdd1dULL;
    for (std::uint64_t w : words) {
        key = mix64(key ^ mix64(w));
    }
    return CounterRng(key);
}

std::uint64_t CounterRng::next_u64() {
    return mix64(key_ + 0x9e3779b97f4a7c15ULL * ++counter_);
}

std::uint64_t CounterRng::uniform_below(std::uint64_t n) {
    // rejection sampling over the top multiple of n
    const std::uint64_t limit = n * ((~std::uint64_t{0}) / n);
    std::uint64_t x;
    do {
        x = next_u64();
    } while (x >= limit);
    return x % n;
}

double CounterRng::uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double CounterRng::normal() {
    if (has_spare_normal_) {
        has_spare_normal_ = false;
        return spare_normal_;
    }
    double u1, u2;
    do {
        u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double theta = 2.0 * M_PI * u2;
    spare_normal_ = r * std::sin(theta);
    has_spare_normal_ = true;
    return r * std::cos(theta);
}

}  // namespace txmorph
