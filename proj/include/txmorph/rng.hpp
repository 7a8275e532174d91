#pragma once

#include <cstdint>
#include <initializer_list>
#include <vector>

namespace txmorph {

/// Counter-based deterministic generator. Each draw hashes (key, counter)
/// with the splitmix64 finalizer, so streams are reproducible across
/// platforms and cheap to derive from structured seeds such as
/// (global seed, epoch, sample index).
class CounterRng {
public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    /// Fold a list of 64-bit words into a single stream key.
    static CounterRng derive(std::initializer_list<std::uint64_t> words);

    std::uint64_t next_u64();

    /// Unbiased integer in [0, n), n > 0. Integer-only path.
    std::uint64_t uniform_below(std::uint64_t n);

    /// Uniform double in [0, 1) with 53 random mantissa bits.
    double uniform01();

    /// Standard normal via Box-Muller.
    double normal();

    /// Fisher-Yates shuffle of an index vector.
    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(uniform_below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

private:
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
    bool has_spare_normal_ = false;
    double spare_normal_ = 0.0;
};

/// splitmix64 finalizer; exposed for key derivation and tests.
std::uint64_t mix64(std::uint64_t x);

}  // namespace txmorph
