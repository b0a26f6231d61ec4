#pragma once

#include <cstdint>
#include <random>
#include <string_view>
#include <vector>

namespace toolrobust {

// Seeded generator with platform-independent draws. The standard
// distributions are implementation-defined, so bounded integers are derived
// directly from the engine output to keep generated files byte-stable.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // Uniform in [0, bound); bound must be > 0.
    std::uint64_t below(std::uint64_t bound);

    // Uniform in [lo, hi].
    std::int64_t between(std::int64_t lo, std::int64_t hi);

    bool coin() { return (next() >> 63) != 0; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(v[i - 1], v[j]);
        }
    }

    // `count` distinct indices from [0, n), in ascending order.
    std::vector<std::size_t> sample_indices(std::size_t n, std::size_t count);

private:
    std::mt19937_64 engine_;
};

// Stable 64-bit hash used for deriving per-item sub-seeds.
class SeedHasher {
public:
    explicit SeedHasher(std::uint64_t seed);
    SeedHasher& add(std::string_view part);
    SeedHasher& add(std::uint64_t part);
    std::uint64_t finish() const;

private:
    std::uint64_t state_;
};

}  // namespace toolrobust
