#include "toolrobust/rng.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace toolrobust {

namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t Rng::below(std::uint64_t bound) {
    if (bound == 0) throw std::invalid_argument("Rng::below: bound must be positive");
    // Rejection sampling on the largest multiple of bound.
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - (std::numeric_limits<std::uint64_t>::max() % bound);
    std::uint64_t x;
    do {
        x = next();
    } while (x >= limit);
    return x % bound;
}

std::int64_t Rng::between(std::int64_t lo, std::int64_t hi) {
    if (hi < lo) throw std::invalid_argument("Rng::between: empty range");
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<std::int64_t>(below(span));
}

std::vector<std::size_t> Rng::sample_indices(std::size_t n, std::size_t count) {
    if (count > n) throw std::invalid_argument("Rng::sample_indices: count exceeds population");
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    // Partial Fisher-Yates over the prefix.
    for (std::size_t i = 0; i < count; ++i) {
        std::size_t j = i + static_cast<std::size_t>(below(n - i));
        std::swap(idx[i], idx[j]);
    }
    idx.resize(count);
    std::sort(idx.begin(), idx.end());
    return idx;
}

SeedHasher::SeedHasher(std::uint64_t seed) : state_(kFnvOffset) { add(seed); }

SeedHasher& SeedHasher::add(std::string_view part) {
    for (unsigned char c : part) {
        state_ ^= c;
        state_ *= kFnvPrime;
    }
    // Length terminator so ("ab","c") and ("a","bc") differ.
    add(static_cast<std::uint64_t>(part.size()));
    return *this;
}

SeedHasher& SeedHasher::add(std::uint64_t part) {
    for (int i = 0; i < 8; ++i) {
        state_ ^= (part >> (8 * i)) & 0xff;
        state_ *= kFnvPrime;
    }
    return *this;
}

std::uint64_t SeedHasher::finish() const { return splitmix64(state_); }

}  // namespace toolrobust
