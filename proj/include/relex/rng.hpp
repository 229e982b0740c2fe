#pragma once

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

namespace relex {

// Seeded RNG with hand-rolled draws. std::uniform_*_distribution output is
// implementation-defined, so every helper here is built from raw mt19937_64
// words to keep streams reproducible.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t next() { return gen_(); }

    // [0, 1) at 53-bit resolution
    double uniform() { return static_cast<double>(gen_() >> 11) * (1.0 / 9007199254740992.0); }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // inclusive [lo, hi], rejection-sampled
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % span;
        std::uint64_t x;
        do {
            x = gen_();
        } while (x >= limit);
        return lo + static_cast<std::int64_t>(x % span);
    }

    bool bernoulli(double p) { return uniform() < p; }

    template <typename T>
    void shuffle(std::vector<T>& v) {
        for (std::size_t i = v.size(); i > 1; --i) {
            auto j = static_cast<std::size_t>(uniform_int(0, static_cast<std::int64_t>(i) - 1));
            std::swap(v[i - 1], v[j]);
        }
    }

    // Child stream for a named purpose; advances this stream once.
    Rng fork(std::uint64_t tag) {
        std::uint64_t s = gen_() + tag * 0x9e3779b97f4a7c15ull;
        s ^= s >> 30;
        s *= 0xbf58476d1ce4e5b9ull;
        s ^= s >> 27;
        return Rng(s);
    }

private:
    std::mt19937_64 gen_;
};

}  // namespace relex
