#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace zonerl {

/// Seeded random stream owned by exactly one simulation component.
///
/// Identical seeds and identical call sequences give bit-identical draws on a
/// given toolchain. `fork` derives independent child streams so that auxiliary
/// consumers (shield rollouts, policy sampling) never perturb the parent.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed = 0) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }
    std::uint64_t counter() const { return counter_; }

    double normal() {
        ++counter_;
        return normal_(engine_);
    }

    /// Uniform on [0, 1).
    double uniform() {
        ++counter_;
        return uniform_(engine_);
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0, n).
    std::size_t index(std::size_t n) {
        ++counter_;
        std::uniform_int_distribution<std::size_t> dist(0, n - 1);
        return dist(engine_);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Raw 64-bit draw, used to seed episodes.
    std::uint64_t next_seed() {
        ++counter_;
        return engine_();
    }

    RngStream fork(std::uint64_t tag) const { return RngStream(mix(seed_ ^ mix(tag + 0x9e3779b97f4a7c15ULL))); }
    RngStream fork(std::string_view tag) const { return fork(hash(tag)); }

    static std::uint64_t mix(std::uint64_t z) {
        // splitmix64 finaliser
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    static std::uint64_t hash(std::string_view s) {
        std::uint64_t h = 1469598103934665603ULL;
        for (char c : s) {
            h ^= static_cast<unsigned char>(c);
            h *= 1099511628211ULL;
        }
        return h;
    }

    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

} // namespace zonerl
