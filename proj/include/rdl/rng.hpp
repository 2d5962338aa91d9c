#pragma once

#include <cstdint>
#include <random>

namespace rdl {

// Seeded random source. All randomness in the library flows through one of
// these so that a fixed seed reproduces a run bit for bit within a build.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    double gaussian() {
        std::normal_distribution<double> dist(0.0, 1.0);
        return dist(gen_);
    }

    double uniform(double lo, double hi) {
        std::uniform_real_distribution<double> dist(lo, hi);
        return dist(gen_);
    }

    // Uniform integer in [0, n).
    std::uint64_t next_index(std::uint64_t n) {
        std::uniform_int_distribution<std::uint64_t> dist(0, n - 1);
        return dist(gen_);
    }

    std::mt19937_64& engine() { return gen_; }

private:
    std::mt19937_64 gen_;
};

} // namespace rdl
