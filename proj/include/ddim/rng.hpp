#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace ddim {

// Seeded generator for one named stream ("dataset", "init", "training",
// "sampling", ...). Streams with different names are independent; the same
// (seed, name) always replays the same sequence.
class Rng {
public:
    Rng(std::uint64_t seed, std::string_view stream);

    // A generator that throws on any draw. Used to prove a code path is
    // free of randomness.
    static Rng poisoned();

    double uniform();  // [0, 1)
    double uniform(double lo, double hi);
    double normal();   // standard normal
    // Uniform integer in [lo, hi].
    std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
    std::uint64_t next_u64();

    std::uint64_t draws() const { return draws_; }

    // Engine access for std algorithms (std::shuffle); counted like draws.
    using result_type = std::uint64_t;
    static constexpr result_type min() { return std::mt19937_64::min(); }
    static constexpr result_type max() { return std::mt19937_64::max(); }
    result_type operator()() { return next_u64(); }

private:
    Rng() = default;
    void check();

    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uint64_t draws_ = 0;
    bool poisoned_ = false;
};

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream);

}  // namespace ddim
