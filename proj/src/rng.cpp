#include "ddim/rng.hpp"

#include <stdexcept>

namespace ddim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t seed, std::string_view stream) {
    std::uint64_t h = 0xCBF29CE484222325ull;  // FNV-1a
    for (unsigned char c : stream) {
        h ^= c;
        h *= 0x100000001B3ull;
    }
    return splitmix64(splitmix64(seed) ^ h);
}

Rng::Rng(std::uint64_t seed, std::string_view stream) : engine_(stream_seed(seed, stream)) {}

Rng Rng::poisoned() {
    Rng r;
    r.poisoned_ = true;
    return r;
}

void Rng::check() {
    if (poisoned_) throw std::logic_error("random draw from a poisoned generator");
    ++draws_;
}

std::uint64_t Rng::next_u64() {
    check();
    return engine_();
}

double Rng::uniform() {
    check();
    return std::uniform_real_distribution<double>(0.0, 1.0)(engine_);
}

double Rng::uniform(double lo, double hi) {
    check();
    return std::uniform_real_distribution<double>(lo, hi)(engine_);
}

double Rng::normal() {
    check();
    return normal_(engine_);
}

std::int64_t Rng::uniform_int(std::int64_t lo, std::int64_t hi) {
    check();
    return std::uniform_int_distribution<std::int64_t>(lo, hi)(engine_);
}

}  // namespace ddim
