#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>

namespace amad {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

}  // namespace detail

/// Deterministic random stream. All stochastic call sites take one of these
/// explicitly; child streams are derived from the base seed by name so the
/// draw order of one consumer never shifts another's.
class RngStream {
public:
    explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(seed) {}

    std::uint64_t seed() const { return seed_; }

    /// Derive an independent stream from the base seed and a label.
    RngStream fork(std::string_view name) const {
        return RngStream(detail::splitmix64(seed_ ^ detail::splitmix64(detail::fnv1a64(name))));
    }

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Uniform integer in [0,n). Modulo bias is negligible for the small
    /// vocabularies used here.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngStream::below: n must be positive");
        return next_u64() % n;
    }

    bool coin() { return (next_u64() & 1ULL) != 0; }

    /// Standard normal via Box-Muller; two engine draws per sample.
    double normal() {
        const double u1 = static_cast<double>((next_u64() >> 11) + 1) * 0x1p-53;  // (0,1]
        const double u2 = static_cast<double>(next_u64() >> 11) * 0x1p-53;        // [0,1)
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Exact state round-trip for checkpointing.
    std::string state_text() const {
        std::ostringstream os;
        os << seed_ << ' ' << engine_;
        return os.str();
    }

    static RngStream from_state_text(const std::string& text) {
        std::istringstream is(text);
        std::uint64_t seed = 0;
        if (!(is >> seed)) throw std::invalid_argument("RngStream: bad state text");
        RngStream r(seed);
        if (!(is >> r.engine_)) throw std::invalid_argument("RngStream: bad engine state");
        return r;
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 engine_;
};

}  // namespace amad
