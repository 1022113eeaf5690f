#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace pulse_atom {

/// Counter-based generator: output n of a stream is a pure function of
/// (key, n), and keys are derived from (seed, stream id), so any pulse can be
/// simulated without touching the others.
class SubstreamRng {
public:
    using result_type = std::uint64_t;

    SubstreamRng(std::uint64_t seed, std::uint64_t stream, std::uint64_t lane = 0)
        : key_(mix(mix(seed ^ 0x6a09e667f3bcc909ULL) ^ (stream * 0x9e3779b97f4a7c15ULL) ^
                   mix(lane + 0xbb67ae8584caa73bULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return mix(key_ ^ mix(++counter_ * 0x9e3779b97f4a7c15ULL)); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

    /// Unit-rate exponential.
    double exponential() { return -std::log1p(-uniform()); }

private:
    static constexpr std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace pulse_atom
