#pragma once

#include <cstdint>
#include <limits>

namespace mevlab {

namespace detail {

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

}  // namespace detail

/// Counter-based generator: the i-th output of stream (seed, stream) is a
/// pure function of (seed, stream, i), so any replication can be replayed
/// without touching the others.
class CounterRng {
public:
    using result_type = std::uint64_t;

    CounterRng(std::uint64_t seed, std::uint64_t stream)
        : key_(detail::mix64(seed ^ detail::mix64(stream + 0xD1B54A32D192ED03ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() { return detail::mix64(key_ + (++counter_) * kGamma); }

    std::uint64_t position() const { return counter_; }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ULL;
    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

/// Uniform double strictly inside (0, 1) from the top 53 bits of a 64-bit draw.
template <class Gen>
double uniform_open01(Gen& gen) {
    static_assert(Gen::max() == std::numeric_limits<std::uint64_t>::max() && Gen::min() == 0,
                  "uniform_open01 needs a full-range 64-bit generator");
    return (static_cast<double>(gen() >> 11) + 0.5) * 0x1.0p-53;
}

}  // namespace mevlab
