#pragma once

#include <cstdint>

namespace qpdyn {

// Counter-based generator: draw k of stream (key) is a pure function of (key, k),
// so output is identical across platforms and independent of call order.
class CounterRng {
public:
    explicit CounterRng(std::uint64_t seed) : key_(mix(seed ^ 0x6a09e667f3bcc909ULL)) {}

    // Independent child stream.
    CounterRng split(std::uint64_t stream) const { return CounterRng(key_, stream); }

    std::uint64_t next_u64() { return at(counter_++); }

    // Uniform on (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    // Standard normal via Box-Muller; consumes two draws per call.
    double normal();

    std::uint64_t at(std::uint64_t k) const { return mix(key_ + (k + 1) * 0x9e3779b97f4a7c15ULL); }

private:
    CounterRng(std::uint64_t parent_key, std::uint64_t stream)
        : key_(mix(parent_key ^ mix(stream + 0xbb67ae8584caa73bULL))) {}

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

}  // namespace qpdyn
