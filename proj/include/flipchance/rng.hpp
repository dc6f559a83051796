#pragma once

#include <cstdint>
#include <random>

namespace flipchance {

/// SplitMix64 finalizer. Used to derive independent substream seeds.
constexpr std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    return mix64(mix64(seed) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

/// Value-semantic random stream. The engine is std::mt19937_64, whose output
/// sequence is fixed by the standard; the uniform and normal transforms are
/// implemented here so that draws are identical across standard libraries.
class Stream {
public:
    explicit Stream(std::uint64_t seed = 0) : engine_(seed) {}

    /// Child stream keyed by `index`; does not advance this stream.
    Stream substream(std::uint64_t index) const { return Stream(derive_seed(seed_of(), index)); }

    /// Uniform on [0, 1).
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller; caches the second variate.
    double normal();

    std::uint64_t next_u64() { return engine_(); }

private:
    std::uint64_t seed_of() const;

    std::mt19937_64 engine_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace flipchance
