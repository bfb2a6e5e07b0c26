#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>

namespace adasde {

/// SplitMix64 output function: a full-avalanche 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z ^= z >> 30;
    z *= 0xbf58476d1ce4e5b9ULL;
    z ^= z >> 27;
    z *= 0x94d049bb133111ebULL;
    z ^= z >> 31;
    return z;
}

/// Counter-based random stream: draw i is a pure function of (key, i), so
/// consumers may evaluate draws in any order, from any thread, and two runs
/// with the same key sequence are bit-identical. Streams split by hashing a
/// subkey into the parent key; child streams never share draws with the
/// parent or with siblings of distinct subkeys.
class RngStream {
public:
    RngStream() : key_(mix64(0x9e3779b97f4a7c15ULL)) {}
    explicit RngStream(std::uint64_t seed)
        : key_(mix64(seed + 0x9e3779b97f4a7c15ULL)) {}

    RngStream fork(std::uint64_t subkey) const {
        RngStream child(*this);
        child.key_ = mix64(key_ ^ (0xff51afd7ed558ccdULL * (subkey + 0x632be59bd9b4e019ULL)));
        return child;
    }
    RngStream fork(std::uint64_t a, std::uint64_t b) const { return fork(a).fork(b); }
    RngStream fork(std::uint64_t a, std::uint64_t b, std::uint64_t c) const {
        return fork(a).fork(b).fork(c);
    }

    std::uint64_t bits(std::uint64_t i) const {
        return mix64(key_ + 0x9e3779b97f4a7c15ULL * (i + 1));
    }

    /// Uniform double in [0, 1), 53 mantissa bits.
    double uniform(std::uint64_t i) const {
        return static_cast<double>(bits(i) >> 11) * 0x1.0p-53;
    }

    /// i-th pair of independent standard normals (Box-Muller over draws 2i, 2i+1).
    std::array<double, 2> normal2(std::uint64_t i) const {
        const double u1 = uniform(2 * i);
        const double u2 = uniform(2 * i + 1);
        const double r = std::sqrt(-2.0 * std::log1p(-u1));
        const double th = 2.0 * std::numbers::pi * u2;
        return {r * std::cos(th), r * std::sin(th)};
    }

    double normal(std::uint64_t i) const { return normal2(i)[0]; }

    std::uint64_t key() const { return key_; }

private:
    std::uint64_t key_;
};

/// Fixed stream ids; keeping them in one place guarantees that independent
/// consumers (dataset synthesis, sampler init, per-step injections, training
/// batches, ...) never collide on a subkey.
enum class StreamId : std::uint64_t {
    Dataset = 1,
    SampleInit = 2,
    StepNoise = 3,
    TrainInit = 4,
    TrainBatch = 5,
    Projections = 6,
    Subsample = 7,
    DistillInit = 8,
    Regenerate = 9,
    OracleSubsample = 10,
};

inline RngStream fork(const RngStream& s, StreamId id) {
    return s.fork(static_cast<std::uint64_t>(id));
}

}  // namespace adasde
