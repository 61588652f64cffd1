#pragma once

// Counter-based random number generation (Philox4x64-10).
//
// Stream layout, fixed so that alternate implementations can reproduce the
// exact draws:
//   key     = (seed, stream)        -- stream is usually the subject id
//   counter = (block, 0, 0, 0)      -- block increments by one per 4-word block
//   word order within a block: output[0], output[1], output[2], output[3]
// uniform doubles are formed as ((word >> 11) + 1) * 2^-53, i.e. values in
// (0, 1], so that -log(u) is always finite.

#include <array>
#include <cstdint>
#include <cmath>
#include <limits>

namespace ctmsm {

class Philox {
public:
    Philox(uint64_t seed, uint64_t stream) : key_{seed, stream} {}

    // One 10-round Philox4x64 block.
    static std::array<uint64_t, 4> block(std::array<uint64_t, 4> ctr,
                                         std::array<uint64_t, 2> key) {
        constexpr uint64_t m0 = 0xD2E7470EE14C6C93ULL;
        constexpr uint64_t m1 = 0xCA5A826395121157ULL;
        constexpr uint64_t w0 = 0x9E3779B97F4A7C15ULL;
        constexpr uint64_t w1 = 0xBB67AE8584CAA73BULL;
        for (int round = 0; round < 10; ++round) {
            const unsigned __int128 p0 = static_cast<unsigned __int128>(m0) * ctr[0];
            const unsigned __int128 p1 = static_cast<unsigned __int128>(m1) * ctr[2];
            const uint64_t hi0 = static_cast<uint64_t>(p0 >> 64);
            const uint64_t lo0 = static_cast<uint64_t>(p0);
            const uint64_t hi1 = static_cast<uint64_t>(p1 >> 64);
            const uint64_t lo1 = static_cast<uint64_t>(p1);
            ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
            if (round < 9) {
                key[0] += w0;
                key[1] += w1;
            }
        }
        return ctr;
    }

    uint64_t next_u64() {
        if (pos_ == 4) {
            buffer_ = block({block_index_, 0, 0, 0}, key_);
            ++block_index_;
            pos_ = 0;
        }
        return buffer_[pos_++];
    }

    // Uniform on (0, 1].
    double next_uniform() {
        return static_cast<double>((next_u64() >> 11) + 1) * 0x1.0p-53;
    }

    // Exponential waiting time by inversion; rate <= 0 means the clock never fires.
    double next_exponential(double rate) {
        if (rate <= 0.0) return std::numeric_limits<double>::infinity();
        return -std::log(next_uniform()) / rate;
    }

    bool next_bernoulli(double p) { return next_uniform() <= p; }

private:
    std::array<uint64_t, 2> key_;
    std::array<uint64_t, 4> buffer_{};
    uint64_t block_index_ = 0;
    int pos_ = 4;
};

// Deterministic sub-seed derivation, e.g. one seed per replication.
inline uint64_t derive_seed(uint64_t seed, uint64_t index) {
    return Philox::block({index, 0, 0, 0}, {seed, 0x63746D736D736565ULL})[0];
}

}  // namespace ctmsm
