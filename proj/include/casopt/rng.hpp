// SPDX-License-Identifier: Apache-2.0
#pragma once

// Philox4x32-10 counter-based generator. A (seed, stream) pair names an
// independent sequence; the i-th draw depends only on (seed, stream, i), so
// parallel Monte Carlo trials reproduce bit for bit on any platform.
// Normal variates use the inverse CDF so they consume exactly one uniform.

#include <array>
#include <cmath>
#include <cstddef>
#include <complex>
#include <cstdint>

#include <boost/math/special_functions/erf.hpp>

namespace casopt {

class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) noexcept
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)},
          stream_(stream) {}

    /// Next 64 uniformly distributed bits.
    std::uint64_t next_u64() noexcept {
        if (have_ == 0) {
            block_ = philox(counter_++);
            have_ = 2;
        }
        const std::size_t i = 2 - have_--;
        return (static_cast<std::uint64_t>(block_[2 * i]) << 32) | block_[2 * i + 1];
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    /// Standard normal via the inverse CDF.
    double normal() {
        const double u = uniform();
        return -std::sqrt(2.0) * boost::math::erfc_inv(2.0 * u);
    }

    /// Circularly symmetric complex normal with unit variance.
    std::complex<double> complex_normal() {
        const double re = normal();
        const double im = normal();
        return {re * std::sqrt(0.5), im * std::sqrt(0.5)};
    }

    std::uint64_t stream() const noexcept { return stream_; }

    using Block = std::array<std::uint32_t, 4>;

    /// One Philox4x32-10 block.
    static Block philox4x32_10(Block c, std::array<std::uint32_t, 2> key) noexcept {
        constexpr std::uint32_t m0 = 0xD2511F53u, m1 = 0xCD9E8D57u;
        constexpr std::uint32_t w0 = 0x9E3779B9u, w1 = 0xBB67AE85u;
        std::uint32_t k0 = key[0], k1 = key[1];
        for (int round = 0; round < 10; ++round) {
            const std::uint64_t p0 = static_cast<std::uint64_t>(m0) * c[0];
            const std::uint64_t p1 = static_cast<std::uint64_t>(m1) * c[2];
            c = Block{static_cast<std::uint32_t>(p1 >> 32) ^ c[1] ^ k0, static_cast<std::uint32_t>(p1),
                      static_cast<std::uint32_t>(p0 >> 32) ^ c[3] ^ k1, static_cast<std::uint32_t>(p0)};
            k0 += w0;
            k1 += w1;
        }
        return c;
    }

private:
    Block philox(std::uint64_t counter) const noexcept {
        return philox4x32_10(Block{static_cast<std::uint32_t>(counter), static_cast<std::uint32_t>(counter >> 32),
                                   static_cast<std::uint32_t>(stream_), static_cast<std::uint32_t>(stream_ >> 32)},
                             key_);
    }

    std::array<std::uint32_t, 2> key_;
    std::uint64_t stream_;
    std::uint64_t counter_ = 0;
    Block block_{};
    std::size_t have_ = 0;
};

}  // namespace casopt
