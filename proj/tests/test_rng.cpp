// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <cstdint>
#include <vector>

#include "catch_amalgamated.hpp"

#include "casopt/rng.hpp"

using casopt::CounterRng;
using Catch::Matchers::WithinAbs;

TEST_CASE("philox4x32-10 known answers") {
    // Reference vectors published with the Random123 distribution.
    using B = CounterRng::Block;
    CHECK(CounterRng::philox4x32_10(B{0, 0, 0, 0}, {0, 0}) == B{0x6627e8d5u, 0xe169c58du, 0xbc57ac4cu, 0x9b00dbd8u});
    CHECK(CounterRng::philox4x32_10(B{0xffffffffu, 0xffffffffu, 0xffffffffu, 0xffffffffu}, {0xffffffffu, 0xffffffffu}) ==
          B{0x408f276du, 0x41c83b0eu, 0xa20bc7c6u, 0x6d5451fdu});
    CHECK(CounterRng::philox4x32_10(B{0x243f6a88u, 0x85a308d3u, 0x13198a2eu, 0x03707344u},
                                    {0xa4093822u, 0x299f31d0u}) == B{0xd16cfe09u, 0x94fdccebu, 0x5001e420u, 0x24126ea1u});
}

TEST_CASE("streams are reproducible and distinct") {
    CounterRng a(42, 7), b(42, 7), c(42, 8), d(43, 7);
    std::vector<std::uint64_t> va, vc, vd;
    for (int i = 0; i < 16; ++i) {
        const auto x = a.next_u64();
        CHECK(x == b.next_u64());
        va.push_back(x);
        vc.push_back(c.next_u64());
        vd.push_back(d.next_u64());
    }
    CHECK(va != vc);
    CHECK(va != vd);
}

TEST_CASE("uniform variates lie strictly inside (0, 1)") {
    CounterRng r(5, 0);
    double lo = 1.0, hi = 0.0, sum = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double u = r.uniform();
        lo = std::min(lo, u);
        hi = std::max(hi, u);
        sum += u;
    }
    CHECK(lo > 0.0);
    CHECK(hi < 1.0);
    CHECK_THAT(sum / n, WithinAbs(0.5, 3e-3));
}

TEST_CASE("normal variates are the inverse CDF of the uniform stream") {
    CounterRng u(9, 1), z(9, 1);
    for (int i = 0; i < 2000; ++i) {
        const double p = u.uniform();
        const double x = z.normal();
        CHECK_THAT(0.5 * std::erfc(-x / std::sqrt(2.0)), WithinAbs(p, 1e-13));
    }
}

TEST_CASE("normal moments") {
    CounterRng r(7, 3);
    const int n = 400000;
    double s = 0, s2 = 0, s4 = 0;
    for (int i = 0; i < n; ++i) {
        const double x = r.normal();
        s += x;
        s2 += x * x;
        s4 += x * x * x * x;
    }
    CHECK_THAT(s / n, WithinAbs(0.0, 0.01));
    CHECK_THAT(s2 / n, WithinAbs(1.0, 0.01));
    CHECK_THAT(s4 / n, WithinAbs(3.0, 0.06));

    CounterRng c(7, 4);
    double re2 = 0, im2 = 0, cross = 0;
    for (int i = 0; i < n; ++i) {
        const auto v = c.complex_normal();
        re2 += v.real() * v.real();
        im2 += v.imag() * v.imag();
        cross += v.real() * v.imag();
    }
    CHECK_THAT(re2 / n, WithinAbs(0.5, 0.01));
    CHECK_THAT(im2 / n, WithinAbs(0.5, 0.01));
    CHECK_THAT(cross / n, WithinAbs(0.0, 0.01));
}
