#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "tblm/codec.hpp"
#include "tblm/rng.hpp"

using namespace tblm;

TEST_CASE("gray_encode small cases") {
    CHECK(gray_encode(0, 3) == 0b110u);
    CHECK(gray_encode(-1, 3) == 0b010u);
    CHECK(oracle::hamming(gray_encode(-1, 3), gray_encode(0, 3)) == 1);
    CHECK(gray_encode(-8, 4) == 0u);
    CHECK(gray_decode(0b110u, 3) == 0);
    CHECK(gray_decode(0u, 4) == -8);
}

TEST_CASE("gray_encode enumerates a single Gray sequence for n = 3") {
    // u XOR (u >> 1) for u = 0..7, indexed by h + 4
    const std::uint32_t expected[8] = {0b000, 0b001, 0b011, 0b010, 0b110, 0b111, 0b101, 0b100};
    for (int h = -4; h < 4; ++h) CHECK(gray_encode(h, 3) == expected[h + 4]);
}

TEST_CASE("gray adjacency and bijectivity") {
    for (int n = 2; n <= 16; ++n) {
        const int half = 1 << (n - 1);
        std::set<std::uint32_t> seen;
        for (int h = -half; h < half; ++h) {
            const auto c = gray_encode(h, n);
            CHECK(c < (1u << n));
            seen.insert(c);
            if (h + 1 < half) REQUIRE(oracle::hamming(c, gray_encode(h + 1, n)) == 1);
        }
        CHECK(seen.size() == static_cast<std::size_t>(1 << n));
    }
}

TEST_CASE("gray round trip over all 12-bit patterns") {
    for (std::uint32_t p = 0; p < (1u << 12); ++p) REQUIRE(gray_encode(gray_decode(p, 12), 12) == p);
}

TEST_CASE("gray_encode rejects out-of-range multipliers") {
    CHECK_THROWS_AS(gray_encode(4, 3), std::out_of_range);
    CHECK_THROWS_AS(gray_encode(-5, 3), std::out_of_range);
}

TEST_CASE("weight format") {
    const WeightFormat f(12, 6.0);
    CHECK(f.epsilon() == doctest::Approx(6.0 / 2047).epsilon(1e-15));
    CHECK(f.value_of(2047) == 6.0);
    CHECK(f.value_of(0) == 0.0);
    const WeightFormat g(4, 7.0);
    CHECK(g.epsilon() == 1.0);
    CHECK(g.value_of(-8) == -8.0);
    CHECK(g.min_weight() == -g.w_max() - g.epsilon());
    CHECK_THROWS(WeightFormat(1, 1.0));
    CHECK_THROWS(WeightFormat(25, 1.0));
    CHECK_THROWS(WeightFormat(8, 0.0));
}

TEST_CASE("single flips reach both grid neighbors") {
    for (int n = 2; n <= 8; ++n) {
        const WeightFormat f(n, 1.0);
        for (int h = f.min_multiplier(); h <= f.max_multiplier(); ++h) {
            BitGenome g(f, ParameterLayout({1, 1}, false));
            g.set_multiplier(0, h);
            std::set<std::int32_t> succ;
            for (int b = 0; b < n; ++b) {
                BitGenome c = g;
                c.flip_bit(static_cast<std::size_t>(b));
                succ.insert(c.multiplier(0));
                CHECK(c.multiplier(1) == g.multiplier(1));
            }
            if (h > f.min_multiplier()) CHECK(succ.count(h - 1) == 1);
            if (h < f.max_multiplier()) CHECK(succ.count(h + 1) == 1);
        }
    }
}

TEST_CASE("flip semantics") {
    const WeightFormat f(3, 3.0);
    BitGenome g(f, ParameterLayout({2, 1}, false));
    REQUIRE(g.n_bits() == 9);
    // 0 -> 1 flips the last Gray bit of 110 to 111.
    const auto r = g.flip_bit(2);
    CHECK(r.weight_index == 0);
    CHECK(r.new_weight == doctest::Approx(f.epsilon()));
    CHECK(g.multiplier(1) == 0);
    CHECK(g.multiplier(2) == 0);
    const BitGenome before = g;
    g.flip_bit(7);
    g.flip_bit(7);
    CHECK(g == before);
    CHECK_THROWS_AS(g.flip_bit(9), std::out_of_range);
    CHECK(g.weight_after_flip(2) == 0.0);
}

TEST_CASE("decoded weights stay in range") {
    Rng rng(3);
    const WeightFormat f(5, 2.5);
    BitGenome g(f, ParameterLayout({3, 4, 2}, false));
    for (int i = 0; i < 2000; ++i) {
        g.flip_bit(rng.below(g.n_bits()));
        for (double w : g.weights()) REQUIRE((w >= f.min_weight() && w <= f.w_max()));
    }
}

TEST_CASE("parameter layout is a bijection") {
    for (bool rec : {false, true}) {
        const ParameterLayout l(rec ? std::vector<std::size_t>{3, 4, 2} : std::vector<std::size_t>{3, 4, 5, 2}, rec);
        std::set<std::size_t> seen;
        for (std::size_t i = 0; i < l.n_weights(); ++i) {
            const ParamCoord c = l.coord_of(i);
            REQUIRE(l.index_of(c) == i);
            seen.insert(i);
        }
        CHECK(seen.size() == l.n_weights());
    }
    const ParameterLayout l({3, 4, 2}, true);
    CHECK(l.n_weights() == 4 * (3 + 4 + 1) + 2 * (4 + 1));
    // Order within a destination: sources, recurrent sources, bias.
    CHECK(l.index_of({1, 0, 2, ParamKind::weight}) == 2);
    CHECK(l.index_of({1, 0, 0, ParamKind::recurrent}) == 3);
    CHECK(l.index_of({1, 0, 0, ParamKind::bias}) == 7);
    CHECK(l.index_of({1, 1, 0, ParamKind::weight}) == 8);
    CHECK_THROWS(l.index_of({2, 0, 0, ParamKind::recurrent}));
    CHECK_THROWS(l.index_of({3, 0, 0, ParamKind::weight}));
    CHECK_THROWS(ParameterLayout({2, 3, 3, 1}, true));
}

TEST_CASE("weight_of by coordinate") {
    const WeightFormat f(12, 6.0);
    BitGenome g(f, ParameterLayout({2, 2, 1}, false));
    const ParamCoord c{2, 0, 1, ParamKind::weight};
    g.set_multiplier(g.layout().index_of(c), 2047);
    CHECK(g.weight_of(c) == 6.0);
    CHECK(g.weight_of({1, 0, 0, ParamKind::bias}) == 0.0);
    CHECK_THROWS(g.weight_of({2, 1, 0, ParamKind::weight}));
}

TEST_CASE("rng stream contract") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next() == b.next());
    Rng r(7);
    for (int i = 0; i < 1000; ++i) {
        const double u = r.uniform01();
        REQUIRE((u >= 0.0 && u < 1.0));
        REQUIRE(r.below(13) < 13);
    }
    // mt19937_64's 10000th output for the default seed is fixed by the standard.
    Rng d(5489);
    std::uint64_t x = 0;
    for (int i = 0; i < 10000; ++i) x = d.next();
    CHECK(x == 9981545732273789042ULL);
    CHECK(Rng(1).split(0).next() != Rng(1).split(1).next());
}
