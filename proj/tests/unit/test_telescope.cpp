#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "oracles.hpp"
#include "tblm/rng.hpp"
#include "tblm/telescope.hpp"

using namespace tblm;

TEST_CASE("expected_min small cases") {
    CHECK(expected_min(4, 4) == 0.0);
    CHECK(expected_min(1, 4) == doctest::Approx(1.5).epsilon(1e-15));
    CHECK(expected_min(2, 4) == doctest::Approx(2.0 / 3).epsilon(1e-15));
    CHECK(oracle::enumerate_expected_min(1, 4) == 1.5);
    CHECK(oracle::enumerate_expected_min(2, 4) == doctest::Approx(2.0 / 3));
    CHECK_THROWS(expected_min(0, 4));
    CHECK_THROWS(expected_min(5, 4));
    CHECK_THROWS(expected_min_printed_recurrence(0, 3));
}

TEST_CASE("expected_min agrees with subset enumeration") {
    double worst = 0.0;
    for (std::size_t n = 1; n <= 14; ++n)
        for (std::size_t k = 1; k <= n; ++k) {
            const double e = oracle::enumerate_expected_min(k, n);
            worst = std::max(worst, std::fabs(expected_min(k, n) - e));
            // the enumeration also validates the closed form
            REQUIRE(std::fabs(e - static_cast<double>(n - k) / static_cast<double>(k + 1)) <= 1e-12);
        }
    CHECK(worst <= 1e-12);
}

TEST_CASE("expected_min agrees with the closed form up to N = 200") {
    double worst = 0.0;
    for (std::size_t n = 1; n <= 200; ++n)
        for (std::size_t k = 1; k <= n; ++k) worst = std::max(worst, std::fabs(expected_min(k, n) - expected_min_closed_form(k, n)));
    CHECK(worst <= 1e-9);
}

TEST_CASE("the recurrence with (N+k)/N disagrees with enumeration") {
    // It matches only where E_{k,N-1} has no weight: k = N and k = N - 1.
    std::size_t disagreements = 0;
    for (std::size_t n = 2; n <= 14; ++n)
        for (std::size_t k = 1; k <= n; ++k) {
            const double printed = expected_min_printed_recurrence(k, n);
            const double e = oracle::enumerate_expected_min(k, n);
            if (k + 1 >= n)
                CHECK(std::fabs(printed - e) <= 1e-12);
            else if (std::fabs(printed - e) > 1e-6)
                ++disagreements;
        }
    CHECK(disagreements == 78);  // every pair with k <= N - 2, N <= 14
    // by hand: 1/2, then 2/3 + (4/3)(1/2), then 3/4 + (5/4)(4/3)
    CHECK(expected_min_printed_recurrence(1, 4) == doctest::Approx(29.0 / 12).epsilon(1e-15));
}

TEST_CASE("expected_min decreases strictly in k") {
    for (std::size_t n = 2; n <= 60; ++n)
        for (std::size_t k = 1; k < n; ++k) REQUIRE(expected_min(k + 1, n) < expected_min(k, n));
}

TEST_CASE("moving average and trigger") {
    SUBCASE("optimistic start does not trigger") {
        TelescopeConfig cfg;
        cfg.trigger = TriggerMode::threshold;
        Telescope t(cfg, 50);
        CHECK(t.moving_average() == 0.0);
        CHECK(t.moves() == 100);
        CHECK(t.threshold() == doctest::Approx(expected_min(10, 100)));
        CHECK_FALSE(t.update_and_check(1.0));
    }
    SUBCASE("eta = 0 follows the last count") {
        TelescopeConfig cfg;
        cfg.trigger = TriggerMode::threshold;
        cfg.eta = 0.0;
        Telescope t(cfg, 50);
        const double thr = t.threshold();
        CHECK_FALSE(t.update_and_check(std::floor(thr)));
        CHECK(t.moving_average() == std::floor(thr));
        CHECK(t.update_and_check(std::ceil(thr)));
    }
    SUBCASE("average stays within the seen range") {
        TelescopeConfig cfg;
        cfg.trigger = TriggerMode::threshold;
        Telescope t(cfg, 1000);
        Rng rng(1);
        double mx = 0.0;
        for (int i = 0; i < 500; ++i) {
            const double c = static_cast<double>(rng.below(30));
            mx = std::max(mx, c);
            t.update_and_check(c);
            REQUIRE(t.moving_average() >= 0.0);
            REQUIRE(t.moving_average() <= mx);
        }
    }
    SUBCASE("local-minimum mode never triggers") {
        Telescope t(TelescopeConfig{}, 10);
        for (int i = 0; i < 100; ++i) CHECK_FALSE(t.update_and_check(1e9));
    }
    SUBCASE("floor(phi N) = 0 is clamped to 1") {
        TelescopeConfig cfg;
        cfg.trigger = TriggerMode::threshold;
        cfg.phi = 0.01;
        Telescope t(cfg, 3);
        CHECK(t.threshold() == doctest::Approx(expected_min(1, 6)));
    }
}

TEST_CASE("a sparse improving stream triggers quickly") {
    // k / N = phi / 2: failed probes before success are the minimum of a
    // random k-subset of N positions.
    const std::size_t n_weights = 100, n_prime = 2, N = n_weights * n_prime, k = 10;
    TelescopeConfig cfg;
    cfg.trigger = TriggerMode::threshold;
    cfg.phi = 0.10;
    cfg.eta = 0.95;
    Rng rng(77);
    std::vector<std::size_t> pos(N);
    int triggered = 0;
    const int trials = 1000;
    for (int trial = 0; trial < trials; ++trial) {
        Telescope t(cfg, n_weights);
        REQUIRE(t.moves() == N);
        bool fired = false;
        for (int step = 0; step < 200 && !fired; ++step) {
            std::iota(pos.begin(), pos.end(), std::size_t{0});
            rng.shuffle(std::span<std::size_t>(pos));
            const std::size_t first = *std::min_element(pos.begin(), pos.begin() + k);
            fired = t.update_and_check(static_cast<double>(first));
        }
        triggered += fired;
    }
    CHECK(triggered >= 990);
}

TEST_CASE("unlocking") {
    TelescopeConfig cfg;
    cfg.n_start = 2;
    cfg.n_max = 6;
    cfg.trigger = TriggerMode::threshold;
    Telescope t(cfg, 10);
    CHECK(t.moves() == 20);
    auto before = t.unlocked_set();
    CHECK(before.size() == 20);
    // weight 3, positions 0 and 1
    CHECK(std::count(before.begin(), before.end(), 3u * 6 + 0) == 1);
    CHECK(std::count(before.begin(), before.end(), 3u * 6 + 2) == 0);
    t.update_and_check(5.0);
    const double thr = t.threshold();
    t.unlock();
    CHECK(t.moves() == 30);
    CHECK(t.moving_average() == 0.0);
    CHECK(t.threshold() != thr);
    auto after = t.unlocked_set();
    for (auto b : before) CHECK(std::count(after.begin(), after.end(), b) == 1);
    int events = 1;
    while (!t.at_max()) {
        t.unlock();
        ++events;
    }
    CHECK(events == cfg.n_max - cfg.n_start);
    CHECK(t.unlocked_set().size() == 60);
    CHECK_THROWS(t.unlock());
    t.reset();
    CHECK(t.unlocked_bits() == 2);
    TelescopeConfig badc;
    badc.n_start = 7;
    badc.n_max = 6;
    CHECK_THROWS(Telescope(badc, 4));
    badc.n_start = 2;
    badc.phi = 1.5;
    CHECK_THROWS(badc.validate());
}
