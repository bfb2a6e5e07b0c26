#include <cmath>

#include "doctest.h"

#include "adasde/schedule.hpp"

using namespace adasde;

namespace {
double rel_err(double a, double b) { return std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }
}

TEST_SUITE_BEGIN("schedule");

TEST_CASE("uniform schedule hits the published endpoints") {
    const TimeSchedule s = build_uniform_schedule(9, 80.0, 0.002, 1.0, 1e-3);
    REQUIRE(s.levels.size() == 10);
    CHECK(rel_err(s.levels.front(), 80.0) < 1e-9);
    CHECK(rel_err(s.levels.back(), 0.002) < 1e-9);
}

TEST_CASE("uniform schedule with one step is just the endpoints") {
    const TimeSchedule s = build_uniform_schedule(1, 80.0, 0.002, 1.0, 1e-3);
    REQUIRE(s.levels.size() == 2);
    CHECK(rel_err(s.levels[0], 80.0) < 1e-9);
    CHECK(s.levels[1] == 0.002);
}

TEST_CASE("uniform interior levels match the high-precision reference") {
    // Frozen from an independent 50-digit evaluation of the closed form
    // (agrees with float64 to ~1e-11).
    const double expected[] = {80.0,
                               16.506206332658365,
                               4.7463379579046645,
                               1.754111173374537,
                               0.650215905084258,
                               0.002};
    const TimeSchedule s = build_uniform_schedule(5, 80.0, 0.002, 1.0, 1e-3);
    REQUIRE(s.levels.size() == 6);
    for (int i = 0; i < 6; ++i) CHECK(rel_err(s.levels[i], expected[i]) < 1e-9);
}

TEST_CASE("uniform warp round-trips sigma(sigma_inv) on [eps_s, 1]") {
    const UniformCoeffs c = uniform_coeffs(80.0, 0.002, 1e-3);
    for (int i = 0; i <= 200; ++i) {
        const double t = 1e-3 + (1.0 - 1e-3) * i / 200.0;
        const double back = uniform_t_of_sigma(uniform_sigma_of_t(t, c), c);
        CHECK(std::abs(back - t) < 1e-6);
    }
}

TEST_CASE("polynomial schedule endpoints and midpoint") {
    const TimeSchedule s9 = build_polynomial_schedule(9, 80.0, 0.002, 7.0);
    CHECK(rel_err(s9.levels.front(), 80.0) < 1e-9);
    CHECK(s9.levels.back() == 0.002);

    const TimeSchedule s2 = build_polynomial_schedule(2, 80.0, 0.002, 7.0);
    const double mid =
        std::pow((std::pow(80.0, 1.0 / 7.0) + std::pow(0.002, 1.0 / 7.0)) / 2.0, 7.0);
    CHECK(rel_err(s2.levels[1], mid) < 1e-12);
    CHECK(rel_err(mid, 2.5152189761471586) < 1e-12);  // independent evaluation
}

TEST_CASE("logsnr schedule is geometric") {
    const TimeSchedule s2 = build_logsnr_schedule(2, 80.0, 0.002);
    CHECK(rel_err(s2.levels[1], 0.4) < 1e-12);  // sqrt(80 * 0.002)

    const TimeSchedule s1 = build_logsnr_schedule(1, 80.0, 0.002);
    REQUIRE(s1.levels.size() == 2);
    CHECK(rel_err(s1.levels[0], 80.0) < 1e-12);
    CHECK(s1.levels[1] == 0.002);

    const TimeSchedule s4 = build_logsnr_schedule(4, 80.0, 0.002);
    const double r0 = s4.levels[1] / s4.levels[0];
    for (int i = 1; i < 4; ++i)
        CHECK(std::abs(s4.levels[i + 1] / s4.levels[i] - r0) < 1e-12 * r0);
}

TEST_CASE("every scheme is strictly decreasing with exact-ish endpoints") {
    for (int n : {1, 2, 3, 7, 16, 64}) {
        for (int scheme = 0; scheme < 3; ++scheme) {
            const TimeSchedule s = scheme == 0   ? build_uniform_schedule(n)
                                   : scheme == 1 ? build_polynomial_schedule(n)
                                                 : build_logsnr_schedule(n);
            REQUIRE(static_cast<int>(s.levels.size()) == n + 1);
            CHECK(rel_err(s.levels.front(), 80.0) < 1e-9);
            CHECK(rel_err(s.levels.back(), 0.002) < 1e-9);
            for (std::size_t i = 1; i < s.levels.size(); ++i) {
                CHECK(s.levels[i] < s.levels[i - 1]);
                CHECK(s.levels[i] > 0.0);
            }
        }
    }
}

TEST_CASE("invalid arguments are rejected") {
    CHECK_THROWS_AS(build_uniform_schedule(0), std::invalid_argument);
    CHECK_THROWS_AS(build_uniform_schedule(5, 0.002, 80.0), std::invalid_argument);
    CHECK_THROWS_AS(build_uniform_schedule(5, 80.0, -1.0), std::invalid_argument);
    // eps_s = 1 makes the warp coefficients degenerate (division by zero)
    CHECK_THROWS_AS(build_uniform_schedule(5, 80.0, 0.002, 1.0, 1.0), std::invalid_argument);
    CHECK_THROWS_AS(build_polynomial_schedule(5, 80.0, 0.002, 0.0), std::invalid_argument);
}

TEST_CASE("plain-text serialization round-trips") {
    const TimeSchedule s = build_uniform_schedule(7);
    const auto levels = levels_from_text(schedule_to_text(s));
    REQUIRE(levels.size() == s.levels.size());
    for (std::size_t i = 0; i < levels.size(); ++i) CHECK(levels[i] == s.levels[i]);
}

TEST_SUITE_END();
