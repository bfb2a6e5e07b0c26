#include <cmath>

#include "doctest.h"

#include "adasde/dataset.hpp"
#include "adasde/io.hpp"
#include "adasde/rng.hpp"

using namespace adasde;

TEST_SUITE_BEGIN("dataset");

TEST_CASE("double circle: ring radii and determinism") {
    const PointCloud c = make_double_circle(20000, 0.8, 0.6, 0.1, 0);
    REQUIRE(c.size() == 20000);
    double mean_r_outer = 0.0, mean_r_inner = 0.0;
    for (int i = 0; i < 10000; ++i) mean_r_outer += norm(c.points[static_cast<std::size_t>(i)]);
    for (int i = 10000; i < 20000; ++i) mean_r_inner += norm(c.points[static_cast<std::size_t>(i)]);
    mean_r_outer /= 10000.0;
    mean_r_inner /= 10000.0;
    CHECK(std::abs(mean_r_outer - 0.8) < 0.01);
    CHECK(std::abs(mean_r_inner - 0.6) < 0.01);

    const PointCloud again = make_double_circle(20000, 0.8, 0.6, 0.1, 0);
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(c.points[i].x == again.points[i].x);
        CHECK(c.points[i].y == again.points[i].y);
    }
}

TEST_CASE("double circle: zero noise lands exactly on the rings") {
    const PointCloud c = make_double_circle(2, 0.8, 0.6, 0.0, 0);
    CHECK(norm(c.points[0]) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(norm(c.points[1]) == doctest::Approx(0.6).epsilon(1e-15));
}

TEST_CASE("double circle: covariance trace matches the Monte-Carlo oracle") {
    // Independent oracle: 1e6 draws of r^2 + noise contributions.
    const RngStream mc(914);
    double oracle = 0.0;
    const int n_mc = 1000000;
    for (int i = 0; i < n_mc; ++i) {
        const RngStream pt = mc.fork(static_cast<std::uint64_t>(i));
        const double r = i % 2 == 0 ? 0.8 : 0.6;
        const double angle = 2.0 * std::numbers::pi * pt.uniform(0);
        const auto eps = pt.normal2(1);
        const Vec2 p{r * std::cos(angle) + 0.1 * eps[0], r * std::sin(angle) + 0.1 * eps[1]};
        oracle += squared_norm(p);
    }
    oracle /= n_mc;  // E r^2 + 2 sigma^2 (means vanish by symmetry)

    const PointCloud c = make_double_circle(20000, 0.8, 0.6, 0.1, 0);
    Vec2 mean{0, 0};
    for (const Vec2& p : c.points) mean += p;
    mean *= 1.0 / static_cast<double>(c.size());
    double trace = 0.0;
    for (const Vec2& p : c.points) trace += squared_norm(p - mean);
    trace /= static_cast<double>(c.size());

    CHECK(trace == doctest::Approx(oracle).epsilon(0.02));
    CHECK(oracle == doctest::Approx(0.5 + 2.0 * 0.01).epsilon(0.01));  // closed form
}

TEST_CASE("oracle score: single center and symmetry") {
    PointCloud one;
    one.points.push_back({0.0, 0.0});
    const MixtureScoreOracle o(one, 0.0);
    for (double t : {0.1, 1.0, 7.0}) {
        const Vec2 s = o.score({0.4, -1.2}, t);
        CHECK(s.x == doctest::Approx(-0.4 / (t * t)).epsilon(1e-14));
        CHECK(s.y == doctest::Approx(1.2 / (t * t)).epsilon(1e-14));
    }

    PointCloud two;
    two.points.push_back({0.7, 0.2});
    two.points.push_back({-0.7, -0.2});
    const MixtureScoreOracle sym(two, 0.0);
    const Vec2 s0 = sym.score({0.0, 0.0}, 0.5);
    CHECK(std::abs(s0.x) < 1e-14);
    CHECK(std::abs(s0.y) < 1e-14);
}

TEST_CASE("oracle score equals the finite-difference log-density gradient") {
    const PointCloud centers = make_gaussian_mixture(
        5, {{0.3, 0.1}, {-0.5, 0.7}, {0.9, -0.4}, {-0.2, -0.8}, {0.0, 0.5}}, 0.3, 42);
    const MixtureScoreOracle o(centers, 0.1);
    const RngStream rng(7);
    for (int k = 0; k < 50; ++k) {
        const auto e = rng.normal2(static_cast<std::uint64_t>(k));
        const Vec2 x{e[0], e[1]};
        const double t = 0.05 + 2.0 * rng.uniform(1000 + static_cast<std::uint64_t>(k));
        const double var = t * t + 0.01;
        const double h = 1e-5 * std::sqrt(var);
        const Vec2 s = o.score(x, t);
        const double fx =
            (o.log_density({x.x + h, x.y}, t) - o.log_density({x.x - h, x.y}, t)) / (2 * h);
        const double fy =
            (o.log_density({x.x, x.y + h}, t) - o.log_density({x.x, x.y - h}, t)) / (2 * h);
        const double err = norm(s - Vec2{fx, fy});
        CHECK(err < 1e-6 * std::max(1.0, norm(s)));
    }
}

TEST_CASE("oracle score approaches the prior score -x/t^2 at large t") {
    const PointCloud data = make_double_circle(256, 0.8, 0.6, 0.1, 3);
    const MixtureScoreOracle o(data, 0.1);
    const double t = 80.0;
    for (const Vec2 x : {Vec2{3.0, 0.0}, Vec2{-1.0, 2.0}, Vec2{0.5, -2.5}}) {
        const Vec2 s = o.score(x, t);
        const Vec2 prior{-x.x / (t * t), -x.y / (t * t)};
        CHECK(norm(s - prior) < 0.02 * norm(prior));
    }
}

TEST_CASE("oracle drift is -t times the score, exactly") {
    const PointCloud data = make_double_circle(64, 0.8, 0.6, 0.1, 5);
    const MixtureScoreOracle o(data, 0.1);
    const Vec2 x{0.3, -0.9};
    for (double t : {0.01, 0.5, 12.0}) {
        const Vec2 s = o.score(x, t);
        const Vec2 d = o.drift(x, t);
        CHECK(d.x == -t * s.x);
        CHECK(d.y == -t * s.y);
    }
}

TEST_CASE("cloud CSV round-trips bit-exactly") {
    const PointCloud c = make_double_circle(128, 0.8, 0.6, 0.1, 1);
    const PointCloud back = cloud_from_csv(cloud_to_csv(c));
    REQUIRE(back.size() == c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        CHECK(back.points[i].x == c.points[i].x);
        CHECK(back.points[i].y == c.points[i].y);
    }
}

TEST_CASE("subsample is deterministic and size-correct") {
    const PointCloud c = make_double_circle(1000, 0.8, 0.6, 0.1, 2);
    const PointCloud s1 = subsample(c, 100, 9);
    const PointCloud s2 = subsample(c, 100, 9);
    REQUIRE(s1.size() == 100);
    for (std::size_t i = 0; i < s1.size(); ++i) CHECK(s1.points[i].x == s2.points[i].x);
    CHECK(subsample(c, 2000, 9).size() == 1000);  // no-op when already smaller
}

TEST_SUITE_END();
