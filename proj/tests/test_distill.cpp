#include <cmath>

#include "doctest.h"

#include "adasde/dataset.hpp"
#include "adasde/distill.hpp"

using namespace adasde;

namespace {

struct ZeroField final : ScoreField {
    Vec2 score(const Vec2&, double) const override { return {0.0, 0.0}; }
};

MixtureScoreOracle circle_oracle(int n = 512, std::uint64_t seed = 0) {
    return {make_double_circle(n, 0.8, 0.6, 0.0, seed), 0.1};
}

bool clouds_identical(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size()) return false;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a.points[i].x != b.points[i].x || a.points[i].y != b.points[i].y) return false;
    return true;
}

}  // namespace

TEST_SUITE_BEGIN("distill");

TEST_CASE("teacher schedule: linear midpoint for a one-interval student") {
    const TimeSchedule student = build_polynomial_schedule(1, 4.0, 1.0, 1.0);
    REQUIRE(student.levels.size() == 2);
    const TimeSchedule teacher = build_teacher_schedule(student, 1);
    REQUIRE(teacher.levels.size() == 3);
    CHECK(teacher.levels[0] == 4.0);
    CHECK(teacher.levels[1] == doctest::Approx(2.5).epsilon(1e-14));
    CHECK(teacher.levels[2] == 1.0);
}

TEST_CASE("teacher schedule: counting and verbatim containment") {
    for (Scheme scheme : {Scheme::Uniform, Scheme::Polynomial, Scheme::LogSnr}) {
        const TimeSchedule student = scheme == Scheme::Uniform ? build_uniform_schedule(5)
                                     : scheme == Scheme::Polynomial
                                         ? build_polynomial_schedule(5)
                                         : build_logsnr_schedule(5);
        const int m = 3;
        const TimeSchedule teacher = build_teacher_schedule(student, m);
        REQUIRE(static_cast<int>(teacher.levels.size()) == 5 * (m + 1) + 1);
        for (int i = 0; i <= 5; ++i)
            CHECK(teacher.levels[static_cast<std::size_t>(i) * (m + 1)] ==
                  student.levels[static_cast<std::size_t>(i)]);
        for (std::size_t i = 1; i < teacher.levels.size(); ++i)
            CHECK(teacher.levels[i] < teacher.levels[i - 1]);
    }
}

TEST_CASE("teacher schedule: m = 0 is the student itself") {
    const TimeSchedule student = build_uniform_schedule(4);
    const TimeSchedule teacher = build_teacher_schedule(student, 0);
    CHECK(teacher.levels == student.levels);
}

TEST_CASE("zero field teacher stays at the initial state") {
    const ZeroField f;
    const TimeSchedule teacher = build_teacher_schedule(build_polynomial_schedule(3), 2);
    PointCloud init;
    init.points = {{1.0, 2.0}, {-0.5, 0.25}};
    const Trajectory traj = run_teacher(f, teacher, init, {SolverKind::Dpm2});
    for (const PointCloud& s : traj.states) CHECK(clouds_identical(s, init));
}

TEST_CASE("degenerate refinement: teacher over the student schedule equals the student") {
    const MixtureScoreOracle f = circle_oracle(128);
    const TimeSchedule student = build_polynomial_schedule(4);
    PointCloud init;
    const RngStream s(3);
    for (int i = 0; i < 32; ++i) {
        const auto e = s.normal2(static_cast<std::uint64_t>(i));
        init.points.push_back({80.0 * e[0], 80.0 * e[1]});
    }
    // Teacher on the student's own schedule (m = 0), against the neutral-theta
    // student: same deterministic trajectory, bit for bit.
    const Trajectory teacher = run_teacher(f, build_teacher_schedule(student, 0), init,
                                           {SolverKind::Dpm2});
    SamplerConfig cfg;
    cfg.schedule = student;
    cfg.method = {SolverKind::AdaSde};
    const Trajectory student_traj = sample_from(cfg, f, init, true);
    REQUIRE(teacher.states.size() == student_traj.states.size());
    for (std::size_t i = 0; i < teacher.states.size(); ++i)
        CHECK(clouds_identical(teacher.states[i], student_traj.states[i]));
}

TEST_CASE("finer teachers land closer to the converged flow") {
    const MixtureScoreOracle f = circle_oracle(256);
    const TimeSchedule student = build_polynomial_schedule(4);
    PointCloud init;
    const RngStream s(5);
    for (int i = 0; i < 64; ++i) {
        const auto e = s.normal2(static_cast<std::uint64_t>(i));
        init.points.push_back({80.0 * e[0], 80.0 * e[1]});
    }
    auto endpoint = [&](int m) {
        return run_teacher(f, build_teacher_schedule(student, m), init, {SolverKind::Dpm2})
            .final_state();
    };
    const PointCloud ref = endpoint(31);
    auto dist = [&](const PointCloud& a) {
        double acc = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) acc += norm(a.points[i] - ref.points[i]);
        return acc / static_cast<double>(a.size());
    };
    const double d3 = dist(endpoint(3));
    const double d7 = dist(endpoint(7));
    INFO("m=3: ", d3, "  m=7: ", d7);
    CHECK(d7 < d3);
}

TEST_CASE("aligned-state extraction checks its stride") {
    const ZeroField f;
    const TimeSchedule teacher = build_teacher_schedule(build_polynomial_schedule(3), 2);
    PointCloud init;
    init.points = {{0.0, 0.0}};
    const Trajectory traj = run_teacher(f, teacher, init, {SolverKind::Euler});
    CHECK(student_aligned_states(traj, 2).size() == 4);
    CHECK_THROWS_AS(student_aligned_states(traj, 3), std::invalid_argument);
}

TEST_CASE("zero field distillation: student already matches, losses stay zero") {
    const ZeroField f;
    DistillConfig cfg;
    cfg.student = build_polynomial_schedule(3);
    cfg.m_intermediate = 2;
    cfg.n_rounds = 2;
    cfg.batch_trajectories = 32;
    const DistillResult res = optimize_theta(f, cfg);
    REQUIRE(res.theta.steps.size() == 3);
    for (const auto& rec : res.history) {
        CHECK(rec.loss_before == 0.0);
        CHECK(rec.loss_after == 0.0);
    }
    for (const StepParams& th : res.theta.steps) CHECK(th.gamma == 0.0);
}

TEST_CASE("neutral initialization starts from the dpm2-vs-teacher gap") {
    const MixtureScoreOracle f = circle_oracle(128);
    DistillConfig cfg;
    cfg.student = build_polynomial_schedule(4);
    cfg.m_intermediate = 3;
    cfg.n_rounds = 1;
    cfg.batch_trajectories = 64;
    cfg.learning_rate = 1e-12;  // effectively freeze the parameters
    const DistillResult res = optimize_theta(f, cfg);

    // Reconstruct the same batch and march dpm2 against the teacher.
    PointCloud x;
    const RngStream init = fork(RngStream(cfg.seed), StreamId::DistillInit).fork(0);
    for (int i = 0; i < 64; ++i) {
        const auto e = init.normal2(static_cast<std::uint64_t>(i));
        x.points.push_back({cfg.student.levels[0] * e[0], cfg.student.levels[0] * e[1]});
    }
    const Trajectory teacher = run_teacher(
        f, build_teacher_schedule(cfg.student, cfg.m_intermediate), x, {SolverKind::Dpm2});
    const auto targets = student_aligned_states(teacher, cfg.m_intermediate);
    for (int s = 0; s < 4; ++s) {
        x = dpm2_step(f, x, cfg.student.levels[static_cast<std::size_t>(s)],
                      cfg.student.levels[static_cast<std::size_t>(s) + 1]);
        double mse = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i)
            mse += squared_norm(x.points[i] - targets[static_cast<std::size_t>(s) + 1].points[i]);
        mse /= static_cast<double>(x.size());
        CHECK(res.history[static_cast<std::size_t>(s)].loss_before ==
              doctest::Approx(mse).epsilon(1e-6));
    }
}

TEST_CASE("accepted updates never increase the per-batch loss") {
    const MixtureScoreOracle f = circle_oracle(256);
    DistillConfig cfg;
    cfg.student = build_polynomial_schedule(4);
    cfg.m_intermediate = 2;
    cfg.n_rounds = 3;
    cfg.batch_trajectories = 128;
    const DistillResult res = optimize_theta(f, cfg);
    REQUIRE(!res.history.empty());
    for (const auto& rec : res.history) CHECK(rec.loss_after <= rec.loss_before + 1e-12);
    CHECK(res.theta.steps.size() == 4);  // 4 scalars per step, one entry per step
}

TEST_CASE("distillation reduces the endpoint gap on the oracle field") {
    const MixtureScoreOracle f = circle_oracle(512);
    DistillConfig cfg;
    cfg.student = build_polynomial_schedule(4);
    cfg.m_intermediate = 3;
    cfg.n_rounds = 8;
    cfg.batch_trajectories = 256;
    const std::vector<StepParams> neutral(4);
    const double before = endpoint_mse(f, cfg, neutral, 512, 99);
    const DistillResult res = optimize_theta(f, cfg);
    const double after = endpoint_mse(f, cfg, res.theta.steps, 512, 99);
    INFO("endpoint mse: ", before, " -> ", after);
    CHECK(after < before);
}

TEST_CASE("theta tables round-trip through CSV") {
    ThetaTable table;
    table.steps = {{0.01, 1.5, -0.05, 0.002}, {0.0, 0.0, 0.12, -0.01}};
    const ThetaTable back = theta_from_csv(theta_to_csv(table));
    REQUIRE(back.steps.size() == 2);
    for (std::size_t i = 0; i < 2; ++i) {
        CHECK(back.steps[i].gamma == table.steps[i].gamma);
        CHECK(back.steps[i].xi == table.steps[i].xi);
        CHECK(back.steps[i].lambda_scale == table.steps[i].lambda_scale);
        CHECK(back.steps[i].mu == table.steps[i].mu);
    }
    CHECK_THROWS_AS(theta_from_csv("bogus\n"), std::runtime_error);
}

TEST_CASE("config validation") {
    DistillConfig cfg;
    cfg.student = build_polynomial_schedule(3);
    cfg.m_intermediate = 0;
    CHECK_THROWS_AS(validate_distill_config(cfg), std::invalid_argument);
    cfg.m_intermediate = 3;
    cfg.student_method = {SolverKind::Heun};
    CHECK_THROWS_AS(validate_distill_config(cfg), std::invalid_argument);
    cfg.student_method = {SolverKind::AdaSde};
    cfg.gamma_max = 0.5;
    CHECK_THROWS_AS(validate_distill_config(cfg), std::invalid_argument);
}

TEST_SUITE_END();
