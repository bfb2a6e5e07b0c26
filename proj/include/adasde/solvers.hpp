#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "adasde/rng.hpp"
#include "adasde/schedule.hpp"
#include "adasde/score_field.hpp"
#include "adasde/types.hpp"

namespace adasde {

inline constexpr double kGammaMax = 0.2;  // hard clip on the stochastic coefficient

/// Learnable per-step quadruple {gamma, xi, lambda, mu}: injection strength,
/// midpoint time, output scale offset, evaluation-time shift. xi == 0 means
/// "geometric midpoint sqrt(t_hat * t_next)", resolved inside the step.
struct StepParams {
    double gamma = 0.0;
    double xi = 0.0;
    double lambda_scale = 0.0;
    double mu = 0.0;
};

inline StepParams neutral_theta() { return {}; }

enum class SolverKind { Euler, Heun, Dpm2, AdaSde, Plugin };
enum class HostKind { Euler, Heun, Dpm2 };

struct MethodSpec {
    SolverKind kind = SolverKind::AdaSde;
    HostKind host = HostKind::Dpm2;  // for Plugin only
};

std::string method_name(const MethodSpec& m);
MethodSpec method_from_name(const std::string& name);

/// True for methods whose step takes StepParams and draws injection noise.
bool method_uses_theta(const MethodSpec& m);

struct SamplerConfig {
    TimeSchedule schedule;
    std::optional<std::vector<StepParams>> theta;  // one per step when present
    bool afs = false;
    std::uint64_t seed = 0;
    MethodSpec method;
};

void validate_sampler_config(const SamplerConfig& cfg);

/// Recorded sampling run: states at schedule levels (all of them when
/// recording, otherwise just the initial and final states), per-step
/// injection noise for theta-driven methods, and the evaluation count.
struct Trajectory {
    std::vector<double> times;
    std::vector<PointCloud> states;
    std::vector<std::vector<Vec2>> noise_draws;
    int nfe = 0;

    const PointCloud& final_state() const { return states.back(); }
};

PointCloud euler_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next);

/// Trapezoidal correction; falls back to the Euler update when t_next == 0
/// (no second evaluation at t = 0).
PointCloud heun_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next);

/// Euler sub-step to the geometric midpoint sqrt(t_cur * t_next), then the
/// full step using the midpoint drift.
PointCloud dpm2_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next);

struct AdaSdeStep {
    PointCloud x;
    std::vector<Vec2> noise;  // per-point injection draws (recorded for coupling)
};

/// One stochastic step: raise the noise level to t_hat = (1+gamma) t_cur by
/// adding sqrt(t_hat^2 - t_cur^2) eps, Euler sub-step to the midpoint xi,
/// then x' = x + (1+lambda) (t_next - t_hat) drift(x_xi, xi + mu).
/// Two field evaluations per step.
AdaSdeStep adasde_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next,
                       const StepParams& theta, RngStream rng);

/// Noise injection plus (lambda, mu) adjustments wrapped around the host
/// solver's mean update from (x, t_hat) to t_next. Neutral theta reproduces
/// the host bit for bit.
PointCloud plugin_step(HostKind host, const ScoreField& field, const PointCloud& x, double t_cur,
                       double t_next, const StepParams& theta, RngStream rng,
                       std::vector<Vec2>* noise_out = nullptr);

/// Full sampling run from x ~ N(0, t_N^2 I). AFS replaces the first drift
/// evaluation with the analytic prior drift x/t. Injection is disabled on
/// the final step (gamma forced to 0) so terminal output stays noise-free.
Trajectory sample(const SamplerConfig& cfg, const ScoreField& field, int n_points, bool record);

/// As `sample` but starting from a caller-provided cloud at schedule level 0.
Trajectory sample_from(const SamplerConfig& cfg, const ScoreField& field, const PointCloud& init,
                       bool record);

}  // namespace adasde
