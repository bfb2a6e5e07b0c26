#include "adasde/solvers.hpp"

#include <cmath>
#include <stdexcept>

namespace adasde {

std::string method_name(const MethodSpec& m) {
    switch (m.kind) {
        case SolverKind::Euler: return "euler";
        case SolverKind::Heun: return "heun";
        case SolverKind::Dpm2: return "dpm2";
        case SolverKind::AdaSde: return "adasde";
        case SolverKind::Plugin:
            switch (m.host) {
                case HostKind::Euler: return "plugin-euler";
                case HostKind::Heun: return "plugin-heun";
                case HostKind::Dpm2: return "plugin-dpm2";
            }
    }
    return "?";
}

MethodSpec method_from_name(const std::string& name) {
    if (name == "euler") return {SolverKind::Euler};
    if (name == "heun") return {SolverKind::Heun};
    if (name == "dpm2") return {SolverKind::Dpm2};
    if (name == "adasde") return {SolverKind::AdaSde};
    if (name == "plugin-euler") return {SolverKind::Plugin, HostKind::Euler};
    if (name == "plugin-heun") return {SolverKind::Plugin, HostKind::Heun};
    if (name == "plugin-dpm2") return {SolverKind::Plugin, HostKind::Dpm2};
    throw std::invalid_argument("unknown solver method: " + name);
}

bool method_uses_theta(const MethodSpec& m) {
    return m.kind == SolverKind::AdaSde || m.kind == SolverKind::Plugin;
}

namespace {

/// Routes drift evaluations, counting network calls and optionally serving
/// the first one analytically (AFS: drift = x / t under the Gaussian prior).
class DriftEvaluator {
public:
    DriftEvaluator(const ScoreField& field, bool analytic_first)
        : field_(&field), analytic_pending_(analytic_first) {}

    std::vector<Vec2> operator()(const PointCloud& x, double t) {
        if (analytic_pending_) {
            analytic_pending_ = false;
            std::vector<Vec2> d(x.size());
            const double inv_t = 1.0 / t;
            for (std::size_t i = 0; i < x.size(); ++i) d[i] = inv_t * x.points[i];
            return d;
        }
        ++nfe_;
        return field_->drift_batch(x.points, t);
    }

    int nfe() const { return nfe_; }

private:
    const ScoreField* field_;
    bool analytic_pending_;
    int nfe_ = 0;
};

void check_step_times(double t_cur, double t_next, bool next_positive) {
    // Equal times are allowed and yield the identity update.
    if (!(t_cur >= t_next)) throw std::invalid_argument("step: need t_cur >= t_next");
    if (next_positive ? !(t_next > 0.0) : t_next < 0.0)
        throw std::invalid_argument(next_positive ? "step: need t_next > 0"
                                                  : "step: need t_next >= 0");
}

PointCloud axpy(const PointCloud& x, double c, const std::vector<Vec2>& d) {
    PointCloud out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.points[i] += c * d[i];
    return out;
}

PointCloud euler_kernel(DriftEvaluator& ev, const PointCloud& x, double t_cur, double t_next) {
    return axpy(x, t_next - t_cur, ev(x, t_cur));
}

PointCloud heun_kernel(DriftEvaluator& ev, const PointCloud& x, double t_cur, double t_next) {
    if (t_next == 0.0) return euler_kernel(ev, x, t_cur, t_next);
    const std::vector<Vec2> d1 = ev(x, t_cur);
    const PointCloud pred = axpy(x, t_next - t_cur, d1);
    const std::vector<Vec2> d2 = ev(pred, t_next);
    const double c = 0.5 * (t_next - t_cur);
    PointCloud out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.points[i] += c * (d1[i] + d2[i]);
    return out;
}

PointCloud dpm2_kernel(DriftEvaluator& ev, const PointCloud& x, double t_cur, double t_next) {
    const double xi = std::sqrt(t_cur * t_next);
    const std::vector<Vec2> d1 = ev(x, t_cur);
    const PointCloud mid = axpy(x, xi - t_cur, d1);
    const std::vector<Vec2> d2 = ev(mid, xi);
    return axpy(x, t_next - t_cur, d2);
}

/// Raise the noise level to t_hat and add the matching Gaussian increment.
/// Per-point draws are keyed by point index, so results do not depend on
/// evaluation order. The draws are returned even when gamma == 0 (coupled
/// runs want the record); the state is only touched when gamma > 0.
PointCloud inject_noise(const PointCloud& x, double t_cur, double t_hat, double gamma,
                        const RngStream& rng, std::vector<Vec2>& noise) {
    noise.resize(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto eps = rng.normal2(static_cast<std::uint64_t>(i));
        noise[i] = {eps[0], eps[1]};
    }
    if (!(gamma > 0.0)) return x;
    const double std_dev = std::sqrt(t_hat * t_hat - t_cur * t_cur);
    PointCloud out = x;
    for (std::size_t i = 0; i < out.size(); ++i) out.points[i] += std_dev * noise[i];
    return out;
}

double resolve_xi(const StepParams& theta, double t_hat, double t_next) {
    return theta.xi == 0.0 ? std::sqrt(t_hat * t_next) : theta.xi;
}

AdaSdeStep adasde_kernel(DriftEvaluator& ev, const PointCloud& x, double t_cur, double t_next,
                         const StepParams& theta, const RngStream& rng) {
    const double t_hat = (1.0 + theta.gamma) * t_cur;
    AdaSdeStep result;
    const PointCloud lifted = inject_noise(x, t_cur, t_hat, theta.gamma, rng, result.noise);
    const double xi = resolve_xi(theta, t_hat, t_next);
    const double t_eval = xi + theta.mu;
    if (!(t_eval > 0.0)) throw std::invalid_argument("adasde_step: xi + mu must be > 0");
    const std::vector<Vec2> d1 = ev(lifted, t_hat);
    const PointCloud mid = axpy(lifted, xi - t_hat, d1);
    const std::vector<Vec2> d2 = ev(mid, t_eval);
    result.x = axpy(lifted, (1.0 + theta.lambda_scale) * (t_next - t_hat), d2);
    return result;
}

PointCloud plugin_kernel(HostKind host, DriftEvaluator& ev, const PointCloud& x, double t_cur,
                         double t_next, const StepParams& theta, const RngStream& rng,
                         std::vector<Vec2>* noise_out) {
    const double t_hat = (1.0 + theta.gamma) * t_cur;
    std::vector<Vec2> noise;
    const PointCloud lifted = inject_noise(x, t_cur, t_hat, theta.gamma, rng, noise);
    if (noise_out) *noise_out = std::move(noise);
    const double scale = 1.0 + theta.lambda_scale;

    switch (host) {
        case HostKind::Euler: {
            const double t_eval = t_hat + theta.mu;
            if (!(t_eval > 0.0)) throw std::invalid_argument("plugin: t_hat + mu must be > 0");
            return axpy(lifted, scale * (t_next - t_hat), ev(lifted, t_eval));
        }
        case HostKind::Heun: {
            if (t_next == 0.0) {
                const double t_eval = t_hat + theta.mu;
                if (!(t_eval > 0.0)) throw std::invalid_argument("plugin: t_hat + mu must be > 0");
                return axpy(lifted, scale * (t_next - t_hat), ev(lifted, t_eval));
            }
            const double t_eval = t_next + theta.mu;
            if (!(t_eval > 0.0)) throw std::invalid_argument("plugin: t_next + mu must be > 0");
            const std::vector<Vec2> d1 = ev(lifted, t_hat);
            const PointCloud pred = axpy(lifted, t_next - t_hat, d1);
            const std::vector<Vec2> d2 = ev(pred, t_eval);
            const double c = scale * (0.5 * (t_next - t_hat));
            PointCloud out = lifted;
            for (std::size_t i = 0; i < out.size(); ++i) out.points[i] += c * (d1[i] + d2[i]);
            return out;
        }
        case HostKind::Dpm2: {
            const double xi = std::sqrt(t_hat * t_next);
            const double t_eval = xi + theta.mu;
            if (!(t_eval > 0.0)) throw std::invalid_argument("plugin: xi + mu must be > 0");
            const std::vector<Vec2> d1 = ev(lifted, t_hat);
            const PointCloud mid = axpy(lifted, xi - t_hat, d1);
            const std::vector<Vec2> d2 = ev(mid, t_eval);
            return axpy(lifted, scale * (t_next - t_hat), d2);
        }
    }
    throw std::logic_error("plugin: unreachable host");
}

void check_theta(const StepParams& theta, double t_cur, double t_next) {
    if (!(theta.gamma >= 0.0) || theta.gamma > kGammaMax)
        throw std::invalid_argument("theta: gamma outside [0, 0.2]");
    const double t_hat = (1.0 + theta.gamma) * t_cur;
    if (theta.xi != 0.0 && !(theta.xi > t_next && theta.xi < t_hat))
        throw std::invalid_argument("theta: xi outside (t_next, t_hat)");
    if (!std::isfinite(theta.lambda_scale) || !std::isfinite(theta.mu))
        throw std::invalid_argument("theta: non-finite entry");
}

}  // namespace

PointCloud euler_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next) {
    check_step_times(t_cur, t_next, /*next_positive=*/false);
    DriftEvaluator ev(field, false);
    return euler_kernel(ev, x, t_cur, t_next);
}

PointCloud heun_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next) {
    check_step_times(t_cur, t_next, /*next_positive=*/false);
    DriftEvaluator ev(field, false);
    return heun_kernel(ev, x, t_cur, t_next);
}

PointCloud dpm2_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next) {
    check_step_times(t_cur, t_next, /*next_positive=*/true);
    DriftEvaluator ev(field, false);
    return dpm2_kernel(ev, x, t_cur, t_next);
}

AdaSdeStep adasde_step(const ScoreField& field, const PointCloud& x, double t_cur, double t_next,
                       const StepParams& theta, RngStream rng) {
    check_step_times(t_cur, t_next, /*next_positive=*/false);
    check_theta(theta, t_cur, t_next);
    DriftEvaluator ev(field, false);
    return adasde_kernel(ev, x, t_cur, t_next, theta, rng);
}

PointCloud plugin_step(HostKind host, const ScoreField& field, const PointCloud& x, double t_cur,
                       double t_next, const StepParams& theta, RngStream rng,
                       std::vector<Vec2>* noise_out) {
    check_step_times(t_cur, t_next, host == HostKind::Dpm2);
    check_theta(theta, t_cur, t_next);
    DriftEvaluator ev(field, false);
    return plugin_kernel(host, ev, x, t_cur, t_next, theta, rng, noise_out);
}

void validate_sampler_config(const SamplerConfig& cfg) {
    const int n = cfg.schedule.n_steps();
    if (n < 1) throw std::invalid_argument("sampler: schedule must have at least 1 step");
    for (std::size_t i = 1; i < cfg.schedule.levels.size(); ++i)
        if (!(cfg.schedule.levels[i] < cfg.schedule.levels[i - 1]) ||
            !(cfg.schedule.levels[i] > 0.0))
            throw std::invalid_argument("sampler: schedule levels must be positive, decreasing");
    if (cfg.theta) {
        if (!method_uses_theta(cfg.method))
            throw std::invalid_argument("sampler: theta provided but method " +
                                        method_name(cfg.method) + " does not take it");
        if (static_cast<int>(cfg.theta->size()) != n)
            throw std::invalid_argument("sampler: theta length must equal the step count");
        for (int s = 0; s < n; ++s) {
            const double t_cur = cfg.schedule.levels[s];
            const double t_next = cfg.schedule.levels[s + 1];
            const StepParams& th = (*cfg.theta)[s];
            check_theta(th, t_cur, t_next);
            const double t_hat = (1.0 + th.gamma) * t_cur;
            const double xi = resolve_xi(th, t_hat, t_next);
            const double eval =
                cfg.method.kind == SolverKind::Plugin && cfg.method.host == HostKind::Euler
                    ? t_hat + th.mu
                : cfg.method.kind == SolverKind::Plugin && cfg.method.host == HostKind::Heun
                    ? t_next + th.mu
                    : xi + th.mu;
            if (!(eval > 0.0))
                throw std::invalid_argument("sampler: evaluation time must be > 0 at step " +
                                            std::to_string(s));
        }
    }
}

namespace {

Trajectory run(const SamplerConfig& cfg, const ScoreField& field, PointCloud x, bool record) {
    validate_sampler_config(cfg);
    const auto& levels = cfg.schedule.levels;
    const int n = cfg.schedule.n_steps();
    const std::vector<StepParams> theta =
        cfg.theta ? *cfg.theta : std::vector<StepParams>(static_cast<std::size_t>(n));

    Trajectory traj;
    if (record) {
        traj.times.reserve(levels.size());
        traj.states.reserve(levels.size());
    }
    traj.times.push_back(levels[0]);
    traj.states.push_back(x);

    const RngStream root(cfg.seed);
    const RngStream step_noise = fork(root, StreamId::StepNoise);
    DriftEvaluator ev(field, cfg.afs);

    for (int s = 0; s < n; ++s) {
        const double t_cur = levels[static_cast<std::size_t>(s)];
        const double t_next = levels[static_cast<std::size_t>(s) + 1];
        StepParams th = theta[static_cast<std::size_t>(s)];
        if (s == n - 1) th.gamma = 0.0;  // no terminal injection
        const RngStream rng = step_noise.fork(static_cast<std::uint64_t>(s));

        std::vector<Vec2> noise;
        switch (cfg.method.kind) {
            case SolverKind::Euler:
                x = euler_kernel(ev, x, t_cur, t_next);
                break;
            case SolverKind::Heun:
                x = heun_kernel(ev, x, t_cur, t_next);
                break;
            case SolverKind::Dpm2:
                x = dpm2_kernel(ev, x, t_cur, t_next);
                break;
            case SolverKind::AdaSde: {
                AdaSdeStep st = adasde_kernel(ev, x, t_cur, t_next, th, rng);
                x = std::move(st.x);
                noise = std::move(st.noise);
                break;
            }
            case SolverKind::Plugin:
                x = plugin_kernel(cfg.method.host, ev, x, t_cur, t_next, th, rng, &noise);
                break;
        }

        for (std::size_t i = 0; i < x.size(); ++i)
            if (!is_finite(x.points[i]))
                throw std::runtime_error("sampler: non-finite state at step " + std::to_string(s));

        if (record) {
            traj.times.push_back(t_next);
            traj.states.push_back(x);
            if (method_uses_theta(cfg.method)) traj.noise_draws.push_back(std::move(noise));
        }
    }

    if (!record) {
        traj.times.push_back(levels.back());
        traj.states.push_back(std::move(x));
    }
    traj.nfe = ev.nfe();
    return traj;
}

}  // namespace

Trajectory sample(const SamplerConfig& cfg, const ScoreField& field, int n_points, bool record) {
    if (n_points < 1) throw std::invalid_argument("sample: n_points must be >= 1");
    const RngStream init = fork(RngStream(cfg.seed), StreamId::SampleInit);
    const double t_start = cfg.schedule.levels.at(0);
    PointCloud x;
    x.seed = cfg.seed;
    x.points.resize(static_cast<std::size_t>(n_points));
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto eps = init.normal2(i);
        x.points[i] = {t_start * eps[0], t_start * eps[1]};
    }
    return run(cfg, field, std::move(x), record);
}

Trajectory sample_from(const SamplerConfig& cfg, const ScoreField& field, const PointCloud& init,
                       bool record) {
    if (init.empty()) throw std::invalid_argument("sample_from: empty initial cloud");
    return run(cfg, field, init, record);
}

}  // namespace adasde
