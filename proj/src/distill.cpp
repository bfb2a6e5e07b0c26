#include "adasde/distill.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "adasde/io.hpp"

namespace adasde {

void validate_distill_config(const DistillConfig& cfg) {
    if (cfg.student.n_steps() < 1) throw std::invalid_argument("distill: empty student schedule");
    if (cfg.m_intermediate < 1) throw std::invalid_argument("distill: m must be >= 1");
    if (!(cfg.learning_rate > 0.0)) throw std::invalid_argument("distill: learning rate must be > 0");
    if (cfg.n_rounds < 1 || cfg.batch_trajectories < 1)
        throw std::invalid_argument("distill: rounds and batch must be >= 1");
    if (!(cfg.gamma_min >= 0.0) || !(cfg.gamma_max <= kGammaMax) ||
        !(cfg.gamma_min <= cfg.gamma_max))
        throw std::invalid_argument("distill: gamma bounds must satisfy 0 <= min <= max <= 0.2");
    if (!method_uses_theta(cfg.student_method))
        throw std::invalid_argument("distill: student method must take step parameters");
    if (method_uses_theta(cfg.teacher_method) &&
        cfg.teacher_method.kind != SolverKind::AdaSde)
        throw std::invalid_argument("distill: teacher must be a deterministic solver");
}

TimeSchedule build_teacher_schedule(const TimeSchedule& student, int m) {
    if (m < 0) throw std::invalid_argument("teacher schedule: m must be >= 0");
    if (m == 0) return student;
    const int n = student.n_steps();
    if (n < 1) throw std::invalid_argument("teacher schedule: empty student schedule");

    TimeSchedule teacher = student;
    teacher.levels.clear();
    teacher.levels.reserve(static_cast<std::size_t>(n) * (m + 1) + 1);

    // Per-interval interpolation in the scheme's own parameter; student
    // levels are copied verbatim so containment is exact.
    const UniformCoeffs coeffs =
        student.scheme == Scheme::Uniform
            ? uniform_coeffs(student.sigma_max, student.sigma_min, student.eps_s)
            : UniformCoeffs{};
    const double warp_root =
        student.scheme == Scheme::Uniform ? std::pow(student.eps_s, 1.0 / student.rho) : 0.0;
    auto warp_param = [&](int idx) {
        const double frac = static_cast<double>(idx) / n;
        return std::pow(1.0 + frac * (warp_root - 1.0), student.rho);
    };

    for (int i = 0; i < n; ++i) {
        const double lo_level = student.levels[static_cast<std::size_t>(i) + 1];
        const double hi_level = student.levels[static_cast<std::size_t>(i)];
        teacher.levels.push_back(hi_level);
        for (int j = 1; j <= m; ++j) {
            const double f = static_cast<double>(j) / (m + 1);
            double level = 0.0;
            switch (student.scheme) {
                case Scheme::Uniform: {
                    const double tt = warp_param(i) + f * (warp_param(i + 1) - warp_param(i));
                    level = uniform_sigma_of_t(tt, coeffs);
                    break;
                }
                case Scheme::Polynomial: {
                    const double hi = std::pow(hi_level, 1.0 / student.rho);
                    const double lo = std::pow(lo_level, 1.0 / student.rho);
                    level = std::pow(hi + f * (lo - hi), student.rho);
                    break;
                }
                case Scheme::LogSnr:
                    level = std::exp(std::log(hi_level) + f * (std::log(lo_level) - std::log(hi_level)));
                    break;
            }
            teacher.levels.push_back(level);
        }
    }
    teacher.levels.push_back(student.levels.back());
    for (std::size_t i = 1; i < teacher.levels.size(); ++i)
        if (!(teacher.levels[i] < teacher.levels[i - 1]))
            throw std::runtime_error("teacher schedule: interpolation broke monotonicity");
    return teacher;
}

Trajectory run_teacher(const ScoreField& field, const TimeSchedule& teacher,
                       const PointCloud& x_init, MethodSpec method) {
    SamplerConfig cfg;
    cfg.schedule = teacher;
    cfg.method = method;
    cfg.seed = 0;  // teacher is deterministic: no theta, gamma = 0 throughout
    return sample_from(cfg, field, x_init, /*record=*/true);
}

std::vector<PointCloud> student_aligned_states(const Trajectory& teacher, int m) {
    const std::size_t stride = static_cast<std::size_t>(m) + 1;
    if ((teacher.states.size() - 1) % stride != 0)
        throw std::invalid_argument("teacher trajectory length does not match stride m+1");
    std::vector<PointCloud> out;
    for (std::size_t i = 0; i < teacher.states.size(); i += stride)
        out.push_back(teacher.states[i]);
    return out;
}

namespace {

struct ParamCoords {
    double gamma = 0.0;
    double q = 0.0;       // xi = sqrt(t_hat * t_next) * exp(q)
    double lambda = 0.0;
    double b = 0.0;       // mu = b * (t_hat - t_next)
};

struct StepGeometry {
    double t_cur = 0.0;
    double t_next = 0.0;
    bool last = false;
    bool learn_xi = false;  // plugins keep the host's own midpoint
    double gamma_min = 0.0;
    double gamma_max = kGammaMax;
};

ParamCoords clamp_coords(ParamCoords u, const StepGeometry& g) {
    u.gamma = std::clamp(u.gamma, g.gamma_min, g.gamma_max);
    if (g.last) u.gamma = 0.0;
    const double t_hat = (1.0 + u.gamma) * g.t_cur;
    const double half_span = 0.5 * std::log(t_hat / g.t_next);
    u.q = std::clamp(u.q, -0.98 * half_span, 0.98 * half_span);
    // keep every evaluation time positive: mu > -t_next covers all hosts
    const double interval = t_hat - g.t_next;
    const double b_floor = (-0.9 * g.t_next) / interval;
    if (u.b < b_floor) u.b = b_floor;
    return u;
}

StepParams materialize(const ParamCoords& u, const StepGeometry& g) {
    StepParams th;
    th.gamma = u.gamma;
    const double t_hat = (1.0 + u.gamma) * g.t_cur;
    th.xi = g.learn_xi ? std::sqrt(t_hat * g.t_next) * std::exp(u.q) : 0.0;
    th.lambda_scale = u.lambda;
    th.mu = u.b * (t_hat - g.t_next);
    return th;
}

double batch_mse(const PointCloud& a, const PointCloud& b) {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += squared_norm(a.points[i] - b.points[i]);
    return acc / static_cast<double>(a.size());
}

}  // namespace

DistillResult optimize_theta(const ScoreField& field, const DistillConfig& cfg) {
    validate_distill_config(cfg);
    const TimeSchedule& student = cfg.student;
    const int n = student.n_steps();
    const TimeSchedule teacher = build_teacher_schedule(student, cfg.m_intermediate);

    std::vector<ParamCoords> coords(static_cast<std::size_t>(n));
    DistillResult result;
    result.theta.steps.assign(static_cast<std::size_t>(n), StepParams{});
    {
        std::ostringstream cfgkey;
        cfgkey << scheme_name(student.scheme) << ' ' << n << ' ' << cfg.m_intermediate << ' '
               << method_name(cfg.teacher_method) << ' ' << method_name(cfg.student_method) << ' '
               << cfg.learning_rate << ' ' << cfg.n_rounds << ' ' << cfg.batch_trajectories << ' '
               << cfg.seed;
        result.theta.config_hash = hash_hex(cfgkey.str());
    }

    const RngStream root(cfg.seed);
    const RngStream init_stream = fork(root, StreamId::DistillInit);
    const RngStream noise_root = fork(root, StreamId::StepNoise);
    const double t_start = student.levels[0];

    for (int round = 0; round < cfg.n_rounds; ++round) {
        const double lr = cfg.cosine_decay
                              ? cfg.learning_rate * 0.5 *
                                    (1.0 + std::cos(std::numbers::pi * round / cfg.n_rounds))
                              : cfg.learning_rate;

        // Shared initial noise: teacher and student start bit-identically.
        PointCloud x;
        x.points.resize(static_cast<std::size_t>(cfg.batch_trajectories));
        const RngStream round_init = init_stream.fork(static_cast<std::uint64_t>(round));
        for (std::size_t i = 0; i < x.size(); ++i) {
            const auto eps = round_init.normal2(i);
            x.points[i] = {t_start * eps[0], t_start * eps[1]};
        }

        const Trajectory teacher_traj = run_teacher(field, teacher, x, cfg.teacher_method);
        const std::vector<PointCloud> targets =
            student_aligned_states(teacher_traj, cfg.m_intermediate);

        for (int s = 0; s < n; ++s) {
            StepGeometry geom;
            geom.t_cur = student.levels[static_cast<std::size_t>(s)];
            geom.t_next = student.levels[static_cast<std::size_t>(s) + 1];
            geom.last = s == n - 1;
            geom.learn_xi = cfg.student_method.kind == SolverKind::AdaSde;
            geom.gamma_min = cfg.gamma_min;
            geom.gamma_max = cfg.gamma_max;

            const RngStream step_rng =
                noise_root.fork(static_cast<std::uint64_t>(round), static_cast<std::uint64_t>(s));
            const PointCloud& target = targets[static_cast<std::size_t>(s) + 1];

            auto objective = [&](const ParamCoords& u) {
                const StepParams th = materialize(clamp_coords(u, geom), geom);
                PointCloud next;
                if (cfg.student_method.kind == SolverKind::AdaSde)
                    next = adasde_step(field, x, geom.t_cur, geom.t_next, th, step_rng).x;
                else
                    next = plugin_step(cfg.student_method.host, field, x, geom.t_cur, geom.t_next,
                                       th, step_rng);
                return batch_mse(next, target);
            };

            ParamCoords& u = coords[static_cast<std::size_t>(s)];
            u = clamp_coords(u, geom);
            const double loss_before = objective(u);
            if (!std::isfinite(loss_before))
                throw std::runtime_error("distill: non-finite loss at round " +
                                         std::to_string(round) + " step " + std::to_string(s));

            // Active coordinates, their scales, and central differences.
            const double t_hat0 = (1.0 + u.gamma) * geom.t_cur;
            const double log_span = 0.5 * std::log(t_hat0 / geom.t_next);
            struct Axis {
                double* value;
                double scale;
                bool active;
            };
            Axis axes[4] = {
                {&u.gamma, 0.02, !geom.last},
                {&u.q, 0.3 * log_span, geom.learn_xi},
                {&u.lambda, 0.05, true},
                {&u.b, 0.05, true},
            };

            double grad[4] = {0, 0, 0, 0};
            for (int k = 0; k < 4; ++k) {
                if (!axes[k].active) continue;
                const double h = cfg.fd_rel_step * std::max(axes[k].scale, std::abs(*axes[k].value));
                ParamCoords up = u, dn = u;
                *(k == 0 ? &up.gamma : k == 1 ? &up.q : k == 2 ? &up.lambda : &up.b) += h;
                *(k == 0 ? &dn.gamma : k == 1 ? &dn.q : k == 2 ? &dn.lambda : &dn.b) -= h;
                grad[k] = (objective(up) - objective(dn)) / (2.0 * h);
            }

            // Preconditioned descent on the loss normalized by its current
            // value; per-coordinate steps capped at one natural scale.
            ParamCoords delta;
            const double inv_loss = loss_before > 0.0 ? 1.0 / loss_before : 0.0;
            double* dvals[4] = {&delta.gamma, &delta.q, &delta.lambda, &delta.b};
            for (int k = 0; k < 4; ++k) {
                if (!axes[k].active) continue;
                double step = -lr * axes[k].scale * axes[k].scale * grad[k] * inv_loss;
                step = std::clamp(step, -axes[k].scale, axes[k].scale);
                *dvals[k] = step;
            }

            ParamCoords accepted = u;
            double loss_after = loss_before;
            int halvings = 0;
            double shrink = 1.0;
            for (; halvings <= cfg.backtrack_max; ++halvings, shrink *= 0.5) {
                ParamCoords cand = u;
                cand.gamma += shrink * delta.gamma;
                cand.q += shrink * delta.q;
                cand.lambda += shrink * delta.lambda;
                cand.b += shrink * delta.b;
                cand = clamp_coords(cand, geom);
                const double cand_loss = objective(cand);
                if (std::isfinite(cand_loss) && cand_loss <= loss_before) {
                    accepted = cand;
                    loss_after = cand_loss;
                    break;
                }
            }
            u = accepted;

            const StepParams th = materialize(u, geom);
            result.theta.steps[static_cast<std::size_t>(s)] = th;
            if (!geom.last &&
                (u.gamma <= cfg.gamma_min + 1e-12 || u.gamma >= cfg.gamma_max - 1e-12) &&
                u.gamma != 0.0)
                result.warnings.push_back("gamma at bound: round " + std::to_string(round) +
                                          " step " + std::to_string(s));

            result.history.push_back({round, s, loss_before, loss_after, lr,
                                      halvings > cfg.backtrack_max ? -1 : halvings});

            // March on with the accepted parameters and the same noise.
            if (cfg.student_method.kind == SolverKind::AdaSde)
                x = adasde_step(field, x, geom.t_cur, geom.t_next, th, step_rng).x;
            else
                x = plugin_step(cfg.student_method.host, field, x, geom.t_cur, geom.t_next, th,
                                step_rng);
        }
    }
    return result;
}

double endpoint_mse(const ScoreField& field, const DistillConfig& cfg,
                    const std::vector<StepParams>& theta, int n_eval, std::uint64_t seed) {
    if (n_eval < 1) throw std::invalid_argument("endpoint_mse: n_eval must be >= 1");
    const TimeSchedule teacher = build_teacher_schedule(cfg.student, cfg.m_intermediate);

    PointCloud x0;
    x0.points.resize(static_cast<std::size_t>(n_eval));
    const RngStream init = fork(RngStream(seed), StreamId::DistillInit);
    const double t_start = cfg.student.levels[0];
    for (std::size_t i = 0; i < x0.size(); ++i) {
        const auto eps = init.normal2(i);
        x0.points[i] = {t_start * eps[0], t_start * eps[1]};
    }

    const Trajectory teacher_traj = run_teacher(field, teacher, x0, cfg.teacher_method);

    SamplerConfig scfg;
    scfg.schedule = cfg.student;
    scfg.method = cfg.student_method;
    scfg.theta = theta;
    scfg.seed = seed;
    const Trajectory student_traj = sample_from(scfg, field, x0, /*record=*/false);

    return batch_mse(student_traj.final_state(), teacher_traj.final_state());
}

std::string theta_to_csv(const ThetaTable& table) {
    std::string out = "n,gamma,xi,lambda,mu\n";
    for (std::size_t i = 0; i < table.steps.size(); ++i) {
        const StepParams& th = table.steps[i];
        out += std::to_string(i);
        out += ',';
        out += format_double(th.gamma);
        out += ',';
        out += format_double(th.xi);
        out += ',';
        out += format_double(th.lambda_scale);
        out += ',';
        out += format_double(th.mu);
        out += '\n';
    }
    return out;
}

ThetaTable theta_from_csv(const std::string& csv) {
    ThetaTable table;
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line.rfind("n,gamma,xi,lambda,mu", 0) != 0)
        throw std::runtime_error("theta CSV: bad header");
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        StepParams th;
        long idx = 0;
        char* p = nullptr;
        idx = std::strtol(line.c_str(), &p, 10);
        if (*p != ',') throw std::runtime_error("theta CSV: bad row");
        th.gamma = std::strtod(p + 1, &p);
        if (*p != ',') throw std::runtime_error("theta CSV: bad row");
        th.xi = std::strtod(p + 1, &p);
        if (*p != ',') throw std::runtime_error("theta CSV: bad row");
        th.lambda_scale = std::strtod(p + 1, &p);
        if (*p != ',') throw std::runtime_error("theta CSV: bad row");
        th.mu = std::strtod(p + 1, &p);
        if (idx != static_cast<long>(table.steps.size()))
            throw std::runtime_error("theta CSV: rows out of order");
        table.steps.push_back(th);
    }
    if (table.steps.empty()) throw std::runtime_error("theta CSV: no rows");
    return table;
}

void save_theta(const std::filesystem::path& path, const ThetaTable& table) {
    write_text_file(path, theta_to_csv(table));
}

ThetaTable load_theta(const std::filesystem::path& path) {
    return theta_from_csv(read_text_file(path));
}

std::string history_to_csv(const std::vector<ThetaUpdateRecord>& history) {
    std::string out = "round,step,loss_before,loss_after,lr,halvings\n";
    for (const auto& r : history) {
        out += std::to_string(r.round);
        out += ',';
        out += std::to_string(r.step);
        out += ',';
        out += format_double(r.loss_before);
        out += ',';
        out += format_double(r.loss_after);
        out += ',';
        out += format_double(r.lr);
        out += ',';
        out += std::to_string(r.halvings);
        out += '\n';
    }
    return out;
}

}  // namespace adasde
