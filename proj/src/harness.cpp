#include "adasde/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <future>
#include <memory>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

#include "adasde/distill.hpp"
#include "adasde/io.hpp"
#include "adasde/metrics.hpp"
#include "adasde/rng.hpp"
#include "adasde/score_model.hpp"

namespace adasde {

using nlohmann::json;

std::string report_to_csv(const ErrorReport& report) {
    std::string out = "method,gamma,theta_id,n_steps,gradient_error,discretization_error,total_error,seed\n";
    for (const ErrorRow& r : report.rows) {
        out += r.method;
        out += ',';
        out += format_double(r.gamma);
        out += ',';
        out += r.theta_id;
        out += ',';
        out += std::to_string(r.n_steps);
        out += ',';
        out += format_double(r.gradient_error);
        out += ',';
        out += format_double(r.discretization_error);
        out += ',';
        out += format_double(r.total_error);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

TimeSchedule build_schedule(const SchedulePlan& plan, int n_steps) {
    switch (plan.scheme) {
        case Scheme::Uniform:
            return build_uniform_schedule(n_steps, plan.sigma_max, plan.sigma_min, plan.rho,
                                          plan.eps_s);
        case Scheme::Polynomial:
            return build_polynomial_schedule(n_steps, plan.sigma_max, plan.sigma_min, plan.rho);
        case Scheme::LogSnr:
            return build_logsnr_schedule(n_steps, plan.sigma_max, plan.sigma_min);
    }
    throw std::logic_error("unreachable scheme");
}

PointCloud regenerate(const ScoreField& field, const PointCloud& base, const TimeSchedule& schedule,
                      double gamma, HostKind host, double t_mid, double partial_fraction,
                      RegenMode mode, std::uint64_t seed, bool inject) {
    if (!(partial_fraction > 0.0) || partial_fraction > 1.0)
        throw std::invalid_argument("regenerate: partial_fraction must be in (0, 1]");
    if (!(t_mid < schedule.levels.front()) || !(t_mid > schedule.levels.back()))
        throw std::invalid_argument("regenerate: t_mid must lie inside the schedule range");

    // Index of the first schedule level strictly below t_mid.
    std::size_t lo = schedule.levels.size() - 1;
    for (std::size_t i = 0; i < schedule.levels.size(); ++i) {
        if (schedule.levels[i] < t_mid) {
            lo = i;
            break;
        }
    }

    const RngStream rng = fork(RngStream(seed), StreamId::Regenerate);
    PointCloud x = base;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const auto eps = rng.normal2(i);
        x.points[i] += t_mid * Vec2{eps[0], eps[1]};
    }

    const double step_gamma = inject ? gamma : 0.0;
    if (mode == RegenMode::PartialStep) {
        StepParams theta;
        theta.gamma = step_gamma;
        const double target = t_mid - partial_fraction * (t_mid - schedule.levels[lo]);
        return plugin_step(host, field, x, t_mid, target, theta, rng.fork(1));
    }

    // Continue mode: march the remaining levels down to sigma_min with the
    // row's stepping mode; no injection on the terminal step (as in sample).
    double t_cur = t_mid;
    for (std::size_t j = lo; j < schedule.levels.size(); ++j) {
        StepParams theta;
        theta.gamma = j + 1 == schedule.levels.size() ? 0.0 : step_gamma;
        x = plugin_step(host, field, x, t_cur, schedule.levels[j], theta, rng.fork(1 + j));
        t_cur = schedule.levels[j];
    }
    return x;
}

ErrorReport error_decomposition(const ScoreField& field, const MixtureScoreOracle& oracle,
                                const PointCloud& data, const DecompositionConfig& cfg) {
    if (cfg.steps.empty()) throw std::invalid_argument("decompose: steps list must be nonempty");
    if (cfg.gammas.empty() ||
        std::none_of(cfg.gammas.begin(), cfg.gammas.end(), [](double g) { return g == 0.0; }))
        throw std::invalid_argument("decompose: gammas must include 0 (ODE baseline)");
    if (cfg.n_eval < 2) throw std::invalid_argument("decompose: n_eval must be >= 2");

    const PointCloud& source =
        data.empty() ? oracle.sample_data(std::max(cfg.n_eval, 20000), cfg.seed) : data;
    const PointCloud truth_ref = subsample(source, cfg.n_eval, cfg.seed);
    const std::uint64_t w1_seed = cfg.seed;  // shared projections across all rows

    ErrorReport report;
    for (int n_steps : cfg.steps) {
        const TimeSchedule schedule = build_schedule(cfg.plan, n_steps);
        for (double gamma : cfg.gammas) {
            SamplerConfig sc;
            sc.schedule = schedule;
            sc.method = {SolverKind::Plugin, cfg.host};
            sc.seed = cfg.seed;
            StepParams th;
            th.gamma = gamma;
            sc.theta = std::vector<StepParams>(static_cast<std::size_t>(n_steps), th);

            const PointCloud generated = sample(sc, field, cfg.n_eval, false).final_state();
            const PointCloud regen = regenerate(field, truth_ref, schedule, gamma, cfg.host,
                                                cfg.t_mid, cfg.partial_fraction, cfg.regen_mode,
                                                cfg.seed, cfg.inject_in_regen);

            ErrorRow row;
            row.method = method_name(sc.method);
            row.gamma = gamma;
            row.n_steps = n_steps;
            row.gradient_error = sliced_w1(regen, generated, cfg.n_proj, w1_seed);
            row.discretization_error = sliced_w1(regen, truth_ref, cfg.n_proj, w1_seed);
            row.total_error = sliced_w1(truth_ref, generated, cfg.n_proj, w1_seed);
            row.seed = cfg.seed;
            report.rows.push_back(std::move(row));
        }
    }
    return report;
}

ErrorReport error_decomposition(const ScoreField& field, const MixtureScoreOracle& oracle,
                                const PointCloud& data, const TimeSchedule& schedule,
                                const std::vector<double>& gammas, double t_mid,
                                double partial_fraction, int n_eval, std::uint64_t seed) {
    DecompositionConfig cfg;
    cfg.plan.scheme = schedule.scheme;
    cfg.plan.sigma_max = schedule.sigma_max;
    cfg.plan.sigma_min = schedule.sigma_min;
    cfg.plan.rho = schedule.rho;
    cfg.plan.eps_s = schedule.eps_s;
    cfg.steps = {schedule.n_steps()};
    cfg.gammas = gammas;
    cfg.t_mid = t_mid;
    cfg.partial_fraction = partial_fraction;
    cfg.n_eval = n_eval;
    cfg.seed = seed;
    return error_decomposition(field, oracle, data, cfg);
}

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt_tick(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.4g", v);
    return buf;
}

}  // namespace

std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<PlotSeries>& series) {
    const double width = 640, height = 440;
    const double ml = 70, mr = 150, mt = 40, mb = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool first = true;
    for (const auto& s : series) {
        for (const auto& [x, y] : s.points) {
            if (first) {
                xmin = xmax = x;
                ymin = ymax = y;
                first = false;
            }
            xmin = std::min(xmin, x);
            xmax = std::max(xmax, x);
            ymin = std::min(ymin, y);
            ymax = std::max(ymax, y);
        }
    }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = width - ml - mr, ph = height - mt - mb;
    auto sx = [&](double x) { return ml + (x - xmin) / (xmax - xmin) * pw; };
    auto sy = [&](double y) { return mt + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
        << height << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n";
    svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    svg << "<text x=\"" << width / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
        << title << "</text>\n";
    // axes
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw << "\" y2=\""
        << mt + ph << "\" stroke=\"black\"/>\n";
    svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml << "\" y2=\"" << mt + ph
        << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << height - 12
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    svg << "<text x=\"16\" y=\"" << mt + ph / 2
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 " << mt + ph / 2
        << ")\">" << y_label << "</text>\n";
    // min/max ticks
    svg << "<text x=\"" << ml << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_tick(xmin) << "</text>\n";
    svg << "<text x=\"" << ml + pw << "\" y=\"" << mt + ph + 16
        << "\" text-anchor=\"middle\" font-size=\"10\">" << fmt_tick(xmax) << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << mt + ph
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_tick(ymin) << "</text>\n";
    svg << "<text x=\"" << ml - 6 << "\" y=\"" << mt + 10
        << "\" text-anchor=\"end\" font-size=\"10\">" << fmt_tick(ymax) << "</text>\n";

    for (std::size_t k = 0; k < series.size(); ++k) {
        const char* color = kPalette[k % (sizeof(kPalette) / sizeof(kPalette[0]))];
        svg << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
        for (const auto& [x, y] : series[k].points) svg << sx(x) << ',' << sy(y) << ' ';
        svg << "\"/>\n";
        for (const auto& [x, y] : series[k].points)
            svg << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"2.5\" fill=\""
                << color << "\"/>\n";
        svg << "<text x=\"" << ml + pw + 12 << "\" y=\"" << mt + 16 + 18 * static_cast<double>(k)
            << "\" font-size=\"12\" fill=\"" << color << "\">" << series[k].label << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

// ---------------------------------------------------------------------------
// Experiment pipelines (JSON config driven)
// ---------------------------------------------------------------------------

namespace {

void check_keys(const json& obj, const std::string& path,
                std::initializer_list<const char*> allowed) {
    if (!obj.is_object()) throw std::runtime_error("config: " + path + " must be an object");
    for (const auto& [key, value] : obj.items()) {
        bool ok = false;
        for (const char* a : allowed)
            if (key == a) ok = true;
        if (!ok) throw std::runtime_error("config: invalid key " + path + "." + key);
    }
}

template <typename T>
T get_or(const json& obj, const char* key, T fallback) {
    if (!obj.contains(key)) return fallback;
    return obj.at(key).get<T>();
}

struct DatasetBundle {
    PointCloud data;                                 // the (noisy) training set
    std::unique_ptr<MixtureScoreOracle> oracle;      // clean centers + base smoothing
    double sigma_data = 0.5;
};

DatasetBundle build_dataset(const json& cfg, std::uint64_t seed) {
    check_keys(cfg, "dataset",
               {"kind", "n_points", "r_outer", "r_inner", "noise_sigma", "sigma", "seed"});
    DatasetBundle out;
    const std::string kind = get_or<std::string>(cfg, "kind", "double_circle");
    const auto ds_seed = get_or<std::uint64_t>(cfg, "seed", seed);
    if (kind == "double_circle") {
        const int n = get_or<int>(cfg, "n_points", 20000);
        const double r_outer = get_or<double>(cfg, "r_outer", 0.8);
        const double r_inner = get_or<double>(cfg, "r_inner", 0.6);
        const double noise = get_or<double>(cfg, "noise_sigma", 0.1);
        out.data = make_double_circle(n, r_outer, r_inner, noise, ds_seed);
        // Clean centers share the seed, so data[i] == centers[i] + noise.
        out.oracle = std::make_unique<MixtureScoreOracle>(
            make_double_circle(n, r_outer, r_inner, 0.0, ds_seed), noise);
        out.sigma_data = 0.5;
    } else if (kind == "gaussian") {
        const int n = get_or<int>(cfg, "n_points", 4096);
        const double sigma = get_or<double>(cfg, "sigma", 0.5);
        out.data = make_gaussian(n, {0.0, 0.0}, sigma, ds_seed);
        PointCloud center;
        center.points.push_back({0.0, 0.0});
        out.oracle = std::make_unique<MixtureScoreOracle>(center, sigma);
        out.sigma_data = sigma;
    } else {
        throw std::runtime_error("config: dataset.kind must be double_circle or gaussian");
    }
    return out;
}

TrainConfig parse_train(const json& cfg, std::uint64_t seed, double sigma_data) {
    check_keys(cfg, "train",
               {"hidden_width", "n_layers", "learning_rate", "batch_size", "n_iters",
                "t_log_mean", "t_log_std", "sigma_min", "sigma_max", "sigma_data", "seed"});
    TrainConfig tc;
    tc.hidden_width = get_or<int>(cfg, "hidden_width", tc.hidden_width);
    tc.n_layers = get_or<int>(cfg, "n_layers", tc.n_layers);
    tc.learning_rate = get_or<double>(cfg, "learning_rate", tc.learning_rate);
    tc.batch_size = get_or<int>(cfg, "batch_size", tc.batch_size);
    tc.n_iters = get_or<int>(cfg, "n_iters", tc.n_iters);
    tc.t_log_mean = get_or<double>(cfg, "t_log_mean", tc.t_log_mean);
    tc.t_log_std = get_or<double>(cfg, "t_log_std", tc.t_log_std);
    tc.sigma_min = get_or<double>(cfg, "sigma_min", tc.sigma_min);
    tc.sigma_max = get_or<double>(cfg, "sigma_max", tc.sigma_max);
    tc.sigma_data = get_or<double>(cfg, "sigma_data", sigma_data);
    tc.seed = get_or<std::uint64_t>(cfg, "seed", seed);
    return tc;
}

SchedulePlan parse_schedule_plan(const json& cfg) {
    check_keys(cfg, "schedule", {"scheme", "n_steps", "sigma_max", "sigma_min", "rho", "eps_s"});
    SchedulePlan plan;
    const std::string scheme = get_or<std::string>(cfg, "scheme", "uniform");
    plan.scheme = scheme_from_name(scheme);
    plan.sigma_max = get_or<double>(cfg, "sigma_max", 80.0);
    plan.sigma_min = get_or<double>(cfg, "sigma_min", 0.002);
    plan.rho = get_or<double>(cfg, "rho", plan.scheme == Scheme::Uniform ? 1.0 : 7.0);
    plan.eps_s = get_or<double>(cfg, "eps_s", 1e-3);
    return plan;
}

TimeSchedule parse_schedule(const json& cfg) {
    const SchedulePlan plan = parse_schedule_plan(cfg);
    const int n_steps = get_or<int>(cfg, "n_steps", 5);
    return build_schedule(plan, n_steps);
}

struct FieldBundle {
    std::unique_ptr<ScoreField> field;
    std::string id;
};

/// Builds the sampling field: the exact oracle (optionally center-subsampled
/// for solver-in-the-loop speed) or an MLP loaded from a checkpoint / trained
/// on the spot when requested.
FieldBundle resolve_field(const json& root, const DatasetBundle& ds,
                          const std::filesystem::path& out_dir, std::uint64_t seed,
                          std::vector<std::string>& artifacts) {
    FieldBundle out;
    const json field_cfg = root.contains("field") ? root.at("field") : json::object();
    check_keys(field_cfg, "field", {"kind", "checkpoint", "train", "subsample_centers"});
    const std::string kind = get_or<std::string>(field_cfg, "kind", "mlp");
    if (kind == "oracle") {
        if (!ds.oracle) throw std::runtime_error("config: field.kind=oracle requires a dataset");
        const int sub = get_or<int>(field_cfg, "subsample_centers", 0);
        if (sub > 0 && sub < static_cast<int>(ds.oracle->centers().size()))
            out.field = std::make_unique<MixtureScoreOracle>(ds.oracle->subsampled(sub, seed));
        else
            out.field = std::make_unique<MixtureScoreOracle>(*ds.oracle);
        out.id = "oracle";
        return out;
    }
    if (kind != "mlp") throw std::runtime_error("config: field.kind must be oracle or mlp");

    if (field_cfg.contains("checkpoint") && !get_or<bool>(field_cfg, "train", false)) {
        const std::string path = field_cfg.at("checkpoint").get<std::string>();
        out.field = std::make_unique<MlpScoreField>(load_checkpoint(path));
        out.id = "mlp:" + hash_hex(read_text_file(path));
        return out;
    }

    // Train now (also the "train" pipeline stage).
    if (ds.data.empty()) throw std::runtime_error("config: training requires a dataset");
    const TrainConfig tc =
        parse_train(root.contains("train") ? root.at("train") : json::object(), seed,
                    ds.sigma_data);
    std::ostringstream loss_csv;
    const MlpParams params = train(tc, ds.data, &loss_csv);
    const auto ckpt = out_dir / "checkpoint.txt";
    save_checkpoint(ckpt, params, tc.sigma_data);
    write_text_file(out_dir / "loss_curve.csv", loss_csv.str());
    artifacts.push_back("checkpoint.txt");
    artifacts.push_back("loss_curve.csv");
    out.field = std::make_unique<MlpScoreField>(params, tc.sigma_data);
    out.id = "mlp:" + hash_hex(read_text_file(ckpt));
    return out;
}

std::optional<std::vector<StepParams>> parse_theta(const json& cfg, const TimeSchedule& schedule,
                                                   std::string& theta_id) {
    const std::string theta = get_or<std::string>(cfg, "theta", "neutral");
    if (theta == "neutral") {
        theta_id = "neutral";
        return std::nullopt;
    }
    if (theta == "fixed_gamma") {
        StepParams th;
        th.gamma = get_or<double>(cfg, "gamma", 0.0);
        theta_id = "gamma=" + format_double(th.gamma);
        return std::vector<StepParams>(static_cast<std::size_t>(schedule.n_steps()), th);
    }
    const ThetaTable table = load_theta(theta);
    theta_id = "theta:" + hash_hex(theta_to_csv(table));
    return table.steps;
}

json theta_to_json(const std::vector<StepParams>& steps) {
    json arr = json::array();
    for (const StepParams& th : steps)
        arr.push_back({{"gamma", th.gamma}, {"xi", th.xi}, {"lambda", th.lambda_scale}, {"mu", th.mu}});
    return arr;
}

void stage_distill(const json& root, const DatasetBundle& ds, const FieldBundle& field,
                   const std::filesystem::path& out_dir, std::uint64_t seed,
                   std::vector<std::string>& artifacts) {
    const json cfg = root.contains("distill") ? root.at("distill") : json::object();
    check_keys(cfg, "distill",
               {"m", "teacher", "student", "learning_rate", "cosine_decay", "n_rounds", "batch",
                "gamma_min", "gamma_max", "fd_rel_step", "backtrack_max", "seed"});
    DistillConfig dc;
    dc.student = parse_schedule(root.contains("schedule") ? root.at("schedule") : json::object());
    dc.m_intermediate = get_or<int>(cfg, "m", 3);
    dc.teacher_method = method_from_name(get_or<std::string>(cfg, "teacher", "dpm2"));
    dc.student_method = method_from_name(get_or<std::string>(cfg, "student", "adasde"));
    dc.learning_rate = get_or<double>(cfg, "learning_rate", 0.2);
    dc.cosine_decay = get_or<bool>(cfg, "cosine_decay", true);
    dc.n_rounds = get_or<int>(cfg, "n_rounds", 5);
    dc.batch_trajectories = get_or<int>(cfg, "batch", 2000);
    dc.gamma_min = get_or<double>(cfg, "gamma_min", 0.0);
    dc.gamma_max = get_or<double>(cfg, "gamma_max", kGammaMax);
    dc.fd_rel_step = get_or<double>(cfg, "fd_rel_step", 1e-3);
    dc.backtrack_max = get_or<int>(cfg, "backtrack_max", 10);
    dc.seed = get_or<std::uint64_t>(cfg, "seed", seed);
    (void)ds;

    DistillResult result = optimize_theta(*field.field, dc);
    result.theta.field_id = field.id;
    save_theta(out_dir / "theta.csv", result.theta);
    write_text_file(out_dir / "distill_history.csv", history_to_csv(result.history));
    json manifest;
    manifest["config_hash"] = result.theta.config_hash;
    manifest["field_id"] = result.theta.field_id;
    manifest["method"] = method_name(dc.student_method);
    manifest["n_steps"] = dc.student.n_steps();
    manifest["seed"] = dc.seed;
    manifest["warnings"] = result.warnings;
    write_text_file(out_dir / "theta_manifest.json", manifest.dump(2) + "\n");
    artifacts.insert(artifacts.end(), {"theta.csv", "distill_history.csv", "theta_manifest.json"});
}

void stage_sample(const json& root, const FieldBundle& field, const std::filesystem::path& out_dir,
                  std::uint64_t seed, std::vector<std::string>& artifacts) {
    const json cfg = root.contains("sample") ? root.at("sample") : json::object();
    check_keys(cfg, "sample", {"method", "n_points", "afs", "record", "theta", "gamma", "seed"});
    SamplerConfig sc;
    sc.schedule = parse_schedule(root.contains("schedule") ? root.at("schedule") : json::object());
    sc.method = method_from_name(get_or<std::string>(cfg, "method", "adasde"));
    sc.afs = get_or<bool>(cfg, "afs", false);
    sc.seed = get_or<std::uint64_t>(cfg, "seed", seed);
    std::string theta_id = "none";
    if (method_uses_theta(sc.method)) sc.theta = parse_theta(cfg, sc.schedule, theta_id);
    const int n_points = get_or<int>(cfg, "n_points", 2048);
    const bool record = get_or<bool>(cfg, "record", true);

    const Trajectory traj = sample(sc, *field.field, n_points, record);

    json manifest;
    manifest["method"] = method_name(sc.method);
    manifest["afs"] = sc.afs;
    manifest["seed"] = sc.seed;
    manifest["nfe"] = traj.nfe;
    manifest["theta_id"] = theta_id;
    if (sc.theta) manifest["theta"] = theta_to_json(*sc.theta);
    manifest["times"] = traj.times;
    json files = json::array();
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "traj_%03zu.csv", i);
        save_cloud_csv(out_dir / name, traj.states[i]);
        files.push_back(name);
        artifacts.push_back(name);
    }
    manifest["files"] = files;
    write_text_file(out_dir / "sample_manifest.json", manifest.dump(2) + "\n");
    artifacts.push_back("sample_manifest.json");
}

void stage_decompose(const json& root, const DatasetBundle& ds, const FieldBundle& field,
                     const std::filesystem::path& out_dir, std::uint64_t seed,
                     std::vector<std::string>& artifacts) {
    if (!ds.oracle) throw std::runtime_error("config: decompose requires a dataset");
    const json cfg = root.contains("decompose") ? root.at("decompose") : json::object();
    check_keys(cfg, "decompose",
               {"steps", "gammas", "host", "t_mid", "partial_fraction", "regen_mode", "n_eval",
                "n_proj", "inject_in_regen", "seed"});
    DecompositionConfig dc;
    dc.plan = parse_schedule_plan(root.contains("schedule") ? root.at("schedule") : json::object());
    if (cfg.contains("steps")) dc.steps = cfg.at("steps").get<std::vector<int>>();
    if (cfg.contains("gammas")) dc.gammas = cfg.at("gammas").get<std::vector<double>>();
    const MethodSpec host = method_from_name(get_or<std::string>(cfg, "host", "heun"));
    dc.host = host.kind == SolverKind::Euler  ? HostKind::Euler
              : host.kind == SolverKind::Dpm2 ? HostKind::Dpm2
                                              : HostKind::Heun;
    dc.t_mid = get_or<double>(cfg, "t_mid", 0.8);
    dc.partial_fraction = get_or<double>(cfg, "partial_fraction", 1.0 / 3.0);
    const std::string regen = get_or<std::string>(cfg, "regen_mode", "continue");
    if (regen == "continue")
        dc.regen_mode = RegenMode::Continue;
    else if (regen == "partial_step")
        dc.regen_mode = RegenMode::PartialStep;
    else
        throw std::runtime_error("config: decompose.regen_mode must be continue or partial_step");
    dc.n_eval = get_or<int>(cfg, "n_eval", 2048);
    dc.n_proj = get_or<int>(cfg, "n_proj", 128);
    dc.inject_in_regen = get_or<bool>(cfg, "inject_in_regen", true);
    dc.seed = get_or<std::uint64_t>(cfg, "seed", seed);

    const ErrorReport report = error_decomposition(*field.field, *ds.oracle, ds.data, dc);
    write_text_file(out_dir / "error_report.csv", report_to_csv(report));
    artifacts.push_back("error_report.csv");

    const struct {
        const char* file;
        const char* title;
        double ErrorRow::*member;
    } figures[] = {
        {"fig_gradient_error.svg", "Gradient error", &ErrorRow::gradient_error},
        {"fig_discretization_error.svg", "Discretization error", &ErrorRow::discretization_error},
        {"fig_total_error.svg", "Total error", &ErrorRow::total_error},
    };
    for (const auto& fig : figures) {
        std::vector<PlotSeries> series;
        for (double gamma : dc.gammas) {
            PlotSeries s;
            s.label = "gamma=" + format_double(gamma);
            for (const ErrorRow& r : report.rows)
                if (r.gamma == gamma) s.points.push_back({static_cast<double>(r.n_steps), r.*(fig.member)});
            series.push_back(std::move(s));
        }
        write_text_file(out_dir / fig.file,
                        render_svg_plot(fig.title, "steps", "W1", series));
        artifacts.push_back(fig.file);
    }
}

void run_experiment_json(const json& root, const std::filesystem::path& out_dir,
                         std::optional<std::uint64_t> seed_override,
                         std::optional<std::string> stage_override) {
    check_keys(root, "config",
               {"pipeline", "seed", "dataset", "field", "train", "schedule", "distill", "sample",
                "decompose", "base", "runs"});
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = seed_override.value_or(get_or<std::uint64_t>(root, "seed", 0));

    std::vector<std::string> pipeline;
    if (stage_override)
        pipeline = {*stage_override};
    else if (root.contains("pipeline"))
        pipeline = root.at("pipeline").get<std::vector<std::string>>();
    else
        throw std::runtime_error("config: missing pipeline (or pass a stage subcommand)");

    for (const std::string& stage : pipeline)
        if (stage != "train" && stage != "distill" && stage != "sample" && stage != "decompose")
            throw std::runtime_error("config: unknown pipeline stage " + stage);

    std::vector<std::string> artifacts;
    DatasetBundle ds;
    if (root.contains("dataset")) {
        ds = build_dataset(root.at("dataset"), seed);
        save_cloud_csv(out_dir / "dataset.csv", ds.data);
        artifacts.push_back("dataset.csv");
    }

    const bool needs_field = true;
    FieldBundle field;
    if (needs_field) {
        json root_for_field = root;
        // the "train" stage is just eager field resolution with training on
        const bool train_stage =
            std::find(pipeline.begin(), pipeline.end(), "train") != pipeline.end();
        if (train_stage) {
            json fcfg = root.contains("field") ? root.at("field") : json::object();
            fcfg["kind"] = "mlp";
            fcfg["train"] = true;
            root_for_field["field"] = fcfg;
        }
        field = resolve_field(root_for_field, ds, out_dir, seed, artifacts);
    }

    for (const std::string& stage : pipeline) {
        if (stage == "train") continue;  // handled by field resolution above
        if (stage == "distill") stage_distill(root, ds, field, out_dir, seed, artifacts);
        if (stage == "sample") stage_sample(root, field, out_dir, seed, artifacts);
        if (stage == "decompose") stage_decompose(root, ds, field, out_dir, seed, artifacts);
    }

    json manifest;
    manifest["version"] = kVersion;
    manifest["seed"] = seed;
    manifest["pipeline"] = pipeline;
    json cfg_copy = root;
    cfg_copy["seed"] = seed;
    manifest["config_hash"] = hash_hex(cfg_copy.dump());
    std::sort(artifacts.begin(), artifacts.end());
    manifest["artifacts"] = artifacts;
    write_text_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

json load_config(const std::filesystem::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw std::runtime_error("config: " + path.string() + ": " + e.what());
    }
}

}  // namespace

void run_experiment(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
                    std::optional<std::uint64_t> seed_override,
                    std::optional<std::string> stage_override) {
    run_experiment_json(load_config(config_path), out_dir, seed_override, stage_override);
}

void run_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override) {
    const json root = load_config(config_path);
    check_keys(root, "config", {"base", "runs"});
    if (!root.contains("runs") || !root.at("runs").is_array() || root.at("runs").empty())
        throw std::runtime_error("config: sweep needs a nonempty runs array");
    const json base = root.contains("base") ? root.at("base") : json::object();

    std::vector<json> merged;
    for (const json& run : root.at("runs")) {
        json m = base;
        m.merge_patch(run);
        merged.push_back(std::move(m));
    }

    std::vector<std::future<void>> futures;
    for (std::size_t i = 0; i < merged.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "run_%03zu", i);
        const std::filesystem::path dir = out_dir / name;
        futures.push_back(std::async(std::launch::async, [cfg = merged[i], dir, seed_override] {
            std::filesystem::create_directories(dir);
            write_text_file(dir / "merged_config.json", cfg.dump(2) + "\n");
            run_experiment_json(cfg, dir, seed_override, std::nullopt);
        }));
    }
    for (auto& f : futures) f.get();
}

}  // namespace adasde
