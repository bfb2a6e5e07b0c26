#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "adasde/dataset.hpp"
#include "adasde/schedule.hpp"
#include "adasde/score_field.hpp"
#include "adasde/solvers.hpp"

namespace adasde {

inline constexpr const char* kVersion = "0.1.0";

struct ErrorRow {
    std::string method;
    double gamma = 0.0;
    std::string theta_id;  // empty for fixed-gamma rows
    int n_steps = 0;
    double gradient_error = 0.0;
    double discretization_error = 0.0;
    double total_error = 0.0;
    std::uint64_t seed = 0;
};

struct ErrorReport {
    std::vector<ErrorRow> rows;
};

std::string report_to_csv(const ErrorReport& report);

/// Schedule recipe (scheme plus bounds) from which per-steps-count schedules
/// are built during a sweep.
struct SchedulePlan {
    Scheme scheme = Scheme::Polynomial;
    double sigma_max = 80.0;
    double sigma_min = 0.002;
    double rho = 7.0;
    double eps_s = 1e-3;
};

TimeSchedule build_schedule(const SchedulePlan& plan, int n_steps);

/// How the regenerated distribution finishes denoising after the data is
/// perturbed to t_mid:
///   Continue    - march the rest of the schedule down to sigma_min with the
///                 same stepping mode (the tail below t_mid is about a third
///                 of the trajectory at t_mid = 0.8);
///   PartialStep - integrate only partial_fraction of the first interval
///                 below t_mid and stop there.
enum class RegenMode { Continue, PartialStep };

struct DecompositionConfig {
    SchedulePlan plan;
    std::vector<int> steps{15, 20, 25, 30, 35, 40};
    std::vector<double> gammas{0.0, 0.001, 0.005, 0.01};
    HostKind host = HostKind::Heun;  // fixed-gamma SDE variant: injection around this solver
    double t_mid = 0.8;
    double partial_fraction = 1.0 / 3.0;  // PartialStep mode only
    RegenMode regen_mode = RegenMode::Continue;
    int n_eval = 2048;
    int n_proj = 128;
    bool inject_in_regen = true;  // apply the row's gamma when regenerating
    std::uint64_t seed = 0;
};

/// Fig.-2-style decomposition: for each (steps, gamma) sample the generated
/// distribution from T = sigma_max, build the regenerated distribution by
/// noising the data to t_mid and denoising per regen_mode, and measure the
/// three W1 distances:
///   gradient error       = W1(regenerated, generated)
///   discretization error = W1(regenerated, data)
///   total error          = W1(data, generated)
ErrorReport error_decomposition(const ScoreField& field, const MixtureScoreOracle& oracle,
                                const PointCloud& data, const DecompositionConfig& cfg);

/// Single-schedule variant (one steps count).
ErrorReport error_decomposition(const ScoreField& field, const MixtureScoreOracle& oracle,
                                const PointCloud& data, const TimeSchedule& schedule,
                                const std::vector<double>& gammas, double t_mid,
                                double partial_fraction, int n_eval, std::uint64_t seed);

/// The regenerated cloud for one (schedule, gamma) configuration; exposed for
/// the harness diagnostics and tests.
PointCloud regenerate(const ScoreField& field, const PointCloud& base, const TimeSchedule& schedule,
                      double gamma, HostKind host, double t_mid, double partial_fraction,
                      RegenMode mode, std::uint64_t seed, bool inject);

/// Minimal polyline SVG: one curve per labeled series.
struct PlotSeries {
    std::string label;
    std::vector<std::pair<double, double>> points;
};
std::string render_svg_plot(const std::string& title, const std::string& x_label,
                            const std::string& y_label, const std::vector<PlotSeries>& series);

/// Executes the pipeline declared in a JSON config file (train -> distill ->
/// sample -> decompose, any subset), writing CSV/SVG artifacts and a manifest
/// under out_dir. `stage_override`, when set, replaces the config pipeline.
/// Reruns with identical config and seed produce byte-identical outputs.
void run_experiment(const std::filesystem::path& config_path,
                    const std::filesystem::path& out_dir,
                    std::optional<std::uint64_t> seed_override = std::nullopt,
                    std::optional<std::string> stage_override = std::nullopt);

/// Parallel sweep: each entry of the config's "runs" array is merged over the
/// "base" object and executed in its own subdirectory.
void run_sweep(const std::filesystem::path& config_path, const std::filesystem::path& out_dir,
               std::optional<std::uint64_t> seed_override = std::nullopt);

}  // namespace adasde
