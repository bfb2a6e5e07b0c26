#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "adasde/schedule.hpp"
#include "adasde/score_field.hpp"
#include "adasde/solvers.hpp"

namespace adasde {

struct DistillConfig {
    TimeSchedule student;
    int m_intermediate = 3;   // interior teacher levels per student interval
    MethodSpec teacher_method{SolverKind::Dpm2};
    MethodSpec student_method{SolverKind::AdaSde};
    double learning_rate = 0.2;
    bool cosine_decay = true;
    int n_rounds = 5;
    int batch_trajectories = 2000;
    double gamma_min = 0.0;
    double gamma_max = kGammaMax;
    double fd_rel_step = 1e-3;  // central-difference step, relative per parameter
    int backtrack_max = 10;
    std::uint64_t seed = 0;
};

void validate_distill_config(const DistillConfig& cfg);

struct ThetaTable {
    std::vector<StepParams> steps;
    std::string config_hash;
    std::string field_id;
};

struct ThetaUpdateRecord {
    int round = 0;
    int step = 0;
    double loss_before = 0.0;
    double loss_after = 0.0;
    double lr = 0.0;
    int halvings = 0;
};

struct DistillResult {
    ThetaTable theta;
    std::vector<ThetaUpdateRecord> history;
    std::vector<std::string> warnings;  // e.g. gamma pinned at a bound
};

/// Refined schedule with m interior levels per student interval, interpolated
/// in the student scheme's own parameter (uniform: the warp parameter t_temp;
/// polynomial: sigma^(1/rho); logSNR: log sigma). Student levels appear
/// verbatim. m == 0 returns the student schedule unchanged.
TimeSchedule build_teacher_schedule(const TimeSchedule& student, int m);

/// Deterministic reference trajectory (no injection) recorded at all teacher
/// levels; states at student levels are extractable by index.
Trajectory run_teacher(const ScoreField& field, const TimeSchedule& teacher,
                       const PointCloud& x_init, MethodSpec method);

/// states[i] of the teacher run aligned with student level i (stride m+1).
std::vector<PointCloud> student_aligned_states(const Trajectory& teacher, int m);

/// Stagewise trajectory distillation: per round, draw a shared batch of
/// initial noise, march the student down the schedule, and at each step
/// descend the mean squared distance to the teacher state at the arrival
/// level via central finite differences with common random numbers.
/// Updates that would increase the batch loss are halved back (and finally
/// rejected), so per-batch loss never increases on an accepted update.
DistillResult optimize_theta(const ScoreField& field, const DistillConfig& cfg);

/// Mean squared student-vs-teacher endpoint distance over a fresh batch of
/// shared initial noise (the quantity Algorithm 1 drives down).
double endpoint_mse(const ScoreField& field, const DistillConfig& cfg,
                    const std::vector<StepParams>& theta, int n_eval, std::uint64_t seed);

/// CSV persistence: "n,gamma,xi,lambda,mu" rows (xi as resolved, 0 = host midpoint).
std::string theta_to_csv(const ThetaTable& table);
ThetaTable theta_from_csv(const std::string& csv);
void save_theta(const std::filesystem::path& path, const ThetaTable& table);
ThetaTable load_theta(const std::filesystem::path& path);

std::string history_to_csv(const std::vector<ThetaUpdateRecord>& history);

}  // namespace adasde
