#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace adasde {

enum class Scheme { Uniform, Polynomial, LogSnr };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

/// Discrete noise-level schedule. An N-step schedule holds N+1 levels,
/// strictly decreasing from sigma_max (levels[0]) to sigma_min (levels[N]).
struct TimeSchedule {
    std::vector<double> levels;
    Scheme scheme = Scheme::Uniform;
    double sigma_max = 80.0;
    double sigma_min = 0.002;
    double rho = 1.0;     // Uniform / Polynomial exponent
    double eps_s = 1e-3;  // Uniform only

    int n_steps() const { return static_cast<int>(levels.size()) - 1; }
};

/// Coefficients of the time-uniform warp sigma(t) = sqrt(exp(0.5*beta_d*t^2
/// + beta_min*t) - 1), chosen so sigma(1) = sigma_max and sigma(eps_s) = sigma_min.
struct UniformCoeffs {
    double beta_d = 0.0;
    double beta_min = 0.0;
};

UniformCoeffs uniform_coeffs(double sigma_max, double sigma_min, double eps_s);
double uniform_sigma_of_t(double t, const UniformCoeffs& c);
double uniform_t_of_sigma(double sigma, const UniformCoeffs& c);

TimeSchedule build_uniform_schedule(int n_steps, double sigma_max = 80.0,
                                    double sigma_min = 0.002, double rho = 1.0,
                                    double eps_s = 1e-3);

/// level_i = (sigma_max^(1/rho) + (i/N) * (sigma_min^(1/rho) - sigma_max^(1/rho)))^rho
TimeSchedule build_polynomial_schedule(int n_steps, double sigma_max = 80.0,
                                       double sigma_min = 0.002, double rho = 7.0);

/// Levels geometric between sigma_max and sigma_min (log-uniform).
TimeSchedule build_logsnr_schedule(int n_steps, double sigma_max = 80.0,
                                   double sigma_min = 0.002);

/// Plain-text serialization: one level per line, full-precision decimal.
std::string schedule_to_text(const TimeSchedule& s);
void save_schedule(const std::filesystem::path& path, const TimeSchedule& s);
std::vector<double> levels_from_text(const std::string& text);

}  // namespace adasde
