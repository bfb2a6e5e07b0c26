#include "adasde/schedule.hpp"

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <stdexcept>

#include "adasde/io.hpp"

namespace adasde {

std::string scheme_name(Scheme s) {
    switch (s) {
        case Scheme::Uniform: return "uniform";
        case Scheme::Polynomial: return "polynomial";
        case Scheme::LogSnr: return "logsnr";
    }
    return "?";
}

Scheme scheme_from_name(const std::string& name) {
    if (name == "uniform") return Scheme::Uniform;
    if (name == "polynomial") return Scheme::Polynomial;
    if (name == "logsnr") return Scheme::LogSnr;
    throw std::invalid_argument("unknown schedule scheme: " + name);
}

namespace {

void check_common(int n_steps, double sigma_max, double sigma_min) {
    if (n_steps < 1) throw std::invalid_argument("schedule: n_steps must be >= 1");
    if (!(sigma_min > 0.0) || !(sigma_min < sigma_max) || !std::isfinite(sigma_max))
        throw std::invalid_argument("schedule: need 0 < sigma_min < sigma_max");
}

void check_result(const TimeSchedule& s) {
    for (double v : s.levels)
        if (!std::isfinite(v) || !(v > 0.0))
            throw std::invalid_argument("schedule: non-finite or non-positive level");
    for (std::size_t i = 1; i < s.levels.size(); ++i)
        if (!(s.levels[i] < s.levels[i - 1]))
            throw std::invalid_argument("schedule: levels not strictly decreasing");
}

}  // namespace

UniformCoeffs uniform_coeffs(double sigma_max, double sigma_min, double eps_s) {
    const double log_max = std::log(sigma_max * sigma_max + 1.0);
    const double log_min = std::log(sigma_min * sigma_min + 1.0);
    UniformCoeffs c;
    c.beta_d = 2.0 * (log_min / eps_s - log_max) / (eps_s - 1.0);
    c.beta_min = log_max - 0.5 * c.beta_d;
    return c;
}

double uniform_sigma_of_t(double t, const UniformCoeffs& c) {
    return std::sqrt(std::expm1(0.5 * c.beta_d * t * t + c.beta_min * t));
}

double uniform_t_of_sigma(double sigma, const UniformCoeffs& c) {
    const double l = std::log(sigma * sigma + 1.0);
    return (std::sqrt(c.beta_min * c.beta_min + 2.0 * c.beta_d * l) - c.beta_min) / c.beta_d;
}

TimeSchedule build_uniform_schedule(int n_steps, double sigma_max, double sigma_min,
                                    double rho, double eps_s) {
    check_common(n_steps, sigma_max, sigma_min);
    if (!(rho > 0.0)) throw std::invalid_argument("schedule: rho must be > 0");
    if (!(eps_s > 0.0)) throw std::invalid_argument("schedule: eps_s must be > 0");

    const UniformCoeffs c = uniform_coeffs(sigma_max, sigma_min, eps_s);
    if (!std::isfinite(c.beta_d) || !std::isfinite(c.beta_min))
        throw std::invalid_argument("schedule: degenerate warp coefficients (eps_s == 1?)");

    TimeSchedule s;
    s.scheme = Scheme::Uniform;
    s.sigma_max = sigma_max;
    s.sigma_min = sigma_min;
    s.rho = rho;
    s.eps_s = eps_s;
    s.levels.resize(n_steps + 1);
    const double root = std::pow(eps_s, 1.0 / rho);
    for (int i = 0; i <= n_steps; ++i) {
        const double frac = static_cast<double>(i) / n_steps;
        const double t_temp = std::pow(1.0 + frac * (root - 1.0), rho);
        s.levels[i] = uniform_sigma_of_t(t_temp, c);
        if (!std::isfinite(s.levels[i]))
            throw std::invalid_argument("schedule: non-finite level from warp");
    }
    s.levels.back() = sigma_min;  // exact terminal level, no float drift
    check_result(s);
    return s;
}

TimeSchedule build_polynomial_schedule(int n_steps, double sigma_max, double sigma_min,
                                       double rho) {
    check_common(n_steps, sigma_max, sigma_min);
    if (!(rho > 0.0)) throw std::invalid_argument("schedule: rho must be > 0");

    TimeSchedule s;
    s.scheme = Scheme::Polynomial;
    s.sigma_max = sigma_max;
    s.sigma_min = sigma_min;
    s.rho = rho;
    s.levels.resize(n_steps + 1);
    const double hi = std::pow(sigma_max, 1.0 / rho);
    const double lo = std::pow(sigma_min, 1.0 / rho);
    for (int i = 0; i <= n_steps; ++i) {
        const double frac = static_cast<double>(i) / n_steps;
        s.levels[i] = std::pow(hi + frac * (lo - hi), rho);
    }
    s.levels.back() = sigma_min;
    check_result(s);
    return s;
}

TimeSchedule build_logsnr_schedule(int n_steps, double sigma_max, double sigma_min) {
    check_common(n_steps, sigma_max, sigma_min);

    TimeSchedule s;
    s.scheme = Scheme::LogSnr;
    s.sigma_max = sigma_max;
    s.sigma_min = sigma_min;
    s.levels.resize(n_steps + 1);
    const double log_hi = std::log(sigma_max);
    const double log_lo = std::log(sigma_min);
    for (int i = 0; i <= n_steps; ++i) {
        const double frac = static_cast<double>(i) / n_steps;
        s.levels[i] = std::exp(log_hi + frac * (log_lo - log_hi));
    }
    s.levels.back() = sigma_min;
    check_result(s);
    return s;
}

std::string schedule_to_text(const TimeSchedule& s) {
    std::string out;
    for (double v : s.levels) {
        out += format_double(v);
        out += '\n';
    }
    return out;
}

void save_schedule(const std::filesystem::path& path, const TimeSchedule& s) {
    write_text_file(path, schedule_to_text(s));
}

std::vector<double> levels_from_text(const std::string& text) {
    std::vector<double> levels;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        levels.push_back(std::strtod(line.c_str(), nullptr));
    }
    return levels;
}

}  // namespace adasde
