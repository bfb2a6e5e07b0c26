#include "adasde/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "adasde/rng.hpp"

namespace adasde {

PointCloud make_double_circle(int n_points, double r_outer, double r_inner,
                              double noise_sigma, std::uint64_t seed) {
    if (n_points < 2) throw std::invalid_argument("double_circle: n_points must be >= 2");
    if (!(r_outer > 0.0) || !(r_inner > 0.0))
        throw std::invalid_argument("double_circle: radii must be > 0");
    if (noise_sigma < 0.0) throw std::invalid_argument("double_circle: noise_sigma must be >= 0");

    const RngStream stream = fork(RngStream(seed), StreamId::Dataset);
    PointCloud cloud;
    cloud.seed = seed;
    cloud.points.resize(n_points);
    const int n_outer = n_points / 2;  // first half outer, rest inner
    for (int i = 0; i < n_points; ++i) {
        const RngStream pt = stream.fork(static_cast<std::uint64_t>(i));
        const double r = i < n_outer ? r_outer : r_inner;
        const double angle = 2.0 * std::numbers::pi * pt.uniform(0);
        const auto eps = pt.normal2(1);
        cloud.points[i] = {r * std::cos(angle) + noise_sigma * eps[0],
                           r * std::sin(angle) + noise_sigma * eps[1]};
    }
    return cloud;
}

PointCloud make_gaussian(int n_points, Vec2 mean, double sigma, std::uint64_t seed) {
    if (n_points < 1) throw std::invalid_argument("gaussian: n_points must be >= 1");
    const RngStream stream = fork(RngStream(seed), StreamId::Dataset);
    PointCloud cloud;
    cloud.seed = seed;
    cloud.points.resize(n_points);
    for (int i = 0; i < n_points; ++i) {
        const auto eps = stream.fork(static_cast<std::uint64_t>(i)).normal2(0);
        cloud.points[i] = {mean.x + sigma * eps[0], mean.y + sigma * eps[1]};
    }
    return cloud;
}

PointCloud make_gaussian_mixture(int n_points, const std::vector<Vec2>& centers,
                                 double sigma, std::uint64_t seed) {
    if (centers.empty()) throw std::invalid_argument("mixture: centers must be nonempty");
    if (n_points < 1) throw std::invalid_argument("mixture: n_points must be >= 1");
    const RngStream stream = fork(RngStream(seed), StreamId::Dataset);
    PointCloud cloud;
    cloud.seed = seed;
    cloud.points.resize(n_points);
    for (int i = 0; i < n_points; ++i) {
        const RngStream pt = stream.fork(static_cast<std::uint64_t>(i));
        const auto k = static_cast<std::size_t>(pt.uniform(0) * static_cast<double>(centers.size()));
        const Vec2 c = centers[std::min(k, centers.size() - 1)];
        const auto eps = pt.normal2(1);
        cloud.points[i] = {c.x + sigma * eps[0], c.y + sigma * eps[1]};
    }
    return cloud;
}

MixtureScoreOracle::MixtureScoreOracle(PointCloud centers, double base_sigma)
    : centers_(std::move(centers)), base_sigma_(base_sigma) {
    if (centers_.empty()) throw std::invalid_argument("oracle: centers must be nonempty");
    if (base_sigma_ < 0.0) throw std::invalid_argument("oracle: base_sigma must be >= 0");
    for (const Vec2& c : centers_.points)
        if (!is_finite(c)) throw std::invalid_argument("oracle: non-finite center");
}

Vec2 MixtureScoreOracle::score(const Vec2& x, double t) const {
    const double var = t * t + base_sigma_ * base_sigma_;

    // Pass 1: max exponent for log-sum-exp; pass 2: softmax-weighted mean center.
    double max_e = -std::numeric_limits<double>::infinity();
    for (const Vec2& c : centers_.points) {
        const double e = -squared_norm(x - c) / (2.0 * var);
        if (e > max_e) max_e = e;
    }
    double wsum = 0.0;
    Vec2 mean{0.0, 0.0};
    for (const Vec2& c : centers_.points) {
        const double w = std::exp(-squared_norm(x - c) / (2.0 * var) - max_e);
        wsum += w;
        mean += w * c;
    }
    mean *= 1.0 / wsum;
    return (1.0 / var) * (mean - x);
}

double MixtureScoreOracle::log_density(const Vec2& x, double t) const {
    const double var = t * t + base_sigma_ * base_sigma_;
    double max_e = -std::numeric_limits<double>::infinity();
    for (const Vec2& c : centers_.points) {
        const double e = -squared_norm(x - c) / (2.0 * var);
        if (e > max_e) max_e = e;
    }
    double acc = 0.0;
    for (const Vec2& c : centers_.points)
        acc += std::exp(-squared_norm(x - c) / (2.0 * var) - max_e);
    return max_e + std::log(acc) - std::log(static_cast<double>(centers_.size())) -
           std::log(2.0 * std::numbers::pi * var);
}

MixtureScoreOracle MixtureScoreOracle::subsampled(int max_centers, std::uint64_t seed) const {
    return {subsample(centers_, max_centers, seed), base_sigma_};
}

PointCloud MixtureScoreOracle::sample_data(int n_points, std::uint64_t seed) const {
    return make_gaussian_mixture(n_points, centers_.points, base_sigma_, seed);
}

PointCloud subsample(const PointCloud& cloud, int n, std::uint64_t seed) {
    if (n < 1) throw std::invalid_argument("subsample: n must be >= 1");
    const std::size_t keep = static_cast<std::size_t>(n);
    if (cloud.size() <= keep) return cloud;

    // Partial Fisher-Yates over an index array; draws keyed off the seed.
    std::vector<std::size_t> idx(cloud.size());
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    const RngStream stream = fork(RngStream(seed), StreamId::Subsample);
    for (std::size_t i = 0; i < keep; ++i) {
        const std::size_t span = idx.size() - i;
        const auto j = i + std::min<std::size_t>(
                               static_cast<std::size_t>(stream.uniform(i) * static_cast<double>(span)),
                               span - 1);
        std::swap(idx[i], idx[j]);
    }
    PointCloud out;
    out.seed = cloud.seed;
    out.points.resize(keep);
    for (std::size_t i = 0; i < keep; ++i) out.points[i] = cloud.points[idx[i]];
    return out;
}

}  // namespace adasde
