#pragma once

#include <cstdint>

#include "adasde/score_field.hpp"
#include "adasde/types.hpp"

namespace adasde {

/// Two concentric rings (half the points each), uniform in angle, perturbed
/// by isotropic Gaussian noise. Bit-identical for a given seed.
PointCloud make_double_circle(int n_points, double r_outer = 0.8, double r_inner = 0.6,
                              double noise_sigma = 0.1, std::uint64_t seed = 0);

/// Isotropic Gaussian blob; its smoothed marginals have closed-form reverse
/// trajectories, which the solver convergence tests lean on.
PointCloud make_gaussian(int n_points, Vec2 mean, double sigma, std::uint64_t seed);

PointCloud make_gaussian_mixture(int n_points, const std::vector<Vec2>& centers,
                                 double sigma, std::uint64_t seed);

/// Exact score of the empirical data convolved with the forward kernel:
/// grad_x log( (1/K) sum_k N(x; c_k, (t^2 + base_sigma^2) I) ), evaluated with
/// log-sum-exp stabilization. Immutable after construction; safe to evaluate
/// concurrently.
class MixtureScoreOracle final : public ScoreField {
public:
    MixtureScoreOracle(PointCloud centers, double base_sigma);

    Vec2 score(const Vec2& x, double t) const override;
    double log_density(const Vec2& x, double t) const;

    /// Deterministic center subsample for solver-in-the-loop use (full K for
    /// metrics); evaluation cost is O(K) per query.
    MixtureScoreOracle subsampled(int max_centers, std::uint64_t seed) const;

    const PointCloud& centers() const { return centers_; }
    double base_sigma() const { return base_sigma_; }

    /// i.i.d. draws from the mixture the oracle scores at t = 0 (a uniformly
    /// chosen center plus N(0, base_sigma^2 I) noise).
    PointCloud sample_data(int n_points, std::uint64_t seed) const;

private:
    PointCloud centers_;
    double base_sigma_;
};

/// Deterministic subsample of a cloud to n points (seeded partial shuffle).
/// Returns the cloud unchanged when it already has <= n points.
PointCloud subsample(const PointCloud& cloud, int n, std::uint64_t seed);

}  // namespace adasde
