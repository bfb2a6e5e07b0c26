#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "adasde/types.hpp"

namespace adasde {

/// Exact W1 between equal-size 1D empirical measures: mean absolute
/// difference of order statistics. Inputs must already be sorted ascending.
double w1_1d(std::span<const double> a_sorted, std::span<const double> b_sorted);

/// Average over n_proj seeded random unit directions of the 1D W1 of the
/// projections. Clouds of unequal size are deterministically subsampled to
/// the smaller size first. Lower-bounds the true 2D W1.
double sliced_w1(const PointCloud& a, const PointCloud& b, int n_proj, std::uint64_t seed);

/// Exact W1 for small equal-size clouds (n <= 2048): balanced assignment with
/// Euclidean costs via shortest augmenting paths; returns mean matched distance.
double exact_w1_small(const PointCloud& a, const PointCloud& b);

/// Gridded probability mass on a regular 2D lattice. origin is the center of
/// cell (0,0); masses are row-major (iy * nx + ix), nonnegative, summing to 1.
struct DensityGrid {
    Vec2 origin{0.0, 0.0};
    double cell = 1.0;
    int nx = 0;
    int ny = 0;
    std::vector<double> mass;

    double& at(int ix, int iy) { return mass[static_cast<std::size_t>(iy) * nx + ix]; }
    double at(int ix, int iy) const { return mass[static_cast<std::size_t>(iy) * nx + ix]; }
};

void validate_grid(const DensityGrid& g);

/// Histogram of a cloud on the given lattice (out-of-range points clipped to
/// the border cells), normalized to total mass 1.
DensityGrid histogram_grid(const PointCloud& cloud, Vec2 origin, double cell, int nx, int ny);

/// Half the L1 mass difference between two grids of identical geometry.
double tv_grid(const DensityGrid& p, const DensityGrid& q);

/// Separable convolution with a truncated (+-4 sigma), renormalized Gaussian
/// kernel; boundaries fold back (reflection), so each source cell's mass is
/// fully redistributed and the operator is mass-preserving. sigma in the
/// grid's world units; sigma = 0 returns the input unchanged.
DensityGrid convolve_grid(const DensityGrid& p, double sigma);

/// Upper tail of the standard normal, Q(r) = Pr(a >= r).
double gaussian_tail_q(double r);

struct ContractionQuery {
    double diameter_bound = 1.0;  // B > 0
    double t = 0.0;
    double delta_t = 1.0;
    double gamma = 0.0;
};

/// lambda(gamma) = 2 Q( B / (2 sqrt((t + (1+gamma) dt)^2 - t^2)) ).
double contraction_lambda(const ContractionQuery& q);

}  // namespace adasde
