#include "adasde/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include "adasde/dataset.hpp"
#include "adasde/rng.hpp"

namespace adasde {

double w1_1d(std::span<const double> a_sorted, std::span<const double> b_sorted) {
    if (a_sorted.empty() || b_sorted.empty()) throw std::invalid_argument("w1_1d: empty input");
    if (a_sorted.size() != b_sorted.size())
        throw std::invalid_argument("w1_1d: size mismatch (equalize upstream)");
    double acc = 0.0;
    for (std::size_t i = 0; i < a_sorted.size(); ++i)
        acc += std::abs(a_sorted[i] - b_sorted[i]);
    return acc / static_cast<double>(a_sorted.size());
}

double sliced_w1(const PointCloud& a, const PointCloud& b, int n_proj, std::uint64_t seed) {
    if (a.empty() || b.empty()) throw std::invalid_argument("sliced_w1: empty cloud");
    if (n_proj < 1) throw std::invalid_argument("sliced_w1: n_proj must be >= 1");

    const std::size_t n = std::min(a.size(), b.size());
    const PointCloud& aa = a.size() == n ? a : subsample(a, static_cast<int>(n), seed);
    const PointCloud& bb = b.size() == n ? b : subsample(b, static_cast<int>(n), seed);

    // Projection directions are fixed by the seed before any dispatch.
    const RngStream dirs = fork(RngStream(seed), StreamId::Projections);
    std::vector<double> pa(n), pb(n);
    double acc = 0.0;
    for (int k = 0; k < n_proj; ++k) {
        const double th = 2.0 * std::numbers::pi * dirs.uniform(static_cast<std::uint64_t>(k));
        const Vec2 u{std::cos(th), std::sin(th)};
        for (std::size_t i = 0; i < n; ++i) pa[i] = dot(aa.points[i], u);
        for (std::size_t i = 0; i < n; ++i) pb[i] = dot(bb.points[i], u);
        std::sort(pa.begin(), pa.end());
        std::sort(pb.begin(), pb.end());
        acc += w1_1d(pa, pb);
    }
    return acc / n_proj;
}

namespace {

/// Min-cost balanced assignment via successive shortest augmenting paths with
/// dual potentials (Jonker-Volgenant style). cost is row-major n x n. Exact
/// for arbitrary nonnegative real costs; O(n^3) worst case.
std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
    std::vector<int> p(n + 1, n), way(n + 1, n);  // p[j]: row matched to column j
    for (int i = 0; i < n; ++i) {
        p[n] = i;
        int j0 = n;
        std::vector<double> minv(n + 1, inf);
        std::vector<char> used(n + 1, 0);
        do {
            used[j0] = 1;
            const int i0 = p[j0];
            double delta = inf;
            int j1 = -1;
            for (int j = 0; j < n; ++j) {
                if (used[j]) continue;
                const double cur = cost[static_cast<std::size_t>(i0) * n + j] - u[i0] - v[j];
                if (cur < minv[j]) {
                    minv[j] = cur;
                    way[j] = j0;
                }
                if (minv[j] < delta) {
                    delta = minv[j];
                    j1 = j;
                }
            }
            for (int j = 0; j <= n; ++j) {
                if (used[j]) {
                    u[p[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
        } while (p[j0] != n);
        do {
            const int j1 = way[j0];
            p[j0] = p[j1];
            j0 = j1;
        } while (j0 != n);
    }
    std::vector<int> row_to_col(n, -1);
    for (int j = 0; j < n; ++j)
        if (p[j] != n) row_to_col[p[j]] = j;
    return row_to_col;
}

}  // namespace

double exact_w1_small(const PointCloud& a, const PointCloud& b) {
    if (a.size() != b.size()) throw std::invalid_argument("exact_w1_small: size mismatch");
    if (a.empty()) throw std::invalid_argument("exact_w1_small: empty cloud");
    const int n = static_cast<int>(a.size());
    if (n > 2048) throw std::invalid_argument("exact_w1_small: n must be <= 2048");

    std::vector<double> cost(static_cast<std::size_t>(n) * n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            cost[static_cast<std::size_t>(i) * n + j] = norm(a.points[i] - b.points[j]);

    const std::vector<int> match = solve_assignment(cost, n);
    double acc = 0.0;
    for (int i = 0; i < n; ++i) acc += cost[static_cast<std::size_t>(i) * n + match[i]];
    return acc / n;
}

void validate_grid(const DensityGrid& g) {
    if (g.nx < 1 || g.ny < 1 || !(g.cell > 0.0))
        throw std::invalid_argument("grid: bad geometry");
    if (g.mass.size() != static_cast<std::size_t>(g.nx) * g.ny)
        throw std::invalid_argument("grid: mass size mismatch");
    double total = 0.0;
    for (double m : g.mass) {
        if (!std::isfinite(m) || m < 0.0) throw std::invalid_argument("grid: bad mass value");
        total += m;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw std::invalid_argument("grid: mass must sum to 1 (within 1e-9)");
}

DensityGrid histogram_grid(const PointCloud& cloud, Vec2 origin, double cell, int nx, int ny) {
    if (cloud.empty()) throw std::invalid_argument("histogram_grid: empty cloud");
    DensityGrid g;
    g.origin = origin;
    g.cell = cell;
    g.nx = nx;
    g.ny = ny;
    g.mass.assign(static_cast<std::size_t>(nx) * ny, 0.0);
    const double w = 1.0 / static_cast<double>(cloud.size());
    for (const Vec2& p : cloud.points) {
        int ix = static_cast<int>(std::floor((p.x - origin.x) / cell + 0.5));
        int iy = static_cast<int>(std::floor((p.y - origin.y) / cell + 0.5));
        ix = std::clamp(ix, 0, nx - 1);
        iy = std::clamp(iy, 0, ny - 1);
        g.at(ix, iy) += w;
    }
    return g;
}

double tv_grid(const DensityGrid& p, const DensityGrid& q) {
    if (p.nx != q.nx || p.ny != q.ny || p.cell != q.cell || p.origin.x != q.origin.x ||
        p.origin.y != q.origin.y)
        throw std::invalid_argument("tv_grid: grid geometry mismatch");
    double acc = 0.0;
    for (std::size_t i = 0; i < p.mass.size(); ++i) acc += std::abs(p.mass[i] - q.mass[i]);
    return 0.5 * acc;
}

namespace {

/// Fold an out-of-range index back into [0, n) by reflection about the
/// boundaries (..., 2, 1, 0, 0, 1, 2, ...).
int reflect_index(int i, int n) {
    if (n == 1) return 0;
    const int period = 2 * n;
    int m = i % period;
    if (m < 0) m += period;
    return m < n ? m : period - 1 - m;
}

void convolve_axis(const DensityGrid& in, const std::vector<double>& kernel, int radius,
                   bool along_x, DensityGrid& out) {
    for (int iy = 0; iy < in.ny; ++iy) {
        for (int ix = 0; ix < in.nx; ++ix) {
            double acc = 0.0;
            for (int k = -radius; k <= radius; ++k) {
                const int jx = along_x ? reflect_index(ix + k, in.nx) : ix;
                const int jy = along_x ? iy : reflect_index(iy + k, in.ny);
                acc += kernel[static_cast<std::size_t>(k + radius)] * in.at(jx, jy);
            }
            out.at(ix, iy) = acc;
        }
    }
}

}  // namespace

DensityGrid convolve_grid(const DensityGrid& p, double sigma) {
    validate_grid(p);
    if (sigma < 0.0) throw std::invalid_argument("convolve_grid: sigma must be >= 0");
    if (sigma == 0.0) return p;

    const double s_cells = sigma / p.cell;
    const int radius = std::max(1, static_cast<int>(std::ceil(4.0 * s_cells)));
    std::vector<double> kernel(static_cast<std::size_t>(2 * radius + 1));
    double ksum = 0.0;
    for (int k = -radius; k <= radius; ++k) {
        const double v = std::exp(-0.5 * (k / s_cells) * (k / s_cells));
        kernel[static_cast<std::size_t>(k + radius)] = v;
        ksum += v;
    }
    for (double& v : kernel) v /= ksum;

    DensityGrid tmp = p;
    DensityGrid out = p;
    convolve_axis(p, kernel, radius, /*along_x=*/true, tmp);
    convolve_axis(tmp, kernel, radius, /*along_x=*/false, out);

    // Reflection keeps total mass, up to float drift; renormalize it away.
    double total = 0.0;
    for (double m : out.mass) total += m;
    for (double& m : out.mass) m /= total;
    return out;
}

double gaussian_tail_q(double r) {
    return 0.5 * std::erfc(r / std::numbers::sqrt2);
}

double contraction_lambda(const ContractionQuery& q) {
    if (!(q.diameter_bound > 0.0)) throw std::invalid_argument("lambda: B must be > 0");
    if (q.t < 0.0 || !(q.delta_t > 0.0) || q.gamma < 0.0)
        throw std::invalid_argument("lambda: need t >= 0, delta_t > 0, gamma >= 0");
    const double lifted = q.t + (1.0 + q.gamma) * q.delta_t;
    const double var = lifted * lifted - q.t * q.t;
    if (!(var > 0.0)) throw std::invalid_argument("lambda: degenerate noise variance");
    return 2.0 * gaussian_tail_q(q.diameter_bound / (2.0 * std::sqrt(var)));
}

}  // namespace adasde
