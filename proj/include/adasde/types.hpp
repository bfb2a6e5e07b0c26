#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

namespace adasde {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    Vec2& operator*=(double s) {
        x *= s;
        y *= s;
        return *this;
    }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator*(double s, Vec2 v) { return v *= s; }
inline Vec2 operator*(Vec2 v, double s) { return v *= s; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double squared_norm(const Vec2& v) { return v.x * v.x + v.y * v.y; }
inline double norm(const Vec2& v) { return std::hypot(v.x, v.y); }

inline bool is_finite(const Vec2& v) { return std::isfinite(v.x) && std::isfinite(v.y); }

/// Empirical 2D sample set. `seed` records the generator seed when the cloud
/// was synthesized (0 for clouds loaded from disk or derived by transforms).
struct PointCloud {
    std::vector<Vec2> points;
    std::uint64_t seed = 0;

    std::size_t size() const { return points.size(); }
    bool empty() const { return points.empty(); }
};

}  // namespace adasde
