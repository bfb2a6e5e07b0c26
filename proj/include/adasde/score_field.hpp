#pragma once

#include <span>
#include <vector>

#include "adasde/types.hpp"

namespace adasde {

/// A drift/score source consumed by every solver: either the exact mixture
/// oracle or a trained network. drift(x,t) = -t * score(x,t) holds exactly
/// for every implementation (it is defined that way here, not overridable).
class ScoreField {
public:
    virtual ~ScoreField() = default;

    virtual Vec2 score(const Vec2& x, double t) const = 0;

    /// Batched evaluation at a common noise level; the default loops, dense
    /// implementations (the MLP) override with matrix arithmetic.
    virtual void score_batch(std::span<const Vec2> xs, double t, std::span<Vec2> out) const {
        for (std::size_t i = 0; i < xs.size(); ++i) out[i] = score(xs[i], t);
    }

    Vec2 drift(const Vec2& x, double t) const { return -t * score(x, t); }

    void drift_batch(std::span<const Vec2> xs, double t, std::span<Vec2> out) const {
        score_batch(xs, t, out);
        for (Vec2& v : out) v *= -t;
    }

    std::vector<Vec2> drift_batch(std::span<const Vec2> xs, double t) const {
        std::vector<Vec2> out(xs.size());
        drift_batch(xs, t, out);
        return out;
    }
};

}  // namespace adasde
