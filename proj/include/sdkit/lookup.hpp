#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <utility>
#include <vector>

namespace sdkit {

struct LookupPoint {
    double t = 0.0;
    double value = 0.0;

    friend bool operator==(const LookupPoint&, const LookupPoint&) = default;
};

/// Time-indexed empirical series. Points are strictly increasing in t.
/// Evaluation interpolates linearly inside the data range and holds the
/// nearest endpoint value outside it.
class LookupTable {
public:
    LookupTable() = default;
    explicit LookupTable(std::vector<LookupPoint> points) : points_(std::move(points)) {}

    const std::vector<LookupPoint>& points() const { return points_; }
    bool empty() const { return points_.empty(); }
    std::size_t size() const { return points_.size(); }

    double first_t() const { return points_.front().t; }
    double last_t() const { return points_.back().t; }

    /// True when t falls inside [first_t, last_t], i.e. no clamping is needed.
    bool covers(double t) const { return !points_.empty() && t >= first_t() && t <= last_t(); }

    /// Index of the first point violating strict monotonicity or finiteness,
    /// or size() when the table is well formed.
    std::size_t first_invalid_point() const {
        for (std::size_t i = 0; i < points_.size(); ++i) {
            if (!std::isfinite(points_[i].t) || !std::isfinite(points_[i].value)) return i;
            if (i > 0 && !(points_[i].t > points_[i - 1].t)) return i;
        }
        return points_.size();
    }

    friend bool operator==(const LookupTable&, const LookupTable&) = default;

private:
    std::vector<LookupPoint> points_;
};

/// Piecewise-linear interpolation with clamp/hold outside the data range.
/// Precondition: the table is non-empty.
inline double interpolate_lookup(const LookupTable& table, double t) {
    const auto& pts = table.points();
    if (t <= pts.front().t) return pts.front().value;
    if (t >= pts.back().t) return pts.back().value;
    auto hi = std::upper_bound(pts.begin(), pts.end(), t,
                               [](double x, const LookupPoint& p) { return x < p.t; });
    auto lo = hi - 1;
    if (t == lo->t) return lo->value;
    const double w = (t - lo->t) / (hi->t - lo->t);
    return lo->value + w * (hi->value - lo->value);
}

}  // namespace sdkit
