#pragma once

#include <algorithm>
#include <array>
#include <limits>
#include <span>
#include <vector>

namespace cycletrack {

struct Point {
    double x = 0.0;
    double y = 0.0;

    friend bool operator==(const Point&, const Point&) = default;
    friend auto operator<=>(const Point&, const Point&) = default;
};

struct BBox {
    double xmin = std::numeric_limits<double>::infinity();
    double ymin = std::numeric_limits<double>::infinity();
    double xmax = -std::numeric_limits<double>::infinity();
    double ymax = -std::numeric_limits<double>::infinity();

    void expand(Point p) {
        xmin = std::min(xmin, p.x);
        ymin = std::min(ymin, p.y);
        xmax = std::max(xmax, p.x);
        ymax = std::max(ymax, p.y);
    }
    void expand(const BBox& o) {
        xmin = std::min(xmin, o.xmin);
        ymin = std::min(ymin, o.ymin);
        xmax = std::max(xmax, o.xmax);
        ymax = std::max(ymax, o.ymax);
    }
    bool empty() const { return xmin > xmax || ymin > ymax; }
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }

    // Closed-interval test; boxes that only touch count as overlapping.
    bool overlaps(const BBox& o) const {
        return xmin <= o.xmax && o.xmin <= xmax && ymin <= o.ymax && o.ymin <= ymax;
    }

    friend bool operator==(const BBox&, const BBox&) = default;
};

inline BBox bbox_of(std::span<const Point> pts) {
    BBox b;
    for (const auto& p : pts) b.expand(p);
    return b;
}

// Twice the signed area of (a, b, c), plain floating point. Use the predicates
// in predicates.hpp when only the sign matters.
inline double cross(Point a, Point b, Point c) {
    return (b.x - a.x) * (c.y - a.y) - (b.y - a.y) * (c.x - a.x);
}

// Shoelace area of a simple polygon, pivoted on the first vertex.
inline double polygon_area(std::span<const Point> poly) {
    if (poly.size() < 3) return 0.0;
    double twice = 0.0;
    for (std::size_t i = 1; i + 1 < poly.size(); ++i) twice += cross(poly[0], poly[i], poly[i + 1]);
    return 0.5 * twice;
}

using TrianglePoints = std::array<Point, 3>;

// Area of the intersection of two counterclockwise triangles.
// Clips `a` by the three half-planes of `b`; returns exactly 0 when they only touch.
double triangle_intersection_area(const TrianglePoints& a, const TrianglePoints& b);

// The clipped polygon itself (counterclockwise, possibly empty or degenerate).
std::vector<Point> clip_triangle(const TrianglePoints& subject, const TrianglePoints& clip);

}  // namespace cycletrack
