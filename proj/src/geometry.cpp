#include "cycletrack/geometry.hpp"

#include "cycletrack/predicates.hpp"

#include <array>

namespace cycletrack {

std::vector<Point> clip_triangle(const TrianglePoints& subject, const TrianglePoints& clip) {
    std::vector<Point> poly(subject.begin(), subject.end());
    std::vector<Point> next;
    next.reserve(9);

    for (std::size_t k = 0; k < 3 && !poly.empty(); ++k) {
        const Point e0 = clip[k];
        const Point e1 = clip[(k + 1) % 3];
        next.clear();

        Point prev = poly.back();
        int prev_side = predicates::orient2d(e0, e1, prev);
        for (const Point& cur : poly) {
            const int cur_side = predicates::orient2d(e0, e1, cur);
            if (prev_side * cur_side < 0) {
                // strictly opposite sides: emit the crossing point
                const double sp = cross(e0, e1, prev);
                const double sc = cross(e0, e1, cur);
                const double denom = sp - sc;
                double t = denom != 0.0 ? sp / denom : 0.5;
                t = std::clamp(t, 0.0, 1.0);
                next.push_back({prev.x + t * (cur.x - prev.x), prev.y + t * (cur.y - prev.y)});
            }
            if (cur_side >= 0) next.push_back(cur);
            prev = cur;
            prev_side = cur_side;
        }
        poly.swap(next);
    }
    return poly;
}

double triangle_intersection_area(const TrianglePoints& a, const TrianglePoints& b) {
    const BBox ba = bbox_of(a);
    const BBox bb = bbox_of(b);
    if (!ba.overlaps(bb)) return 0.0;

    // canonical operand order makes the result symmetric bit for bit
    const auto key = [](const TrianglePoints& t) {
        return std::array{t[0].x, t[0].y, t[1].x, t[1].y, t[2].x, t[2].y};
    };
    const bool swap = key(b) < key(a);
    const std::vector<Point> poly = swap ? clip_triangle(b, a) : clip_triangle(a, b);
    if (poly.size() < 3) return 0.0;

    const double area = polygon_area(poly);
    const double limit = std::min(polygon_area(a), polygon_area(b));
    // Slivers this thin are rounding residue of a touching contact.
    if (area <= 1e-12 * limit) return 0.0;
    return std::min(area, limit);
}

}  // namespace cycletrack
