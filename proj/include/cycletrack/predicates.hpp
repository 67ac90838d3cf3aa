#pragma once

#include "cycletrack/geometry.hpp"

namespace cycletrack::predicates {

// Exact-sign geometric predicates. A floating-point filter answers the easy
// cases; anything within the filter's error bound is re-evaluated with
// floating-point expansion arithmetic, so the returned sign is always exact
// for the given double inputs.

// +1 if (a, b, c) turn counterclockwise, -1 if clockwise, 0 if collinear.
int orient2d(Point a, Point b, Point c);

// +1 if d lies strictly inside the circumcircle of counterclockwise (a, b, c),
// -1 if strictly outside, 0 if cocircular.
int incircle(Point a, Point b, Point c, Point d);

// True iff the open segments (p0, p1) and (q0, q1) cross at a single interior point.
bool segments_cross_properly(Point p0, Point p1, Point q0, Point q1);

// True iff p lies on the closed segment (a, b) but is neither endpoint.
bool on_segment_interior(Point a, Point b, Point p);

}  // namespace cycletrack::predicates
