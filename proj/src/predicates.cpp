#include "cycletrack/predicates.hpp"

#include <cmath>
#include <vector>

namespace cycletrack::predicates {

namespace {

// Floating-point expansions after Shewchuk: components are nonoverlapping and
// sorted by increasing magnitude, zero components eliminated.
using Expansion = std::vector<double>;

constexpr double kEps = 0x1p-53;
constexpr double kCcwErrBoundA = (3.0 + 16.0 * kEps) * kEps;
constexpr double kIccErrBoundA = (10.0 + 96.0 * kEps) * kEps;

inline void two_sum(double a, double b, double& x, double& y) {
    x = a + b;
    const double bv = x - a;
    const double av = x - bv;
    y = (a - av) + (b - bv);
}

inline void fast_two_sum(double a, double b, double& x, double& y) {
    x = a + b;
    y = b - (x - a);
}

inline void two_prod(double a, double b, double& x, double& y) {
    x = a * b;
    y = std::fma(a, b, -x);
}

Expansion from_diff(double a, double b) {
    const double x = a - b;
    const double bv = a - x;
    const double av = x + bv;
    const double y = (a - av) + (bv - b);
    Expansion e;
    if (y != 0.0) e.push_back(y);
    if (x != 0.0 || e.empty()) e.push_back(x);
    return e;
}

Expansion grow(const Expansion& e, double b) {
    Expansion h;
    h.reserve(e.size() + 1);
    double q = b;
    for (double c : e) {
        double sum = 0.0;
        double err = 0.0;
        two_sum(q, c, sum, err);
        if (err != 0.0) h.push_back(err);
        q = sum;
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

Expansion add(const Expansion& e, const Expansion& f) {
    Expansion h = e;
    for (double c : f) h = grow(h, c);
    return h;
}

Expansion negate(Expansion e) {
    for (double& c : e) c = -c;
    return e;
}

Expansion scale(const Expansion& e, double b) {
    Expansion h;
    h.reserve(2 * e.size());
    double q = 0.0;
    double err = 0.0;
    two_prod(e[0], b, q, err);
    if (err != 0.0) h.push_back(err);
    for (std::size_t i = 1; i < e.size(); ++i) {
        double hi = 0.0;
        double lo = 0.0;
        two_prod(e[i], b, hi, lo);
        double sum = 0.0;
        two_sum(q, lo, sum, err);
        if (err != 0.0) h.push_back(err);
        fast_two_sum(hi, sum, q, err);
        if (err != 0.0) h.push_back(err);
    }
    if (q != 0.0 || h.empty()) h.push_back(q);
    return h;
}

Expansion mul(const Expansion& e, const Expansion& f) {
    Expansion acc{0.0};
    for (double c : f) acc = add(acc, scale(e, c));
    return acc;
}

int sign_of(const Expansion& e) {
    for (auto it = e.rbegin(); it != e.rend(); ++it) {
        if (*it > 0.0) return 1;
        if (*it < 0.0) return -1;
    }
    return 0;
}

int orient2d_exact(Point a, Point b, Point c) {
    const Expansion acx = from_diff(a.x, c.x);
    const Expansion acy = from_diff(a.y, c.y);
    const Expansion bcx = from_diff(b.x, c.x);
    const Expansion bcy = from_diff(b.y, c.y);
    return sign_of(add(mul(acx, bcy), negate(mul(acy, bcx))));
}

int incircle_exact(Point a, Point b, Point c, Point d) {
    const Expansion adx = from_diff(a.x, d.x);
    const Expansion ady = from_diff(a.y, d.y);
    const Expansion bdx = from_diff(b.x, d.x);
    const Expansion bdy = from_diff(b.y, d.y);
    const Expansion cdx = from_diff(c.x, d.x);
    const Expansion cdy = from_diff(c.y, d.y);

    const Expansion alift = add(mul(adx, adx), mul(ady, ady));
    const Expansion blift = add(mul(bdx, bdx), mul(bdy, bdy));
    const Expansion clift = add(mul(cdx, cdx), mul(cdy, cdy));

    const Expansion bc = add(mul(bdx, cdy), negate(mul(cdx, bdy)));
    const Expansion ca = add(mul(cdx, ady), negate(mul(adx, cdy)));
    const Expansion ab = add(mul(adx, bdy), negate(mul(bdx, ady)));

    return sign_of(add(add(mul(alift, bc), mul(blift, ca)), mul(clift, ab)));
}

}  // namespace

int orient2d(Point a, Point b, Point c) {
    const double detleft = (a.x - c.x) * (b.y - c.y);
    const double detright = (a.y - c.y) * (b.x - c.x);
    const double det = detleft - detright;
    const double errbound = kCcwErrBoundA * (std::abs(detleft) + std::abs(detright));
    if (det > errbound) return 1;
    if (-det > errbound) return -1;
    return orient2d_exact(a, b, c);
}

int incircle(Point a, Point b, Point c, Point d) {
    const double adx = a.x - d.x, ady = a.y - d.y;
    const double bdx = b.x - d.x, bdy = b.y - d.y;
    const double cdx = c.x - d.x, cdy = c.y - d.y;

    const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
    const double cdxady = cdx * ady, adxcdy = adx * cdy;
    const double adxbdy = adx * bdy, bdxady = bdx * ady;
    const double alift = adx * adx + ady * ady;
    const double blift = bdx * bdx + bdy * bdy;
    const double clift = cdx * cdx + cdy * cdy;

    const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
    const double permanent = (std::abs(bdxcdy) + std::abs(cdxbdy)) * alift +
                             (std::abs(cdxady) + std::abs(adxcdy)) * blift +
                             (std::abs(adxbdy) + std::abs(bdxady)) * clift;
    const double errbound = kIccErrBoundA * permanent;
    if (det > errbound) return 1;
    if (-det > errbound) return -1;
    return incircle_exact(a, b, c, d);
}

bool segments_cross_properly(Point p0, Point p1, Point q0, Point q1) {
    const int a = orient2d(p0, p1, q0);
    const int b = orient2d(p0, p1, q1);
    if (a == 0 || b == 0 || a == b) return false;
    const int c = orient2d(q0, q1, p0);
    const int d = orient2d(q0, q1, p1);
    return c != 0 && d != 0 && c != d;
}

bool on_segment_interior(Point a, Point b, Point p) {
    if (p == a || p == b) return false;
    if (orient2d(a, b, p) != 0) return false;
    return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) &&
           std::min(a.y, b.y) <= p.y && p.y <= std::max(a.y, b.y);
}

}  // namespace cycletrack::predicates
