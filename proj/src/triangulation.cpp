#include "cycletrack/triangulation.hpp"

#include <algorithm>
#include <deque>
#include <numeric>
#include <unordered_set>

#include "cycletrack/error.hpp"
#include "cycletrack/predicates.hpp"

namespace cycletrack {

namespace {

constexpr int kNone = -1;

inline int nxt(int i) { return i == 2 ? 0 : i + 1; }
inline int prv(int i) { return i == 0 ? 2 : i - 1; }

inline std::uint64_t pair_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint32_t>(b);
}

// n[i] is the neighbor across the edge opposite v[i].
struct Tri {
    std::array<int, 3> v;
    std::array<int, 3> n;
};

// Sorted-sweep triangulation with incremental Lawson legalization, constraint
// insertion by edge flips (Sloan), then a global constrained-Lawson pass.
// Hull edges are tracked as a doubly linked vertex cycle, counterclockwise.
class CdtBuilder {
public:
    explicit CdtBuilder(const ForceNetwork& net) : net_(net), pts_(net.points()) {}

    void triangulate_points();
    void insert_constraints();
    void restore_delaunay();

    const std::vector<Tri>& triangles() const { return tris_; }

private:
    Point pt(int v) const { return pts_[static_cast<std::size_t>(v)]; }
    bool constrained(int a, int b) const { return constrained_.count(pair_key(a, b)) != 0; }

    int add_tri(int a, int b, int c, int n0, int n1, int n2);
    int index_of(int t, int vertex) const;
    void replace_neighbor(int t, int old_n, int new_n);
    void relink_hull(int t);
    void flip(int t, int i);
    void legalize(int t, int i);
    void insert_on_hull(int p, int last);
    std::vector<int> triangles_around(int vertex) const;
    std::pair<int, int> find_edge(int x, int y) const;
    void insert_constraint(int a, int b);

    const ForceNetwork& net_;
    const std::vector<Point>& pts_;
    std::vector<Tri> tris_;
    std::vector<int> vertex_tri_;
    std::vector<int> hull_next_;
    std::vector<int> hull_prev_;
    std::vector<int> hull_tri_;  // triangle holding hull edge v -> hull_next_[v]
    std::unordered_set<std::uint64_t> constrained_;
};

int CdtBuilder::add_tri(int a, int b, int c, int n0, int n1, int n2) {
    const int id = static_cast<int>(tris_.size());
    tris_.push_back({{a, b, c}, {n0, n1, n2}});
    vertex_tri_[a] = vertex_tri_[b] = vertex_tri_[c] = id;
    return id;
}

int CdtBuilder::index_of(int t, int vertex) const {
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
        if (T.v[i] == vertex) return i;
    }
    throw InternalError("vertex not in triangle");
}

void CdtBuilder::replace_neighbor(int t, int old_n, int new_n) {
    if (t == kNone) return;
    for (int& n : tris_[t].n) {
        if (n == old_n) {
            n = new_n;
            return;
        }
    }
    throw InternalError("broken triangle adjacency");
}

void CdtBuilder::relink_hull(int t) {
    const Tri& T = tris_[t];
    for (int i = 0; i < 3; ++i) {
        if (T.n[i] == kNone) hull_tri_[T.v[nxt(i)]] = t;
    }
}

// Flips the edge opposite v[i] of t. Afterwards both t and its former
// neighbor have the old v[i] at index 0.
void CdtBuilder::flip(int t, int i) {
    const Tri T = tris_[t];
    const int p = T.v[i];
    const int a = T.v[nxt(i)];
    const int b = T.v[prv(i)];
    const int u = T.n[i];
    const Tri U = tris_[u];
    int j = 0;
    while (U.n[j] != t) ++j;
    const int d = U.v[j];
    const int t_a = T.n[nxt(i)];  // across (b, p)
    const int t_b = T.n[prv(i)];  // across (p, a)
    const int u_b = U.n[nxt(j)];  // across (a, d)
    const int u_a = U.n[prv(j)];  // across (d, b)

    tris_[t] = {{p, a, d}, {u_b, u, t_b}};
    tris_[u] = {{p, d, b}, {u_a, t_a, t}};
    replace_neighbor(u_b, u, t);
    replace_neighbor(t_a, t, u);
    vertex_tri_[p] = vertex_tri_[a] = vertex_tri_[d] = t;
    vertex_tri_[b] = u;
    relink_hull(t);
    relink_hull(u);
}

void CdtBuilder::legalize(int t0, int i0) {
    std::vector<std::pair<int, int>> stack{{t0, i0}};
    while (!stack.empty()) {
        const auto [t, i] = stack.back();
        stack.pop_back();
        const Tri& T = tris_[t];
        const int u = T.n[i];
        if (u == kNone || constrained(T.v[nxt(i)], T.v[prv(i)])) continue;
        const Tri& U = tris_[u];
        int j = 0;
        while (U.n[j] != t) ++j;
        if (predicates::incircle(pt(T.v[0]), pt(T.v[1]), pt(T.v[2]), pt(U.v[j])) > 0) {
            flip(t, i);
            stack.emplace_back(t, 0);
            stack.emplace_back(u, 0);
        }
    }
}

void CdtBuilder::triangulate_points() {
    const int n = static_cast<int>(pts_.size());
    if (n < 3) throw DataError("degenerate point set: fewer than 3 vertices");

    std::vector<int> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) { return pts_[a] < pts_[b]; });

    int m = 2;
    while (m < n && predicates::orient2d(pt(order[0]), pt(order[1]), pt(order[m])) == 0) ++m;
    if (m == n) throw DataError("degenerate point set: all vertices collinear");

    vertex_tri_.assign(static_cast<std::size_t>(n), kNone);
    hull_next_.assign(static_cast<std::size_t>(n), kNone);
    hull_prev_.assign(static_cast<std::size_t>(n), kNone);
    hull_tri_.assign(static_cast<std::size_t>(n), kNone);

    // Fan from the first non-collinear point over the collinear prefix.
    const int apex = order[m];
    const bool left = predicates::orient2d(pt(order[0]), pt(order[1]), pt(apex)) > 0;
    const int fan = m - 1;
    for (int i = 0; i < fan; ++i) {
        const int c0 = order[i];
        const int c1 = order[i + 1];
        const int up = i + 1 < fan ? i + 1 : kNone;
        const int down = i > 0 ? i - 1 : kNone;
        if (left) add_tri(c0, c1, apex, up, down, kNone);
        else add_tri(c1, c0, apex, down, up, kNone);
    }
    auto link = [&](int a, int b) {
        hull_next_[a] = b;
        hull_prev_[b] = a;
    };
    if (left) {
        for (int i = 0; i + 1 < m; ++i) link(order[i], order[i + 1]);
        link(order[m - 1], apex);
        link(apex, order[0]);
    } else {
        link(order[0], apex);
        link(apex, order[m - 1]);
        for (int i = m - 1; i > 0; --i) link(order[i], order[i - 1]);
    }
    for (int t = 0; t < fan; ++t) relink_hull(t);

    int last = apex;
    for (int k = m + 1; k < n; ++k) {
        insert_on_hull(order[k], last);
        last = order[k];
    }
}

// p is lexicographically beyond every inserted point, hence strictly outside the hull.
void CdtBuilder::insert_on_hull(int p, int last) {
    const Point pp = pt(p);
    auto visible = [&](int a) { return predicates::orient2d(pt(a), pt(hull_next_[a]), pp) < 0; };

    int start = last;
    int end = last;
    while (visible(hull_prev_[start]) && hull_prev_[start] != last) start = hull_prev_[start];
    while (visible(end) && hull_next_[end] != start) end = hull_next_[end];
    if (start == end) {
        int a = last;
        while (!visible(a)) {
            a = hull_next_[a];
            if (a == last) throw InternalError("point outside hull sees no hull edge");
        }
        start = a;
        end = hull_next_[a];
        while (visible(hull_prev_[start])) start = hull_prev_[start];
        while (visible(end)) end = hull_next_[end];
    }

    std::vector<int> chain;
    for (int a = start;; a = hull_next_[a]) {
        chain.push_back(a);
        if (a == end) break;
    }
    const int k = static_cast<int>(chain.size()) - 1;
    const int base = static_cast<int>(tris_.size());
    for (int i = 0; i < k; ++i) {
        const int outer = hull_tri_[chain[i]];
        const int id = add_tri(chain[i], p, chain[i + 1], i + 1 < k ? base + i + 1 : kNone, outer,
                               i > 0 ? base + i - 1 : kNone);
        Tri& O = tris_[outer];
        for (int j = 0; j < 3; ++j) {
            if (O.v[j] != chain[i] && O.v[j] != chain[i + 1]) O.n[j] = id;
        }
    }
    for (int i = 1; i < k; ++i) hull_next_[chain[i]] = hull_prev_[chain[i]] = kNone;
    hull_next_[start] = p;
    hull_prev_[p] = start;
    hull_next_[p] = end;
    hull_prev_[end] = p;
    hull_tri_[start] = base;
    hull_tri_[p] = base + k - 1;

    for (int i = 0; i < k; ++i) legalize(base + i, 1);
}

std::vector<int> CdtBuilder::triangles_around(int vertex) const {
    std::vector<int> out;
    const int first = vertex_tri_[vertex];
    int t = first;
    do {
        out.push_back(t);
        t = tris_[t].n[nxt(index_of(t, vertex))];
    } while (t != kNone && t != first);
    if (t == kNone) {
        t = tris_[first].n[prv(index_of(first, vertex))];
        while (t != kNone) {
            out.push_back(t);
            t = tris_[t].n[prv(index_of(t, vertex))];
        }
    }
    return out;
}

// Triangle holding edge (x, y) and the index of its apex opposite that edge.
std::pair<int, int> CdtBuilder::find_edge(int x, int y) const {
    for (int t : triangles_around(x)) {
        const int i = index_of(t, x);
        if (tris_[t].v[nxt(i)] == y) return {t, prv(i)};
        if (tris_[t].v[prv(i)] == y) return {t, nxt(i)};
    }
    throw InternalError("edge not found");
}

void CdtBuilder::insert_constraint(int a, int b) {
    const Point pa = pt(a);
    const Point pb = pt(b);
    auto failure = [&](const std::string& why) {
        const auto& vs = net_.vertices();
        return DataError("constraint insertion failure for edge (" + std::to_string(vs[a].id) + "," +
                         std::to_string(vs[b].id) + "): " + why);
    };

    for (int t : triangles_around(a)) {
        const Tri& T = tris_[t];
        if (T.v[0] == b || T.v[1] == b || T.v[2] == b) {
            constrained_.insert(pair_key(a, b));
            return;
        }
    }

    auto ahead = [&](int c) {
        const Point pc = pt(c);
        return (pb.x - pa.x) * (pc.x - pa.x) + (pb.y - pa.y) * (pc.y - pa.y) > 0.0;
    };

    int t = kNone;
    int right = kNone;
    int left = kNone;
    for (int cand : triangles_around(a)) {
        const int i = index_of(cand, a);
        const int c1 = tris_[cand].v[nxt(i)];
        const int c2 = tris_[cand].v[prv(i)];
        const int o1 = predicates::orient2d(pa, pb, pt(c1));
        const int o2 = predicates::orient2d(pa, pb, pt(c2));
        if ((o1 == 0 && ahead(c1)) || (o2 == 0 && ahead(c2))) throw failure("passes through a vertex");
        if (o1 < 0 && o2 > 0) {
            t = cand;
            right = c1;
            left = c2;
            break;
        }
    }
    if (t == kNone) throw failure("no triangle around the start vertex faces the segment");

    std::deque<std::pair<int, int>> crossing{{right, left}};
    for (;;) {
        const Tri& T = tris_[t];
        int i = 0;
        while (T.v[i] == right || T.v[i] == left) ++i;
        const int u = T.n[i];
        if (u == kNone) throw failure("segment leaves the hull");
        int j = 0;
        while (tris_[u].n[j] != t) ++j;
        const int d = tris_[u].v[j];
        if (d == b) break;
        const int od = predicates::orient2d(pa, pb, pt(d));
        if (od == 0) throw failure("passes through a vertex");
        if (od < 0) right = d;
        else left = d;
        crossing.emplace_back(right, left);
        t = u;
    }

    const std::size_t limit = 64 * (crossing.size() + 1) * (crossing.size() + 1) + 1024;
    std::size_t steps = 0;
    while (!crossing.empty()) {
        if (++steps > limit) throw failure("flip sequence did not converge");
        const auto [x, y] = crossing.front();
        crossing.pop_front();
        const auto [tt, i] = find_edge(x, y);
        const Tri& T = tris_[tt];
        const int p = T.v[i];
        const int e0 = T.v[nxt(i)];
        const int e1 = T.v[prv(i)];
        const int u = T.n[i];
        int j = 0;
        while (tris_[u].n[j] != tt) ++j;
        const int d = tris_[u].v[j];
        const bool convex = predicates::orient2d(pt(p), pt(e0), pt(d)) > 0 &&
                            predicates::orient2d(pt(p), pt(d), pt(e1)) > 0;
        if (!convex) {
            crossing.emplace_back(x, y);
            continue;
        }
        flip(tt, i);
        const bool shares_end = p == a || p == b || d == a || d == b;
        if (!shares_end && predicates::segments_cross_properly(pa, pb, pt(p), pt(d))) crossing.emplace_back(p, d);
    }
    constrained_.insert(pair_key(a, b));
}

void CdtBuilder::insert_constraints() {
    for (std::size_t e = 0; e < net_.edges().size(); ++e) {
        const auto [a, b] = net_.edge_indices(e);
        insert_constraint(static_cast<int>(a), static_cast<int>(b));
    }
}

void CdtBuilder::restore_delaunay() {
    bool changed = true;
    while (changed) {
        changed = false;
        for (int t = 0; t < static_cast<int>(tris_.size()); ++t) {
            for (int i = 0; i < 3; ++i) {
                const Tri& T = tris_[t];
                const int u = T.n[i];
                if (u == kNone || constrained(T.v[nxt(i)], T.v[prv(i)])) continue;
                const Tri& U = tris_[u];
                int j = 0;
                while (U.n[j] != t) ++j;
                if (predicates::incircle(pt(T.v[0]), pt(T.v[1]), pt(T.v[2]), pt(U.v[j])) > 0) {
                    flip(t, i);
                    changed = true;
                }
            }
        }
    }
}

}  // namespace

Triangulation::Triangulation(ForceNetwork base, std::vector<Triangle> triangles, std::vector<TriEdge> edges)
    : base_(std::move(base)), triangles_(std::move(triangles)), edges_(std::move(edges)) {
    const std::size_t n = triangles_.size();
    areas_.reserve(n);
    centroids_.reserve(n);
    bboxes_.reserve(n);
    vertex_triangle_.assign(base_.vertex_count(), kNoTriangle);
    for (std::size_t t = 0; t < n; ++t) {
        if (triangles_[t].id != t) throw InternalError("triangle ids must equal their position");
        const TrianglePoints c = corners(static_cast<TriangleId>(t));
        const TriangleGeometry g = triangle_geometry(c);
        areas_.push_back(g.area);
        centroids_.push_back(g.centroid);
        bboxes_.push_back(bbox_of(c));
        extent_.expand(bboxes_.back());
        for (std::uint32_t v : triangles_[t].v) {
            if (vertex_triangle_[v] == kNoTriangle) vertex_triangle_[v] = static_cast<TriangleId>(t);
        }
    }
}

TrianglePoints Triangulation::corners(TriangleId t) const {
    const auto& v = triangles_[t].v;
    return {base_.point(v[0]), base_.point(v[1]), base_.point(v[2])};
}

Triangulation constrained_delaunay(const ForceNetwork& net) {
    CdtBuilder builder(net);
    builder.triangulate_points();
    builder.insert_constraints();
    builder.restore_delaunay();

    const auto& tris = builder.triangles();
    std::vector<Triangle> triangles;
    triangles.reserve(tris.size());
    std::vector<TriEdge> edges;
    edges.reserve(tris.size() * 3 / 2 + 2);
    std::size_t force_edges = 0;
    for (std::size_t t = 0; t < tris.size(); ++t) {
        const Tri& T = tris[t];
        triangles.push_back({static_cast<TriangleId>(t),
                             {static_cast<std::uint32_t>(T.v[0]), static_cast<std::uint32_t>(T.v[1]),
                              static_cast<std::uint32_t>(T.v[2])}});
        for (int i = 0; i < 3; ++i) {
            const int u = T.n[i];
            if (u != kNone && u < static_cast<int>(t)) continue;
            const auto [lo, hi] = std::minmax(T.v[nxt(i)], T.v[prv(i)]);
            TriEdge e;
            e.a = static_cast<std::uint32_t>(lo);
            e.b = static_cast<std::uint32_t>(hi);
            if (auto f = net.force_between(static_cast<std::size_t>(lo), static_cast<std::size_t>(hi))) {
                e.is_force_edge = true;
                e.force = *f;
                ++force_edges;
            }
            e.triangles = {static_cast<TriangleId>(t), u == kNone ? kNoTriangle : static_cast<TriangleId>(u)};
            edges.push_back(e);
        }
    }
    if (force_edges != net.edges().size()) throw InternalError("a contact edge is missing from the triangulation");
    return Triangulation(net, std::move(triangles), std::move(edges));
}

DualGraph build_dual(const Triangulation& tri) {
    DualGraph g;
    g.node_count = tri.size();
    for (const TriEdge& e : tri.tri_edges()) {
        if (e.interior()) g.edges.push_back({e.triangles[0], e.triangles[1], e.force});
    }
    return g;
}

TriangleGeometry triangle_geometry(const TrianglePoints& c) {
    return {0.5 * cross(c[0], c[1], c[2]),
            {(c[0].x + c[1].x + c[2].x) / 3.0, (c[0].y + c[1].y + c[2].y) / 3.0}};
}

}  // namespace cycletrack
