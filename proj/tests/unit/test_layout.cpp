#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <random>
#include <regex>
#include <string_view>

#include "cycletrack/error.hpp"
#include "cycletrack/layout.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace cycletrack;

namespace {

const std::vector<LevelPolicy> kFineMedian{LevelPolicy::fine(), LevelPolicy::median()};

TrackingGraph n1_graph() {
    TimeSeriesDataset ds;
    ds.steps = {oracle::n1_network(), oracle::n1_network()};
    ds.step_labels = {"a", "b"};
    return build_tracking_graph(ds, kFineMedian, 0.0);
}

TrackingGraph synthetic_graph(std::uint64_t seed, int size = 9, int steps = 4) {
    SyntheticSpec spec = parse_synthetic_spec("grid=" + std::to_string(size) + "x" + std::to_string(size) +
                                              ",steps=" + std::to_string(steps));
    spec.seed = seed;
    return build_tracking_graph(generate_synthetic(spec), kFineMedian, 0.0);
}

// Hand-built single-level graph.
struct GraphBuilder {
    TrackingGraph g;
    explicit GraphBuilder(std::size_t steps) {
        g.steps = steps;
        g.levels.assign(steps, {0.0});
        g.domain = BBox{0, 0, 10, 10};
    }
    std::size_t node(std::size_t step, const std::string& label, double area, Point c) {
        g.nodes.push_back({label, step, 0, area, c, 0, std::nullopt});
        return g.nodes.size() - 1;
    }
    void link(std::size_t a, std::size_t b, double raw) {
        g.temporal_links.push_back({a, b, g.nodes[a].label, g.nodes[b].label, raw, 1.0, 0});
    }
};

std::size_t crossings_brute(const std::vector<std::pair<std::size_t, std::size_t>>& links) {
    std::size_t n = 0;
    for (std::size_t i = 0; i < links.size(); ++i) {
        for (std::size_t j = i + 1; j < links.size(); ++j) {
            const long da = static_cast<long>(links[i].first) - static_cast<long>(links[j].first);
            const long db = static_cast<long>(links[i].second) - static_cast<long>(links[j].second);
            if (da * db < 0) ++n;
        }
    }
    return n;
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

void check_layout_invariants(const LayoutGraph& lg, const TrackingGraph& g) {
    std::map<std::pair<std::size_t, std::size_t>, std::vector<const LayoutNode*>> columns;
    std::map<std::pair<std::string, std::size_t>, const LayoutNode*> by_id;
    for (const auto& n : lg.nodes) {
        CHECK(n.y1 > n.y0);
        CHECK(n.color.r >= 0);
        CHECK(n.color.r <= 255);
        columns[{n.step, n.level}].push_back(&n);
        by_id[{n.id, n.level}] = &n;
    }
    for (auto& [key, nodes] : columns) {
        std::sort(nodes.begin(), nodes.end(), [](auto* a, auto* b) { return a->y0 < b->y0; });
        for (std::size_t i = 1; i < nodes.size(); ++i) CHECK(nodes[i - 1]->y1 <= nodes[i]->y0 + 1e-9);
        for (const auto* n : nodes) {
            CHECK(n->x0 == nodes.front()->x0);
            CHECK(n->x1 == nodes.front()->x1);
        }
    }
    for (const auto& r : lg.ribbons) {
        const LayoutNode* a = by_id.at({r.from, r.level});
        const LayoutNode* b = by_id.at({r.to, r.level});
        CHECK(r.y_from >= a->y0);
        CHECK(r.y_from <= a->y1);
        CHECK(r.y_to >= b->y0);
        CHECK(r.y_to <= b->y1);
        CHECK(r.thickness > 0.0);
        CHECK(b->step == a->step + 1);
    }
    // ribbon thickness is one constant times raw overlap
    double k = -1.0;
    for (const auto& r : lg.ribbons) {
        for (const auto& l : g.temporal_links) {
            if (l.from_label == r.from && l.to_label == r.to && l.level == r.level) {
                if (k < 0) k = r.thickness / l.raw_overlap;
                CHECK(r.thickness == doctest::Approx(k * l.raw_overlap).epsilon(1e-12));
            }
        }
    }
}

}  // namespace

TEST_SUITE("layout") {

TEST_CASE("colormap corners, centre and clamping") {
    const BBox box{2, 3, 6, 5};
    const ColormapCorners c;
    CHECK(colormap2d({2, 3}, box) == c.c00);
    CHECK(colormap2d({6, 3}, box) == c.c10);
    CHECK(colormap2d({2, 5}, box) == c.c01);
    CHECK(colormap2d({6, 5}, box) == c.c11);
    CHECK(colormap2d({-100, -100}, box) == c.c00);
    CHECK(colormap2d({100, 100}, box) == c.c11);
    const Color mid = colormap2d({4, 4}, box);
    CHECK(mid.r == static_cast<int>(std::lround((0 + 220 + 40 + 230) / 4.0)));
    CHECK(mid.g == static_cast<int>(std::lround((80 + 60 + 160 + 200) / 4.0)));
    CHECK(mid.b == static_cast<int>(std::lround((160 + 40 + 60 + 40) / 4.0)));
    const ColormapCorners custom{{1, 2, 3}, {4, 5, 6}, {7, 8, 9}, {10, 11, 12}};
    CHECK(colormap2d({6, 5}, box, custom) == Color{10, 11, 12});
    CHECK_THROWS_AS(colormap2d({0, 0}, BBox{0, 0, 0, 1}), DataError);
    CHECK_THROWS_AS(colormap2d({0, 0}, BBox{}), DataError);
}

TEST_CASE("colormap is Lipschitz in the centroid") {
    // On a square box a step of 1% of the diagonal moves u + v by at most 0.02,
    // and each channel changes by at most its corner range per unit of u + v.
    const BBox box{-1, 2, 3, 6};
    const ColormapCorners c;
    auto range = [](int a, int b, int cc, int d) { return std::max({a, b, cc, d}) - std::min({a, b, cc, d}); };
    const int bound[3] = {static_cast<int>(std::ceil(0.02 * range(c.c00.r, c.c10.r, c.c01.r, c.c11.r))),
                          static_cast<int>(std::ceil(0.02 * range(c.c00.g, c.c10.g, c.c01.g, c.c11.g))),
                          static_cast<int>(std::ceil(0.02 * range(c.c00.b, c.c10.b, c.c01.b, c.c11.b)))};
    const double diag = std::hypot(box.width(), box.height());
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-0.2, 1.2), ang(0, 2 * M_PI), len(0, 0.01);
    for (int i = 0; i < 20000; ++i) {
        const Point p{box.xmin + u(rng) * box.width(), box.ymin + u(rng) * box.height()};
        const double a = ang(rng), l = len(rng) * diag;
        const Point q{p.x + l * std::cos(a), p.y + l * std::sin(a)};
        const Color cp = colormap2d(p, box), cq = colormap2d(q, box);
        CHECK(std::abs(cp.r - cq.r) <= bound[0]);
        CHECK(std::abs(cp.g - cq.g) <= bound[1]);
        CHECK(std::abs(cp.b - cq.b) <= bound[2]);
    }
}

TEST_CASE("parent colours") {
    const TrackingGraph g = n1_graph();
    std::vector<std::size_t> fine, coarse;
    for (std::size_t i = 0; i < g.nodes.size(); ++i) (g.nodes[i].level == 0 ? fine : coarse).push_back(i);
    CHECK(parent_color(g, fine[0]) == parent_color(g, fine[1]));
    CHECK(parent_color(g, coarse[0]) == kNeutralGrey);
    CHECK(parent_color(g, fine[0]) == parent_color(n1_graph(), fine[0]));

    GraphBuilder b(1);
    const auto p1 = b.node(0, "p:1", 1, {1, 1});
    const auto p2 = b.node(0, "p:2", 1, {2, 2});
    const auto c1 = b.node(0, "c:1", 1, {1, 1});
    const auto c2 = b.node(0, "c:2", 1, {2, 2});
    b.g.nodes[c1].parent = p1;
    b.g.nodes[c2].parent = p2;
    const auto palette = default_palette();
    // FNV-1a of the two labels lands in different palette slots for this palette size.
    CHECK(parent_color(b.g, c1) != parent_color(b.g, c2));
    const auto fnv = [](std::string_view s) {
        std::uint32_t h = 2166136261u;
        for (unsigned char ch : s) h = (h ^ ch) * 16777619u;
        return h;
    };
    CHECK(parent_color(b.g, c1) == palette[fnv("p:1") % palette.size()]);
}

TEST_CASE("crossing counter matches a quadratic count") {
    std::mt19937_64 rng(7);
    for (int trial = 0; trial < 300; ++trial) {
        std::vector<std::pair<std::size_t, std::size_t>> links;
        const std::size_t n = rng() % 40;
        for (std::size_t i = 0; i < n; ++i) links.emplace_back(rng() % 8, rng() % 8);
        CHECK(count_crossings(links) == crossings_brute(links));
    }
}

TEST_CASE("one node per step fills the column") {
    GraphBuilder b(3);
    const auto a = b.node(0, "a", 2.0, {1, 1});
    const auto c = b.node(1, "b", 3.0, {1, 1});
    const auto d = b.node(2, "c", 1.0, {1, 1});
    b.link(a, c, 1.0);
    b.link(c, d, 1.0);
    const Canvas canvas;
    const LayoutGraph lg = sankey_layout(b.g, 0, canvas);
    REQUIRE(lg.nodes.size() == 3);
    for (const auto& n : lg.nodes) {
        CHECK(n.y0 == canvas.margin);
        CHECK(n.y1 == doctest::Approx(canvas.height - canvas.margin).epsilon(1e-12));
        CHECK((n.y0 + n.y1) / 2 == doctest::Approx(canvas.height / 2).epsilon(1e-12));
    }
    CHECK(lg.nodes[0].x0 < lg.nodes[1].x0);
    CHECK(lg.nodes[1].x0 - lg.nodes[0].x0 == doctest::Approx(lg.nodes[2].x0 - lg.nodes[1].x0));
    CHECK_THROWS_AS(sankey_layout(b.g, 1, canvas), DataError);
}

TEST_CASE("parallel tracks never cross, even from a crossing start") {
    GraphBuilder b(4);
    std::vector<std::size_t> top, bottom;
    for (std::size_t t = 0; t < 4; ++t) {
        // Centroids swap vertically on odd steps so the initial order crosses.
        const bool flip = t % 2 == 1;
        top.push_back(b.node(t, "top" + std::to_string(t), 1.0, {1, flip ? 1.0 : 9.0}));
        bottom.push_back(b.node(t, "bot" + std::to_string(t), 1.0, {1, flip ? 9.0 : 1.0}));
    }
    for (std::size_t t = 0; t + 1 < 4; ++t) {
        b.link(top[t], top[t + 1], 1.0);
        b.link(bottom[t], bottom[t + 1], 1.0);
    }
    const ColumnOrder order = order_columns(b.g, 0);
    CHECK(order.initial_crossings == 3);
    CHECK(order.final_crossings == 0);
    CHECK(order.sweeps <= 8);
    const LayoutGraph lg = sankey_layout(b.g, 0);
    check_layout_invariants(lg, b.g);
}

TEST_CASE("identical steps give straight ribbons") {
    TimeSeriesDataset ds;
    const auto base = generate_synthetic(parse_synthetic_spec("grid=8x8,steps=1,seed=5"));
    for (int t = 0; t < 4; ++t) ds.steps.push_back(base.steps[0]);
    ds.step_labels = {"a", "b", "c", "d"};
    const TrackingGraph g = build_tracking_graph(ds, kFineMedian, 0.0);
    const LayoutGraph lg = sankey_layout(g, 0);
    for (const auto& r : lg.ribbons) CHECK(r.y_from == doctest::Approx(r.y_to).epsilon(1e-12));
    const ColumnOrder order = order_columns(g, 0);
    CHECK(order.final_crossings == 0);
}

TEST_CASE("sankey invariants on synthetic series") {
    for (std::uint64_t seed = 0; seed < 6; ++seed) {
        const TrackingGraph g = synthetic_graph(seed);
        for (std::size_t level = 0; level < 2; ++level) {
            const ColumnOrder order = order_columns(g, level);
            CHECK(order.final_crossings <= order.initial_crossings);
            CHECK(order.sweeps <= 8);
            const Canvas canvas;
            const LayoutGraph lg = sankey_layout(g, level, canvas);
            check_layout_invariants(lg, g);
            std::map<std::size_t, double> total_h, total_a;
            std::map<std::string, double> area;
            for (const auto& n : g.nodes) {
                if (n.level == level) area[n.label] = n.area;
            }
            for (const auto& n : lg.nodes) {
                total_h[n.step] += n.y1 - n.y0;
                total_a[n.step] += area[n.id];
            }
            for (const auto& n : lg.nodes) {
                CHECK(std::abs((n.y1 - n.y0) / total_h[n.step] - area[n.id] / total_a[n.step]) <= 1e-6);
            }
            // the final order is the drawn order
            for (std::size_t t = 0; t < order.columns.size(); ++t) {
                double y = -1;
                for (std::size_t node : order.columns[t]) {
                    const auto it = std::find_if(lg.nodes.begin(), lg.nodes.end(), [&](const LayoutNode& n) {
                        return n.id == g.nodes[node].label && n.level == level;
                    });
                    REQUIRE(it != lg.nodes.end());
                    CHECK(it->y0 > y);
                    y = it->y0;
                }
            }
        }
    }
}

TEST_CASE("labels do not influence spatial colours") {
    TrackingGraph g = synthetic_graph(3, 7, 3);
    const LayoutGraph before = sankey_layout(g, 0);
    std::map<std::string, Color> colors;
    for (const auto& n : before.nodes) colors[n.id] = n.color;
    for (auto& n : g.nodes) n.label = "renamed-" + n.label;
    for (auto& l : g.temporal_links) {
        l.from_label = "renamed-" + l.from_label;
        l.to_label = "renamed-" + l.to_label;
    }
    const LayoutGraph after = sankey_layout(g, 0);
    for (const auto& n : after.nodes) CHECK(colors.at(n.id.substr(8)) == n.color);
}

TEST_CASE("nested layout") {
    const TrackingGraph g = n1_graph();
    const LayoutGraph lg = nested_layout(g);
    CHECK(lg.kind == "nested");
    std::size_t coarse = 0, fine = 0, grey_ribbons = 0;
    for (const auto& n : lg.nodes) (n.level == 1 ? coarse : fine)++;
    CHECK(coarse == 2);
    CHECK(fine == 4);
    for (const auto& r : lg.ribbons) grey_ribbons += r.level == 1 && r.color == kCoarseRibbonGrey;
    CHECK(grey_ribbons == 1);
    for (const auto& n : lg.nodes) {
        if (n.level == 1) {
            CHECK(n.color == kCoarseGrey);
            CHECK(n.y0 == 20.0);
            CHECK(n.y1 == doctest::Approx(580.0).epsilon(1e-12));
        }
    }

    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const TrackingGraph sg = synthetic_graph(seed);
        const LayoutGraph nl = nested_layout(sg);
        check_layout_invariants(nl, sg);
        std::map<std::pair<std::string, std::size_t>, const LayoutNode*> by_id;
        for (const auto& n : nl.nodes) by_id[{n.id, n.level}] = &n;
        std::map<std::string, double> child_heights;
        for (const auto& n : sg.nodes) {
            if (n.level != 0) continue;
            const LayoutNode* c = by_id.at({n.label, 0});
            const LayoutNode* p = by_id.at({sg.nodes[*n.parent].label, 1});
            CHECK(c->y0 >= p->y0 - 1e-9);
            CHECK(c->y1 <= p->y1 + 1e-9);
            CHECK(c->step == p->step);
            child_heights[p->id] += c->y1 - c->y0;
        }
        for (const auto& n : nl.nodes) {
            if (n.level == 1) CHECK(n.y1 - n.y0 == doctest::Approx(1.06 * child_heights[n.id]).epsilon(1e-9));
        }
    }

    TrackingGraph one = g;
    one.levels = {{0.0}, {0.0}};
    CHECK_THROWS_AS(nested_layout(one), DataError);
}

TEST_CASE("svg and json export") {
    LayoutGraph empty{"sankey", 0, 100, 100, {}, {}};
    const std::string svg = layout_to_svg(empty);
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(count_of(svg, "<rect") == 0);
    CHECK(count_of(svg, "<path") == 0);

    const TrackingGraph g = synthetic_graph(1);
    for (const LayoutGraph& lg : {sankey_layout(g, 0), nested_layout(g, Canvas{}, ColorMode::Parent)}) {
        const std::string s = layout_to_svg(lg);
        CHECK(count_of(s, "<rect") == lg.nodes.size());
        CHECK(count_of(s, "<path") == lg.ribbons.size());
        CHECK(count_of(s, " C") == lg.ribbons.size());
        CHECK(s.find("href") == std::string::npos);
        const LayoutGraph back = layout_from_json(layout_to_json(lg));
        CHECK(back == lg);
    }

    testutil::TempDir dir;
    const LayoutGraph lg = sankey_layout(g, 1);
    export_layout(lg, "svg", dir / "a.svg");
    export_layout(lg, "json", dir / "a.json");
    CHECK(testutil::slurp(dir / "a.svg") == layout_to_svg(lg));
    CHECK(layout_from_json(testutil::slurp(dir / "a.json")) == lg);
    CHECK_THROWS_AS(export_layout(lg, "png", dir / "a.png"), DataError);
    CHECK_THROWS_AS(export_layout(lg, "svg", dir / "missing" / "deeper" / "a.svg"), DataError);
}

}  // TEST_SUITE
