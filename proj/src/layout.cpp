#include "cycletrack/layout.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>
#include <tuple>

#include <json.hpp>

#include "cycletrack/error.hpp"

namespace cycletrack {

namespace {

constexpr double kCoarseScale = 1.06;
constexpr std::size_t kMaxSweeps = 8;

int clamp_channel(double v) { return static_cast<int>(std::clamp(std::lround(v), 0L, 255L)); }

std::uint32_t fnv1a(std::string_view s) {
    std::uint32_t h = 2166136261u;
    for (unsigned char c : s) {
        h ^= c;
        h *= 16777619u;
    }
    return h;
}

// Level-l nodes of each step, in graph order.
std::vector<std::vector<std::size_t>> columns_of(const TrackingGraph& g, std::size_t level) {
    std::vector<std::vector<std::size_t>> cols(g.steps);
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const TrackNode& n = g.nodes[i];
        if (n.level != level) continue;
        if (n.step >= g.steps) throw DataError("tracking graph: node step out of range: " + n.label);
        cols[n.step].push_back(i);
    }
    return cols;
}

// Level-l temporal links, bucketed by the step of their source.
std::vector<std::vector<std::size_t>> links_of(const TrackingGraph& g, std::size_t level) {
    std::vector<std::vector<std::size_t>> out(g.steps > 0 ? g.steps - 1 : 0);
    for (std::size_t i = 0; i < g.temporal_links.size(); ++i) {
        const TemporalLink& l = g.temporal_links[i];
        if (l.level != level) continue;
        const std::size_t t = g.nodes[l.from].step;
        if (t + 1 >= g.steps || g.nodes[l.to].step != t + 1) {
            throw DataError("tracking graph: temporal link between non-consecutive steps: " + l.from_label);
        }
        out[t].push_back(i);
    }
    return out;
}

class Orderer {
public:
    // `group` (per graph node, may be empty) takes precedence over barycenters.
    Orderer(const TrackingGraph& g, std::size_t level, std::vector<double> group)
        : g_(g), group_(std::move(group)), cols_(columns_of(g, level)), links_(links_of(g, level)),
          pos_(g.nodes.size(), 0) {}

    ColumnOrder run() {
        for (auto& col : cols_) {
            std::sort(col.begin(), col.end(), [&](std::size_t a, std::size_t b) {
                const TrackNode& na = g_.nodes[a];
                const TrackNode& nb = g_.nodes[b];
                return std::tuple(group(a), -na.centroid.y, na.centroid.x, na.label) <
                       std::tuple(group(b), -nb.centroid.y, nb.centroid.x, nb.label);
            });
        }
        reindex();
        ColumnOrder out;
        out.initial_crossings = crossings();
        std::size_t current = out.initial_crossings;
        for (std::size_t sweep = 0; sweep < kMaxSweeps && cols_.size() > 1; ++sweep) {
            const auto saved = cols_;
            const bool forward = sweep % 2 == 0;
            bool swapped = false;
            if (forward) {
                for (std::size_t c = 1; c < cols_.size(); ++c) swapped |= reorder(c, c - 1);
            } else {
                for (std::size_t c = cols_.size() - 1; c-- > 0;) swapped |= reorder(c, c + 1);
            }
            ++out.sweeps;
            if (!swapped) break;
            const std::size_t next = crossings();
            if (next > current) {
                cols_ = saved;
                reindex();
            } else {
                current = next;
            }
        }
        out.final_crossings = current;
        out.columns = cols_;
        return out;
    }

private:
    double group(std::size_t node) const { return group_.empty() ? 0.0 : group_[node]; }

    void reindex() {
        for (const auto& col : cols_) {
            for (std::size_t p = 0; p < col.size(); ++p) pos_[col[p]] = p;
        }
    }

    double normalized(std::size_t node) const {
        const std::size_t size = cols_[g_.nodes[node].step].size();
        return (static_cast<double>(pos_[node]) + 0.5) / static_cast<double>(size);
    }

    // Reorders column c by barycenters against neighbour column n.
    bool reorder(std::size_t c, std::size_t n) {
        std::vector<double> sum_w(g_.nodes.size(), 0.0);
        std::vector<double> sum_wx(g_.nodes.size(), 0.0);
        const std::size_t pair = std::min(c, n);
        for (std::size_t li : links_[pair]) {
            const TemporalLink& l = g_.temporal_links[li];
            const std::size_t mine = c < n ? l.from : l.to;
            const std::size_t other = c < n ? l.to : l.from;
            sum_w[mine] += l.raw_overlap;
            sum_wx[mine] += l.raw_overlap * normalized(other);
        }
        auto& col = cols_[c];
        std::vector<std::pair<double, double>> key(g_.nodes.size());
        for (std::size_t node : col) {
            const double bary = sum_w[node] > 0.0 ? sum_wx[node] / sum_w[node] : normalized(node);
            key[node] = {group(node), bary};
        }
        const auto before = col;
        std::stable_sort(col.begin(), col.end(), [&](std::size_t a, std::size_t b) { return key[a] < key[b]; });
        for (std::size_t p = 0; p < col.size(); ++p) pos_[col[p]] = p;
        return col != before;
    }

    std::size_t crossings() const {
        std::size_t total = 0;
        std::vector<std::pair<std::size_t, std::size_t>> ranks;
        for (const auto& pair : links_) {
            ranks.clear();
            for (std::size_t li : pair) {
                const TemporalLink& l = g_.temporal_links[li];
                ranks.emplace_back(pos_[l.from], pos_[l.to]);
            }
            total += count_crossings(ranks);
        }
        return total;
    }

    const TrackingGraph& g_;
    std::vector<double> group_;
    std::vector<std::vector<std::size_t>> cols_;
    std::vector<std::vector<std::size_t>> links_;
    std::vector<std::size_t> pos_;
};

double column_center(const Canvas& canvas, std::size_t t, std::size_t columns) {
    if (columns <= 1) return canvas.width / 2.0;
    const double span = canvas.width - 2.0 * canvas.margin - canvas.node_width;
    return canvas.margin + canvas.node_width / 2.0 + span * static_cast<double>(t) / static_cast<double>(columns - 1);
}

Color node_color(const TrackingGraph& g, std::size_t node, ColorMode mode) {
    return mode == ColorMode::Spatial ? colormap2d(g.nodes[node].centroid, g.domain) : parent_color(g, node);
}

void check_level(const TrackingGraph& g, std::size_t level) {
    if (level >= g.level_count()) {
        throw DataError("unknown level " + std::to_string(level) + " (graph has " + std::to_string(g.level_count()) +
                        ")");
    }
}

// Adds the ribbons of one level. Ribbons are stacked inside each node in the
// order of the node at their other end.
void add_ribbons(LayoutGraph& lg, const TrackingGraph& g, std::size_t level, const std::vector<std::size_t>& layout_of,
                 const std::vector<std::size_t>& pos, double k, const std::vector<Color>& colors) {
    std::vector<std::size_t> ids;
    for (std::size_t i = 0; i < g.temporal_links.size(); ++i) {
        if (g.temporal_links[i].level == level) ids.push_back(i);
    }
    std::vector<double> y_from(g.temporal_links.size());
    std::vector<double> y_to(g.temporal_links.size());
    auto stack = [&](auto end_of, auto other_of, std::vector<double>& anchor) {
        std::vector<std::size_t> sorted = ids;
        std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) {
            const TemporalLink& la = g.temporal_links[a];
            const TemporalLink& lb = g.temporal_links[b];
            return std::pair(end_of(la), pos[other_of(la)]) < std::pair(end_of(lb), pos[other_of(lb)]);
        });
        std::vector<double> offset(g.nodes.size(), 0.0);
        for (std::size_t li : sorted) {
            const TemporalLink& l = g.temporal_links[li];
            const LayoutNode& n = lg.nodes[layout_of[end_of(l)]];
            const double th = l.raw_overlap * k;
            const double y = n.y0 + offset[end_of(l)] + th / 2.0;
            offset[end_of(l)] += th;
            anchor[li] = std::clamp(y, n.y0, n.y1);
        }
    };
    stack([](const TemporalLink& l) { return l.from; }, [](const TemporalLink& l) { return l.to; }, y_from);
    stack([](const TemporalLink& l) { return l.to; }, [](const TemporalLink& l) { return l.from; }, y_to);
    for (std::size_t li : ids) {
        const TemporalLink& l = g.temporal_links[li];
        const LayoutNode& a = lg.nodes[layout_of[l.from]];
        const LayoutNode& b = lg.nodes[layout_of[l.to]];
        lg.ribbons.push_back({l.from_label, l.to_label, level, a.x1, b.x0, y_from[li], y_to[li], l.raw_overlap * k,
                              colors[l.from]});
    }
}

std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.3f", v);
    std::string s = buf;
    while (!s.empty() && s.back() == '0') s.pop_back();
    if (!s.empty() && s.back() == '.') s.pop_back();
    if (s == "-0") s = "0";
    return s;
}

std::string rgb(const Color& c) {
    return "rgb(" + std::to_string(c.r) + "," + std::to_string(c.g) + "," + std::to_string(c.b) + ")";
}

std::string escape_xml(std::string_view s) {
    std::string out;
    for (char c : s) {
        switch (c) {
            case '&': out += "&amp;"; break;
            case '<': out += "&lt;"; break;
            case '>': out += "&gt;"; break;
            case '"': out += "&quot;"; break;
            default: out += c;
        }
    }
    return out;
}

}  // namespace

Color colormap2d(Point centroid, const BBox& domain, const ColormapCorners& corners) {
    if (!(domain.width() > 0.0) || !(domain.height() > 0.0)) throw DataError("colormap2d: degenerate bounding box");
    const double u = std::clamp((centroid.x - domain.xmin) / domain.width(), 0.0, 1.0);
    const double v = std::clamp((centroid.y - domain.ymin) / domain.height(), 0.0, 1.0);
    auto blend = [&](int c00, int c10, int c01, int c11) {
        return clamp_channel((1 - u) * (1 - v) * c00 + u * (1 - v) * c10 + (1 - u) * v * c01 + u * v * c11);
    };
    const auto& [a, b, c, d] = corners;
    return {blend(a.r, b.r, c.r, d.r), blend(a.g, b.g, c.g, d.g), blend(a.b, b.b, c.b, d.b)};
}

std::span<const Color> default_palette() {
    static constexpr std::array<Color, 10> kPalette{{{31, 119, 180},
                                                     {255, 127, 14},
                                                     {44, 160, 44},
                                                     {214, 39, 40},
                                                     {148, 103, 189},
                                                     {140, 86, 75},
                                                     {227, 119, 194},
                                                     {188, 189, 34},
                                                     {23, 190, 207},
                                                     {127, 127, 127}}};
    return kPalette;
}

Color parent_color(const TrackingGraph& g, std::size_t node, std::span<const Color> palette) {
    const auto& parent = g.nodes[node].parent;
    if (!parent || palette.empty()) return kNeutralGrey;
    return palette[fnv1a(g.nodes[*parent].label) % palette.size()];
}

std::size_t count_crossings(std::span<const std::pair<std::size_t, std::size_t>> links) {
    if (links.size() < 2) return 0;
    std::vector<std::pair<std::size_t, std::size_t>> sorted(links.begin(), links.end());
    std::sort(sorted.begin(), sorted.end());
    std::size_t max_b = 0;
    for (const auto& l : sorted) max_b = std::max(max_b, l.second);
    // Fenwick tree over right ranks; within equal left ranks the right ranks
    // are nondecreasing, so only strictly earlier left ranks contribute.
    std::vector<std::size_t> tree(max_b + 2, 0);
    std::size_t seen = 0;
    std::size_t total = 0;
    for (const auto& [a, b] : sorted) {
        std::size_t not_greater = 0;
        for (std::size_t i = b + 1; i > 0; i -= i & (~i + 1)) not_greater += tree[i];
        total += seen - not_greater;
        for (std::size_t i = b + 1; i < tree.size(); i += i & (~i + 1)) ++tree[i];
        ++seen;
    }
    return total;
}

ColumnOrder order_columns(const TrackingGraph& g, std::size_t level) {
    check_level(g, level);
    return Orderer(g, level, {}).run();
}

LayoutGraph sankey_layout(const TrackingGraph& g, std::size_t level, const Canvas& canvas, ColorMode mode) {
    check_level(g, level);
    const ColumnOrder order = Orderer(g, level, {}).run();

    LayoutGraph lg;
    lg.kind = "sankey";
    lg.columns = g.steps;
    lg.width = canvas.width;
    lg.height = canvas.height;

    std::vector<double> scale(g.steps, std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < g.steps; ++t) {
        const auto& col = order.columns[t];
        if (col.empty()) continue;
        double total = 0.0;
        for (std::size_t n : col) total += g.nodes[n].area;
        const double available =
            canvas.height - 2.0 * canvas.margin - canvas.gap * static_cast<double>(col.size() - 1);
        if (!(available > 0.0) || !(total > 0.0)) throw DataError("sankey layout: column " + std::to_string(t) + " does not fit the canvas");
        scale[t] = available / total;
    }
    const double k = *std::min_element(scale.begin(), scale.end());

    std::vector<Color> colors(g.nodes.size());
    std::vector<std::size_t> layout_of(g.nodes.size(), 0);
    std::vector<std::size_t> pos(g.nodes.size(), 0);
    for (std::size_t t = 0; t < g.steps; ++t) {
        const double cx = column_center(canvas, t, g.steps);
        double y = canvas.margin;
        const auto& col = order.columns[t];
        for (std::size_t p = 0; p < col.size(); ++p) {
            const std::size_t n = col[p];
            const double h = g.nodes[n].area * scale[t];
            colors[n] = node_color(g, n, mode);
            layout_of[n] = lg.nodes.size();
            pos[n] = p;
            lg.nodes.push_back({g.nodes[n].label, cx - canvas.node_width / 2.0, cx + canvas.node_width / 2.0, y, y + h,
                                colors[n], level, t});
            y += h + canvas.gap;
        }
    }
    if (!lg.nodes.empty()) add_ribbons(lg, g, level, layout_of, pos, k, colors);
    return lg;
}

LayoutGraph nested_layout(const TrackingGraph& g, const Canvas& canvas, ColorMode mode, std::size_t level) {
    if (g.level_count() < 2 || level + 1 >= g.level_count()) {
        throw DataError("nested layout needs two levels (graph has " + std::to_string(g.level_count()) + ")");
    }
    const std::size_t coarse = level + 1;
    const ColumnOrder coarse_order = Orderer(g, coarse, {}).run();
    std::vector<double> group(g.nodes.size(), 0.0);
    std::vector<std::size_t> pos(g.nodes.size(), 0);
    for (const auto& col : coarse_order.columns) {
        for (std::size_t p = 0; p < col.size(); ++p) pos[col[p]] = p;
    }
    for (std::size_t i = 0; i < g.nodes.size(); ++i) {
        const TrackNode& n = g.nodes[i];
        if (n.level != level) continue;
        if (!n.parent || g.nodes[*n.parent].level != coarse) throw DataError("nested layout: node without parent: " + n.label);
        group[i] = static_cast<double>(pos[*n.parent]);
    }
    const ColumnOrder fine_order = Orderer(g, level, std::move(group)).run();

    LayoutGraph lg;
    lg.kind = "nested";
    lg.columns = g.steps;
    lg.width = canvas.width;
    lg.height = canvas.height;

    std::vector<std::vector<std::size_t>> children(g.nodes.size());
    for (const auto& col : fine_order.columns) {
        for (std::size_t n : col) children[*g.nodes[n].parent].push_back(n);
    }

    std::vector<double> scale(g.steps, std::numeric_limits<double>::infinity());
    for (std::size_t t = 0; t < g.steps; ++t) {
        const auto& col = coarse_order.columns[t];
        if (col.empty()) continue;
        double total = 0.0;
        for (std::size_t n : fine_order.columns[t]) total += g.nodes[n].area;
        const double available =
            canvas.height - 2.0 * canvas.margin - canvas.gap * static_cast<double>(col.size() - 1);
        if (!(available > 0.0) || !(total > 0.0)) throw DataError("nested layout: column " + std::to_string(t) + " does not fit the canvas");
        scale[t] = available / (kCoarseScale * total);
    }
    const double k = *std::min_element(scale.begin(), scale.end());

    std::vector<Color> colors(g.nodes.size());
    std::vector<std::size_t> layout_of(g.nodes.size(), 0);
    std::vector<LayoutNode> fine_nodes;
    std::vector<std::size_t> fine_source;
    for (std::size_t t = 0; t < g.steps; ++t) {
        const double cx = column_center(canvas, t, g.steps);
        const double x0 = cx - canvas.node_width / 2.0;
        const double x1 = cx + canvas.node_width / 2.0;
        double y = canvas.margin;
        for (std::size_t c : coarse_order.columns[t]) {
            double inner = 0.0;
            for (std::size_t n : children[c]) inner += g.nodes[n].area * scale[t];
            const double h = inner * kCoarseScale;
            colors[c] = kCoarseRibbonGrey;
            layout_of[c] = lg.nodes.size();
            lg.nodes.push_back({g.nodes[c].label, x0, x1, y, y + h, kCoarseGrey, coarse, t});
            double fy = y + (h - inner) / 2.0;
            for (std::size_t p = 0; p < children[c].size(); ++p) {
                const std::size_t n = children[c][p];
                const double fh = g.nodes[n].area * scale[t];
                colors[n] = node_color(g, n, mode);
                fine_nodes.push_back({g.nodes[n].label, x0, x1, fy, fy + fh, colors[n], level, t});
                fine_source.push_back(n);
                fy += fh;
            }
            y += h + canvas.gap;
        }
    }
    const std::size_t coarse_count = lg.nodes.size();
    for (std::size_t t = 0; t < g.steps; ++t) {
        for (std::size_t p = 0; p < fine_order.columns[t].size(); ++p) pos[fine_order.columns[t][p]] = p;
    }
    for (std::size_t i = 0; i < fine_nodes.size(); ++i) {
        layout_of[fine_source[i]] = coarse_count + i;
        lg.nodes.push_back(std::move(fine_nodes[i]));
    }
    if (!lg.nodes.empty()) {
        add_ribbons(lg, g, coarse, layout_of, pos, k, colors);
        add_ribbons(lg, g, level, layout_of, pos, k, colors);
    }
    return lg;
}

std::string layout_to_svg(const LayoutGraph& lg) {
    std::string s = "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    s += "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" + num(lg.width) + "\" height=\"" +
         num(lg.height) + "\" viewBox=\"0 0 " + num(lg.width) + " " + num(lg.height) + "\">\n";
    std::size_t finest = std::numeric_limits<std::size_t>::max();
    for (const auto& n : lg.nodes) finest = std::min(finest, n.level);
    auto rects = [&](bool fine) {
        std::string out;
        for (const auto& n : lg.nodes) {
            if ((n.level == finest) != fine) continue;
            out += "<rect x=\"" + num(n.x0) + "\" y=\"" + num(n.y0) + "\" width=\"" + num(n.x1 - n.x0) +
                   "\" height=\"" + num(n.y1 - n.y0) + "\" fill=\"" + rgb(n.color) + "\"><title>" + escape_xml(n.id) +
                   "</title></rect>\n";
        }
        return out;
    };
    const std::string coarse = rects(false);
    if (!coarse.empty()) s += "<g class=\"coarse\">\n" + coarse + "</g>\n";
    if (!lg.ribbons.empty()) {
        s += "<g class=\"ribbons\" fill=\"none\" stroke-opacity=\"0.5\">\n";
        for (const auto& r : lg.ribbons) {
            const double mid = (r.x_from + r.x_to) / 2.0;
            s += "<path d=\"M" + num(r.x_from) + "," + num(r.y_from) + " C" + num(mid) + "," + num(r.y_from) + " " +
                 num(mid) + "," + num(r.y_to) + " " + num(r.x_to) + "," + num(r.y_to) + "\" stroke=\"" + rgb(r.color) +
                 "\" stroke-width=\"" + num(r.thickness) + "\"><title>" + escape_xml(r.from) + " -&gt; " +
                 escape_xml(r.to) + "</title></path>\n";
        }
        s += "</g>\n";
    }
    const std::string fine = rects(true);
    if (!fine.empty()) s += "<g class=\"nodes\">\n" + fine + "</g>\n";
    s += "</svg>\n";
    return s;
}

std::string layout_to_json(const LayoutGraph& lg) {
    using ordered_json = nlohmann::ordered_json;
    auto color = [](const Color& c) { return ordered_json::array({c.r, c.g, c.b}); };
    ordered_json doc;
    doc["kind"] = lg.kind;
    doc["columns"] = lg.columns;
    doc["width"] = lg.width;
    doc["height"] = lg.height;
    ordered_json nodes = ordered_json::array();
    for (const auto& n : lg.nodes) {
        nodes.push_back({{"id", n.id},
                         {"x0", n.x0},
                         {"x1", n.x1},
                         {"y0", n.y0},
                         {"y1", n.y1},
                         {"color", color(n.color)},
                         {"level", n.level},
                         {"step", n.step}});
    }
    doc["nodes"] = std::move(nodes);
    ordered_json ribbons = ordered_json::array();
    for (const auto& r : lg.ribbons) {
        ribbons.push_back({{"from", r.from},
                           {"to", r.to},
                           {"level", r.level},
                           {"x_from", r.x_from},
                           {"x_to", r.x_to},
                           {"y_from", r.y_from},
                           {"y_to", r.y_to},
                           {"thickness", r.thickness},
                           {"color", color(r.color)}});
    }
    doc["ribbons"] = std::move(ribbons);
    return doc.dump(1) + "\n";
}

LayoutGraph layout_from_json(std::string_view text) {
    using json = nlohmann::json;
    LayoutGraph lg;
    try {
        const json doc = json::parse(text);
        auto color = [](const json& j) {
            const auto c = j.get<std::array<int, 3>>();
            for (int v : c) {
                if (v < 0 || v > 255) throw DataError("layout: color channel out of range");
            }
            return Color{c[0], c[1], c[2]};
        };
        lg.kind = doc.at("kind").get<std::string>();
        lg.columns = doc.at("columns").get<std::size_t>();
        lg.width = doc.value("width", 0.0);
        lg.height = doc.value("height", 0.0);
        for (const json& n : doc.at("nodes")) {
            lg.nodes.push_back({n.at("id").get<std::string>(), n.at("x0").get<double>(), n.at("x1").get<double>(),
                                n.at("y0").get<double>(), n.at("y1").get<double>(), color(n.at("color")),
                                n.at("level").get<std::size_t>(), n.value("step", std::size_t{0})});
        }
        for (const json& r : doc.at("ribbons")) {
            lg.ribbons.push_back({r.at("from").get<std::string>(), r.at("to").get<std::string>(),
                                  r.value("level", std::size_t{0}), r.value("x_from", 0.0), r.value("x_to", 0.0),
                                  r.at("y_from").get<double>(), r.at("y_to").get<double>(),
                                  r.at("thickness").get<double>(), color(r.at("color"))});
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("layout: ") + e.what());
    }
    return lg;
}

void export_layout(const LayoutGraph& lg, std::string_view format, const std::filesystem::path& path) {
    std::string text;
    if (format == "svg") {
        text = layout_to_svg(lg);
    } else if (format == "json") {
        text = layout_to_json(lg);
    } else {
        throw DataError("unknown layout format: " + std::string(format));
    }
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw DataError("cannot write " + path.string());
    }
}

}  // namespace cycletrack
