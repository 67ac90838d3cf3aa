#include "cycletrack/tracking.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>

#include <json.hpp>

#include "cycletrack/error.hpp"
#include "parallel.hpp"

namespace cycletrack {

namespace {

// Uniform bucket grid over a set of boxes.
class BoxGrid {
public:
    BoxGrid(const BBox& extent, double cell, const std::vector<BBox>& boxes) : extent_(extent) {
        constexpr std::size_t kMaxCellsPerAxis = 4096;
        auto cells_along = [&](double len) {
            if (!(len > 0.0) || !(cell > 0.0)) return std::size_t{1};
            const double n = std::ceil(len / cell);
            return static_cast<std::size_t>(std::clamp(n, 1.0, static_cast<double>(kMaxCellsPerAxis)));
        };
        nx_ = cells_along(extent.width());
        ny_ = cells_along(extent.height());
        cw_ = extent.width() > 0.0 ? extent.width() / static_cast<double>(nx_) : 1.0;
        ch_ = extent.height() > 0.0 ? extent.height() / static_cast<double>(ny_) : 1.0;
        cells_.resize(nx_ * ny_);
        for (std::size_t j = 0; j < boxes.size(); ++j) {
            const auto [x0, x1, y0, y1] = range(boxes[j]);
            for (std::size_t y = y0; y <= y1; ++y) {
                for (std::size_t x = x0; x <= x1; ++x) cells_[y * nx_ + x].push_back(static_cast<TriangleId>(j));
            }
        }
    }

    // Appends every id whose cells meet `box`; ids may repeat.
    void query(const BBox& box, std::vector<TriangleId>& out) const {
        if (!box.overlaps(extent_)) return;
        const auto [x0, x1, y0, y1] = range(box);
        for (std::size_t y = y0; y <= y1; ++y) {
            for (std::size_t x = x0; x <= x1; ++x) {
                const auto& c = cells_[y * nx_ + x];
                out.insert(out.end(), c.begin(), c.end());
            }
        }
    }

private:
    std::size_t clamp_x(double x) const {
        const double i = std::floor((x - extent_.xmin) / cw_);
        return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(nx_ - 1)));
    }
    std::size_t clamp_y(double y) const {
        const double i = std::floor((y - extent_.ymin) / ch_);
        return static_cast<std::size_t>(std::clamp(i, 0.0, static_cast<double>(ny_ - 1)));
    }
    std::array<std::size_t, 4> range(const BBox& b) const {
        return {clamp_x(b.xmin), clamp_x(b.xmax), clamp_y(b.ymin), clamp_y(b.ymax)};
    }

    BBox extent_;
    std::size_t nx_ = 1;
    std::size_t ny_ = 1;
    double cw_ = 1.0;
    double ch_ = 1.0;
    std::vector<std::vector<TriangleId>> cells_;
};

double median_box_diagonal(const Triangulation& tri) {
    std::vector<double> d;
    d.reserve(tri.size());
    for (TriangleId t = 0; t < tri.size(); ++t) d.push_back(std::hypot(tri.bbox(t).width(), tri.bbox(t).height()));
    if (d.empty()) return 0.0;
    auto mid = d.begin() + static_cast<std::ptrdiff_t>(d.size() / 2);
    std::nth_element(d.begin(), mid, d.end());
    return *mid;
}

}  // namespace

std::size_t OverlapMatrix::nonzeros() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

void OverlapMatrix::set_row(TriangleId i, std::vector<Entry> entries) { rows_[i] = std::move(entries); }

double OverlapMatrix::at(TriangleId i, TriangleId j) const {
    const auto& r = rows_[i];
    auto it = std::lower_bound(r.begin(), r.end(), j, [](const Entry& e, TriangleId c) { return e.first < c; });
    return it != r.end() && it->first == j ? it->second : 0.0;
}

OverlapMatrix OverlapMatrix::transpose() const {
    std::vector<std::vector<Entry>> cols(cols_);
    for (TriangleId i = 0; i < rows_.size(); ++i) {
        for (const auto& [j, a] : rows_[i]) cols[j].emplace_back(i, a);
    }
    OverlapMatrix t(cols_, rows_.size());
    for (TriangleId j = 0; j < cols.size(); ++j) t.set_row(j, std::move(cols[j]));
    return t;
}

double triangle_overlap_area(const TrianglePoints& a, const TrianglePoints& b) {
    return triangle_intersection_area(a, b);
}

OverlapMatrix compute_overlap_matrix(const Triangulation& earlier, const Triangulation& later) {
    OverlapMatrix m(earlier.size(), later.size());
    if (earlier.size() == 0 || later.size() == 0) return m;

    std::vector<BBox> boxes;
    boxes.reserve(later.size());
    for (TriangleId j = 0; j < later.size(); ++j) boxes.push_back(later.bbox(j));
    const BoxGrid grid(later.extent(), median_box_diagonal(earlier), boxes);

    std::vector<TriangleId> candidates;
    std::vector<std::uint32_t> stamp(later.size(), 0);
    for (TriangleId i = 0; i < earlier.size(); ++i) {
        candidates.clear();
        grid.query(earlier.bbox(i), candidates);
        std::vector<OverlapMatrix::Entry> row;
        std::erase_if(candidates, [&](TriangleId j) {
            if (stamp[j] == i + 1) return true;
            stamp[j] = i + 1;
            return false;
        });
        std::sort(candidates.begin(), candidates.end());
        const TrianglePoints ci = earlier.corners(i);
        for (TriangleId j : candidates) {
            if (!earlier.bbox(i).overlaps(later.bbox(j))) continue;
            const double a = triangle_overlap_area(ci, later.corners(j));
            if (a > 0.0) row.emplace_back(j, a);
        }
        m.set_row(i, std::move(row));
    }
    return m;
}

LevelCut make_level_cut(const CycleHierarchy& h, std::span<const NodeId> nodes) {
    LevelCut cut;
    cut.segment_of_triangle.assign(h.triangle_count(), static_cast<std::size_t>(-1));
    for (std::size_t pos = 0; pos < nodes.size(); ++pos) {
        const HierarchyNode& n = h.node(nodes[pos]);
        cut.labels.push_back(n.label);
        cut.areas.push_back(n.area);
        for (TriangleId t : h.triangle_set(nodes[pos])) cut.segment_of_triangle[t] = pos;
    }
    return cut;
}

// summed clip areas can overshoot a full cover by rounding
static double coverage(double raw, double smaller) { return std::min(1.0, raw / smaller); }

RegionOverlap region_overlap(const OverlapMatrix& m, const Segment& seg_a, const Segment& seg_b) {
    const double smaller = std::min(seg_a.area, seg_b.area);
    if (!(smaller > 0.0)) throw InternalError("segment with zero area");
    double raw = 0.0;
    for (TriangleId i : seg_a.triangles) {
        for (const auto& [j, a] : m.row(i)) {
            if (std::binary_search(seg_b.triangles.begin(), seg_b.triangles.end(), j)) raw += a;
        }
    }
    return {raw, coverage(raw, smaller)};
}

std::vector<SegmentLink> leaf_temporal_links(const LevelCut& from, const LevelCut& to, const OverlapMatrix& m,
                                             double rho) {
    std::map<std::pair<std::size_t, std::size_t>, double> raw;
    for (TriangleId i = 0; i < m.rows(); ++i) {
        const std::size_t sa = from.segment_of_triangle[i];
        for (const auto& [j, a] : m.row(i)) raw[{sa, to.segment_of_triangle[j]}] += a;
    }
    std::vector<SegmentLink> out;
    for (const auto& [key, r] : raw) {
        const double smaller = std::min(from.areas[key.first], to.areas[key.second]);
        if (!(smaller > 0.0)) throw InternalError("segment with zero area");
        const double omega = coverage(r, smaller);
        if (omega > rho) out.push_back({key.first, key.second, r, omega});
    }
    return out;
}

std::vector<SegmentLink> lift_links(std::span<const SegmentLink> links, std::span<const std::size_t> up_from,
                                    std::span<const std::size_t> up_to, std::span<const double> parent_areas_from,
                                    std::span<const double> parent_areas_to) {
    std::map<std::pair<std::size_t, std::size_t>, double> raw;
    for (const SegmentLink& l : links) {
        if (l.from >= up_from.size() || l.to >= up_to.size()) throw InternalError("link endpoint without a parent");
        raw[{up_from[l.from], up_to[l.to]}] += l.raw;
    }
    std::vector<SegmentLink> out;
    out.reserve(raw.size());
    for (const auto& [key, r] : raw) {
        const double smaller = std::min(parent_areas_from[key.first], parent_areas_to[key.second]);
        out.push_back({key.first, key.second, r, coverage(r, smaller)});
    }
    return out;
}

std::optional<std::size_t> TrackingGraph::find(const std::string& label, std::size_t level) const {
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        if (nodes[i].level == level && nodes[i].label == label) return i;
    }
    return std::nullopt;
}

TrackingResult track(const TimeSeriesDataset& ds, std::span<const LevelPolicy> policies, double rho) {
    const std::size_t T = ds.steps.size();
    if (T == 0) throw DataError("empty dataset");
    if (policies.empty()) throw DataError("at least one level policy is required");
    if (!(rho >= 0.0)) throw DataError("rho must be nonnegative");
    const std::size_t k = policies.size();

    std::vector<std::optional<StepResult>> per_step(T);
    detail::parallel_for(T, [&](std::size_t t) {
        const ForceNetwork& net = ds.steps[t];
        Triangulation tri = constrained_delaunay(net);
        CycleHierarchy h = build_cycle_hierarchy(tri, build_dual(tri), t);
        std::vector<double> levels;
        for (const LevelPolicy& p : policies) levels.push_back(level_policy(net, p));
        RestrictedHierarchy r = restrict_levels(h, levels);
        per_step[t].emplace(StepResult{std::move(tri), std::move(h), std::move(r)});
    });

    TrackingResult result;
    for (auto& s : per_step) result.steps.push_back(std::move(*s));

    TrackingGraph& g = result.graph;
    g.rho = rho;
    g.steps = T;
    g.step_labels = ds.step_labels;
    std::vector<std::vector<std::vector<std::size_t>>> index(T);  // [t][level][pos] -> node index
    for (std::size_t t = 0; t < T; ++t) {
        const StepResult& s = result.steps[t];
        g.levels.push_back(s.restricted.levels);
        g.domain.expand(s.triangulation.extent());
        index[t].resize(k);
        for (std::size_t l = 0; l < k; ++l) {
            for (NodeId id : s.restricted.nodes[l]) {
                const HierarchyNode& n = s.hierarchy.node(id);
                index[t][l].push_back(g.nodes.size());
                g.nodes.push_back({n.label, t, l, n.area, n.centroid, n.rattler_count, std::nullopt});
            }
        }
        for (std::size_t l = 0; l + 1 < k; ++l) {
            for (std::size_t pos = 0; pos < index[t][l].size(); ++pos) {
                const std::size_t child = index[t][l][pos];
                const std::size_t parent = index[t][l + 1][s.restricted.up[l][pos]];
                g.nodes[child].parent = parent;
                g.hierarchy_links.push_back({child, parent});
            }
        }
    }

    // links_per_pair[t][l]: links between steps t and t+1 at level l
    std::vector<std::vector<std::vector<SegmentLink>>> links_per_pair(T > 0 ? T - 1 : 0);
    detail::parallel_for(links_per_pair.size(), [&](std::size_t t) {
        const StepResult& a = result.steps[t];
        const StepResult& b = result.steps[t + 1];
        const OverlapMatrix m = compute_overlap_matrix(a.triangulation, b.triangulation);
        const LevelCut cut_a = make_level_cut(a.hierarchy, a.restricted.nodes[0]);
        const LevelCut cut_b = make_level_cut(b.hierarchy, b.restricted.nodes[0]);
        auto& levels = links_per_pair[t];
        levels.push_back(leaf_temporal_links(cut_a, cut_b, m, rho));
        for (std::size_t l = 1; l < k; ++l) {
            auto areas = [](const StepResult& s, std::size_t level) {
                std::vector<double> out;
                for (NodeId id : s.restricted.nodes[level]) out.push_back(s.hierarchy.node(id).area);
                return out;
            };
            const std::vector<double> areas_a = areas(a, l);
            const std::vector<double> areas_b = areas(b, l);
            levels.push_back(lift_links(levels[l - 1], a.restricted.up[l - 1], b.restricted.up[l - 1], areas_a, areas_b));
        }
    });

    for (std::size_t t = 0; t < links_per_pair.size(); ++t) {
        for (std::size_t l = 0; l < k; ++l) {
            for (const SegmentLink& sl : links_per_pair[t][l]) {
                const std::size_t from = index[t][l][sl.from];
                const std::size_t to = index[t + 1][l][sl.to];
                g.temporal_links.push_back({from, to, g.nodes[from].label, g.nodes[to].label, sl.raw, sl.omega, l});
            }
        }
    }
    return result;
}

TrackingGraph build_tracking_graph(const TimeSeriesDataset& ds, std::span<const LevelPolicy> policies, double rho) {
    return track(ds, policies, rho).graph;
}

std::string tracking_graph_to_json(const TrackingGraph& g) {
    using ordered_json = nlohmann::ordered_json;
    ordered_json doc;
    ordered_json params;
    params["rho"] = g.rho;
    params["levels"] = g.levels;
    params["steps"] = g.steps;
    params["step_labels"] = g.step_labels;
    params["domain"] = {g.domain.xmin, g.domain.ymin, g.domain.xmax, g.domain.ymax};
    doc["params"] = std::move(params);

    ordered_json nodes = ordered_json::array();
    for (const TrackNode& n : g.nodes) {
        ordered_json jn;
        jn["id"] = n.label;
        jn["step"] = n.step;
        jn["level"] = n.level;
        jn["area"] = n.area;
        jn["centroid"] = {n.centroid.x, n.centroid.y};
        jn["rattlers"] = n.rattlers;
        jn["parent"] = n.parent ? ordered_json(g.nodes[*n.parent].label) : ordered_json(nullptr);
        nodes.push_back(std::move(jn));
    }
    doc["nodes"] = std::move(nodes);

    ordered_json links = ordered_json::array();
    for (const TemporalLink& l : g.temporal_links) {
        ordered_json jl;
        jl["from"] = l.from_label;
        jl["to"] = l.to_label;
        jl["level"] = l.level;
        jl["raw"] = l.raw_overlap;
        jl["omega"] = l.omega_coeff;
        links.push_back(std::move(jl));
    }
    doc["temporal_links"] = std::move(links);
    return doc.dump(1) + "\n";
}

TrackingGraph tracking_graph_from_json(std::string_view text) {
    using json = nlohmann::json;
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("tracking graph: invalid JSON: ") + e.what());
    }
    TrackingGraph g;
    try {
        const json& params = doc.at("params");
        g.rho = params.at("rho").get<double>();
        g.levels = params.at("levels").get<std::vector<std::vector<double>>>();
        g.steps = params.contains("steps") ? params["steps"].get<std::size_t>() : g.levels.size();
        if (params.contains("step_labels")) g.step_labels = params["step_labels"].get<std::vector<std::string>>();
        if (params.contains("domain")) {
            const auto d = params["domain"].get<std::vector<double>>();
            if (d.size() != 4) throw DataError("tracking graph: domain needs 4 numbers");
            g.domain = {d[0], d[1], d[2], d[3]};
        }

        std::map<std::pair<std::string, std::size_t>, std::size_t> by_key;
        std::vector<std::optional<std::string>> parent_labels;
        for (const json& jn : doc.at("nodes")) {
            TrackNode n;
            n.label = jn.at("id").get<std::string>();
            n.step = jn.at("step").get<std::size_t>();
            n.level = jn.at("level").get<std::size_t>();
            n.area = jn.at("area").get<double>();
            const auto c = jn.at("centroid").get<std::vector<double>>();
            if (c.size() != 2) throw DataError("tracking graph: centroid needs 2 numbers");
            n.centroid = {c[0], c[1]};
            n.rattlers = jn.at("rattlers").get<std::size_t>();
            const json& p = jn.at("parent");
            parent_labels.push_back(p.is_null() ? std::nullopt : std::optional(p.get<std::string>()));
            if (!by_key.emplace(std::pair(n.label, n.level), g.nodes.size()).second) {
                throw DataError("tracking graph: duplicate node " + n.label);
            }
            g.nodes.push_back(std::move(n));
        }
        if (!doc.contains("params") || !params.contains("domain")) {
            for (const TrackNode& n : g.nodes) g.domain.expand(n.centroid);
        }
        for (std::size_t i = 0; i < g.nodes.size(); ++i) {
            if (!parent_labels[i]) continue;
            auto it = by_key.find({*parent_labels[i], g.nodes[i].level + 1});
            if (it == by_key.end()) throw DataError("tracking graph: unknown parent " + *parent_labels[i]);
            g.nodes[i].parent = it->second;
            g.hierarchy_links.push_back({i, it->second});
        }
        for (const json& jl : doc.at("temporal_links")) {
            TemporalLink l;
            l.from_label = jl.at("from").get<std::string>();
            l.to_label = jl.at("to").get<std::string>();
            l.level = jl.at("level").get<std::size_t>();
            l.raw_overlap = jl.at("raw").get<double>();
            l.omega_coeff = jl.at("omega").get<double>();
            auto f = by_key.find({l.from_label, l.level});
            auto t = by_key.find({l.to_label, l.level});
            if (f == by_key.end() || t == by_key.end()) throw DataError("tracking graph: link to unknown node");
            l.from = f->second;
            l.to = t->second;
            g.temporal_links.push_back(std::move(l));
        }
    } catch (const json::exception& e) {
        throw DataError(std::string("tracking graph: schema: ") + e.what());
    }
    return g;
}

}  // namespace cycletrack
