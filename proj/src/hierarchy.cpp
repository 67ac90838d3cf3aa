#include "cycletrack/hierarchy.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <unordered_map>

#include <json.hpp>

#include "cycletrack/error.hpp"

namespace cycletrack {

namespace {

constexpr NodeId kUnset = static_cast<NodeId>(-1);

struct DisjointSets {
    explicit DisjointSets(std::size_t n) : parent(n), size(n, 1) {
        for (std::size_t i = 0; i < n; ++i) parent[i] = static_cast<std::uint32_t>(i);
    }

    std::uint32_t find(std::uint32_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }

    bool unite(std::uint32_t a, std::uint32_t b) {
        a = find(a);
        b = find(b);
        if (a == b) return false;
        if (size[a] < size[b]) std::swap(a, b);
        parent[b] = a;
        size[a] += size[b];
        return true;
    }

    std::vector<std::uint32_t> parent;
    std::vector<std::size_t> size;
};

std::string make_label(std::size_t step, NodeId id) {
    return "t" + std::to_string(step) + ":" + std::to_string(id);
}

}  // namespace

CycleHierarchy::CycleHierarchy(std::size_t step, std::vector<HierarchyNode> nodes, NodeId root,
                               std::vector<NodeId> leaf_of_triangle)
    : step_(step), nodes_(std::move(nodes)), root_(root), leaf_of_triangle_(std::move(leaf_of_triangle)) {}

std::vector<NodeId> CycleHierarchy::leaves() const {
    std::vector<NodeId> out;
    for (NodeId i = 0; i < nodes_.size(); ++i) {
        if (nodes_[i].is_leaf()) out.push_back(i);
    }
    return out;
}

std::vector<TriangleId> CycleHierarchy::triangle_set(NodeId id) const {
    std::vector<TriangleId> out;
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
        const HierarchyNode& n = nodes_[stack.back()];
        stack.pop_back();
        out.insert(out.end(), n.triangles.begin(), n.triangles.end());
        stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<VertexId> CycleHierarchy::rattlers(NodeId id) const {
    std::vector<VertexId> out;
    std::vector<NodeId> stack{id};
    while (!stack.empty()) {
        const HierarchyNode& n = nodes_[stack.back()];
        stack.pop_back();
        out.insert(out.end(), n.rattlers.begin(), n.rattlers.end());
        stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<NodeId> CycleHierarchy::segments_at_level(double alpha) const {
    if (!(alpha >= 0.0)) throw DataError("filtration level must be nonnegative");
    std::vector<NodeId> out;
    std::vector<NodeId> stack{root_};
    while (!stack.empty()) {
        const NodeId id = stack.back();
        stack.pop_back();
        const HierarchyNode& n = nodes_[id];
        if (n.merge_alpha <= alpha) out.push_back(id);
        else stack.insert(stack.end(), n.children.begin(), n.children.end());
    }
    std::sort(out.begin(), out.end());
    return out;
}

NodeId CycleHierarchy::ancestor_in(NodeId id, std::span<const NodeId> cut) const {
    for (std::optional<NodeId> cur = id; cur; cur = nodes_[*cur].parent) {
        if (std::binary_search(cut.begin(), cut.end(), *cur)) return *cur;
    }
    throw InternalError("node has no ancestor in the requested level");
}

CycleHierarchy build_cycle_hierarchy(const Triangulation& tri, const DualGraph& dual, std::size_t step) {
    const std::size_t n = dual.node_count;
    if (n != tri.size()) throw InternalError("dual graph does not match triangulation");
    DisjointSets sets(n);
    std::size_t components = n;

    for (const DualEdge& e : dual.edges) {
        if (e.weight == 0.0 && sets.unite(e.a, e.b)) --components;
    }

    std::vector<HierarchyNode> nodes;
    std::vector<NodeId> leaf_of_triangle(n, kUnset);
    std::vector<NodeId> node_of_root(n, kUnset);
    for (TriangleId t = 0; t < n; ++t) {
        const std::uint32_t r = sets.find(t);
        if (node_of_root[r] == kUnset) {
            node_of_root[r] = static_cast<NodeId>(nodes.size());
            nodes.emplace_back();
        }
        leaf_of_triangle[t] = node_of_root[r];
        nodes[node_of_root[r]].triangles.push_back(t);
    }

    const ForceNetwork& net = tri.base();
    for (VertexId v : identify_rattlers(net)) {
        const TriangleId t = tri.triangle_at_vertex(net.index_of(v));
        nodes[leaf_of_triangle[t]].rattlers.push_back(v);
    }

    for (NodeId id = 0; id < nodes.size(); ++id) {
        HierarchyNode& leaf = nodes[id];
        leaf.label = make_label(step, id);
        double cx = 0.0;
        double cy = 0.0;
        for (TriangleId t : leaf.triangles) {
            const double a = tri.area(t);
            leaf.area += a;
            cx += a * tri.centroid(t).x;
            cy += a * tri.centroid(t).y;
        }
        leaf.centroid = {cx / leaf.area, cy / leaf.area};
        leaf.rattler_count = leaf.rattlers.size();
    }

    std::vector<std::size_t> weighted;
    for (std::size_t i = 0; i < dual.edges.size(); ++i) {
        if (dual.edges[i].weight > 0.0) weighted.push_back(i);
    }
    std::stable_sort(weighted.begin(), weighted.end(),
                     [&](std::size_t a, std::size_t b) { return dual.edges[a].weight < dual.edges[b].weight; });

    struct Merge {
        std::uint32_t tri;
        NodeId lhs;
        NodeId rhs;
    };
    std::vector<Merge> merges;
    for (std::size_t g = 0; g < weighted.size();) {
        const double w = dual.edges[weighted[g]].weight;
        std::size_t end = g;
        while (end < weighted.size() && dual.edges[weighted[end]].weight == w) ++end;

        // Record the pre-group component of every endpoint, then merge the whole group.
        merges.clear();
        for (std::size_t k = g; k < end; ++k) {
            const DualEdge& e = dual.edges[weighted[k]];
            const NodeId na = node_of_root[sets.find(e.a)];
            const NodeId nb = node_of_root[sets.find(e.b)];
            if (na != nb) merges.push_back({e.a, na, nb});
        }
        for (std::size_t k = g; k < end; ++k) {
            const DualEdge& e = dual.edges[weighted[k]];
            if (sets.unite(e.a, e.b)) --components;
        }

        std::vector<std::uint32_t> roots;
        std::unordered_map<std::uint32_t, std::vector<NodeId>> members;
        for (const Merge& m : merges) {
            const std::uint32_t r = sets.find(m.tri);
            auto [it, fresh] = members.try_emplace(r);
            if (fresh) roots.push_back(r);
            it->second.push_back(m.lhs);
            it->second.push_back(m.rhs);
        }
        for (std::uint32_t r : roots) {
            std::vector<NodeId>& kids = members[r];
            std::sort(kids.begin(), kids.end());
            kids.erase(std::unique(kids.begin(), kids.end()), kids.end());

            const NodeId id = static_cast<NodeId>(nodes.size());
            HierarchyNode parent;
            parent.label = make_label(step, id);
            parent.merge_alpha = w;
            double cx = 0.0;
            double cy = 0.0;
            for (NodeId c : kids) {
                HierarchyNode& child = nodes[c];
                child.parent = id;
                parent.area += child.area;
                cx += child.area * child.centroid.x;
                cy += child.area * child.centroid.y;
                parent.rattler_count += child.rattler_count;
            }
            parent.centroid = {cx / parent.area, cy / parent.area};
            parent.children = std::move(kids);
            nodes.push_back(std::move(parent));
            node_of_root[r] = id;
        }
        g = end;
    }

    if (components != 1) {
        throw DataError("disconnected dual graph: " + std::to_string(components) + " components");
    }
    const NodeId root = node_of_root[sets.find(0)];
    return CycleHierarchy(step, std::move(nodes), root, std::move(leaf_of_triangle));
}

LevelPolicy parse_level_policy(std::string_view text) {
    if (text == "fine") return LevelPolicy::fine();
    if (text == "median") return LevelPolicy::median();
    if (text.size() > 2 && (text.starts_with("p:") || text.starts_with("v:"))) {
        const std::string_view num = text.substr(2);
        double value = 0.0;
        auto [p, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
        if (ec == std::errc() && p == num.data() + num.size()) {
            if (text[0] == 'p') {
                if (value < 0.0 || value > 100.0) throw DataError("percentile out of range: " + std::string(text));
                return LevelPolicy::percentile(value);
            }
            if (value < 0.0) throw DataError("level must be nonnegative: " + std::string(text));
            return LevelPolicy::fixed(value);
        }
    }
    throw DataError("unknown level policy: " + std::string(text));
}

std::vector<LevelPolicy> parse_level_policies(std::string_view list) {
    std::vector<LevelPolicy> out;
    while (true) {
        const auto comma = list.find(',');
        out.push_back(parse_level_policy(list.substr(0, comma)));
        if (comma == std::string_view::npos) break;
        list = list.substr(comma + 1);
    }
    return out;
}

double percentile_of_sorted(std::span<const double> sorted, double p) {
    if (sorted.empty()) throw DataError("percentile of an empty set");
    if (!(p >= 0.0 && p <= 100.0)) throw DataError("percentile must lie in [0, 100]");
    const double rank = p / 100.0 * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(rank));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = rank - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

double level_policy(const ForceNetwork& net, const LevelPolicy& policy) {
    switch (policy.kind) {
        case LevelPolicy::Kind::Fine:
            return 0.0;
        case LevelPolicy::Kind::Fixed:
            if (!(policy.value >= 0.0)) throw DataError("level must be nonnegative");
            return policy.value;
        case LevelPolicy::Kind::Median:
        case LevelPolicy::Kind::Percentile: {
            if (net.edges().empty()) throw DataError("median/percentile level on an edge-free network");
            std::vector<double> forces;
            forces.reserve(net.edges().size());
            for (const ContactEdge& e : net.edges()) forces.push_back(e.force);
            std::sort(forces.begin(), forces.end());
            const double p = policy.kind == LevelPolicy::Kind::Median ? 50.0 : policy.value;
            return percentile_of_sorted(forces, p);
        }
    }
    throw InternalError("unhandled level policy");
}

std::size_t RestrictedHierarchy::hierarchy_link_count() const {
    std::size_t n = 0;
    for (const auto& u : up) n += u.size();
    return n;
}

RestrictedHierarchy restrict_levels(const CycleHierarchy& h, std::span<const double> levels) {
    if (levels.empty()) throw DataError("at least one level is required");
    if (!std::is_sorted(levels.begin(), levels.end())) throw DataError("levels must be ascending");

    RestrictedHierarchy r;
    r.levels.assign(levels.begin(), levels.end());
    for (double alpha : levels) r.nodes.push_back(h.segments_at_level(alpha));
    for (std::size_t l = 0; l + 1 < r.nodes.size(); ++l) {
        const auto& upper = r.nodes[l + 1];
        std::vector<std::size_t> up;
        up.reserve(r.nodes[l].size());
        for (NodeId id : r.nodes[l]) {
            const NodeId anc = h.ancestor_in(id, upper);
            up.push_back(static_cast<std::size_t>(std::lower_bound(upper.begin(), upper.end(), anc) - upper.begin()));
        }
        r.up.push_back(std::move(up));
    }
    return r;
}

std::string hierarchy_to_json(const CycleHierarchy& h, bool include_triangles) {
    using ordered_json = nlohmann::ordered_json;
    ordered_json doc;
    doc["step"] = h.step();
    doc["root"] = h.node(h.root()).label;
    ordered_json nodes = ordered_json::array();
    for (const HierarchyNode& n : h.nodes()) {
        ordered_json jn;
        jn["label"] = n.label;
        jn["merge_alpha"] = n.merge_alpha;
        jn["parent"] = n.parent ? ordered_json(h.node(*n.parent).label) : ordered_json(nullptr);
        jn["area"] = n.area;
        jn["centroid"] = {n.centroid.x, n.centroid.y};
        jn["rattler_count"] = n.rattler_count;
        if (include_triangles && n.is_leaf()) jn["triangles"] = n.triangles;
        nodes.push_back(std::move(jn));
    }
    doc["nodes"] = std::move(nodes);
    return doc.dump(1) + "\n";
}

}  // namespace cycletrack
