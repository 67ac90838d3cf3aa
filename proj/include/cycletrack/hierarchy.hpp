#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cycletrack/triangulation.hpp"

namespace cycletrack {

using NodeId = std::uint32_t;

struct HierarchyNode {
    std::string label;  // "t{step}:{index}", unique across a dataset
    double merge_alpha = 0.0;
    std::vector<NodeId> children;  // ascending
    std::optional<NodeId> parent;
    std::vector<TriangleId> triangles;  // leaves only, ascending
    std::vector<VertexId> rattlers;     // leaves only, ascending
    double area = 0.0;
    Point centroid;
    std::size_t rattler_count = 0;

    bool is_leaf() const { return children.empty(); }
};

// Merge tree of cycle-bounded segments over the dual filtration. Leaves are the
// components joined by zero-weight dual edges; each internal node records the
// force level at which its children merge.
class CycleHierarchy {
public:
    CycleHierarchy(std::size_t step, std::vector<HierarchyNode> nodes, NodeId root,
                   std::vector<NodeId> leaf_of_triangle);

    std::size_t step() const { return step_; }
    const std::vector<HierarchyNode>& nodes() const { return nodes_; }
    const HierarchyNode& node(NodeId id) const { return nodes_[id]; }
    NodeId root() const { return root_; }
    std::size_t triangle_count() const { return leaf_of_triangle_.size(); }
    NodeId leaf_of_triangle(TriangleId t) const { return leaf_of_triangle_[t]; }

    std::vector<NodeId> leaves() const;

    // Assembled from the leaves below `id`, ascending.
    std::vector<TriangleId> triangle_set(NodeId id) const;
    std::vector<VertexId> rattlers(NodeId id) const;

    // Highest nodes with merge_alpha <= alpha, ascending by id. Together they
    // partition the triangles.
    std::vector<NodeId> segments_at_level(double alpha) const;

    // Nearest ancestor-or-self of `id` contained in `cut` (a segments_at_level result).
    NodeId ancestor_in(NodeId id, std::span<const NodeId> cut) const;

private:
    std::size_t step_;
    std::vector<HierarchyNode> nodes_;
    NodeId root_;
    std::vector<NodeId> leaf_of_triangle_;
};

// Kruskal-style sweep over dual edges sorted by (weight, edge index). Equal-weight
// merges collapse into one multi-child node. Throws DataError if the dual graph is
// disconnected.
CycleHierarchy build_cycle_hierarchy(const Triangulation& tri, const DualGraph& dual, std::size_t step = 0);

struct LevelPolicy {
    enum class Kind { Fine, Median, Percentile, Fixed };
    Kind kind = Kind::Fine;
    double value = 0.0;  // percentile in [0, 100] or the fixed level

    static LevelPolicy fine() { return {Kind::Fine, 0.0}; }
    static LevelPolicy median() { return {Kind::Median, 0.0}; }
    static LevelPolicy percentile(double p) { return {Kind::Percentile, p}; }
    static LevelPolicy fixed(double alpha) { return {Kind::Fixed, alpha}; }

    friend bool operator==(const LevelPolicy&, const LevelPolicy&) = default;
};

// Accepts "fine", "median", "p:<percentile>", "v:<value>".
LevelPolicy parse_level_policy(std::string_view text);
std::vector<LevelPolicy> parse_level_policies(std::string_view comma_list);

// Linear-interpolation percentile of sorted-ascending values.
double percentile_of_sorted(std::span<const double> sorted, double p);

// Median and percentile policies need at least one edge.
double level_policy(const ForceNetwork& net, const LevelPolicy& policy);

struct RestrictedHierarchy {
    std::vector<double> levels;                 // ascending
    std::vector<std::vector<NodeId>> nodes;     // per level, ascending node id
    std::vector<std::vector<std::size_t>> up;   // up[l][i]: position in nodes[l+1] of nodes[l][i]'s parent

    std::size_t level_count() const { return levels.size(); }
    std::size_t hierarchy_link_count() const;
};

// Throws DataError when `levels` is empty or not ascending.
RestrictedHierarchy restrict_levels(const CycleHierarchy& h, std::span<const double> levels);

// Full merge tree as JSON, optionally with leaf triangle lists.
std::string hierarchy_to_json(const CycleHierarchy& h, bool include_triangles = false);

}  // namespace cycletrack
