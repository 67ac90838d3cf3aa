#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cycletrack/core_model.hpp"
#include "cycletrack/hierarchy.hpp"
#include "cycletrack/triangulation.hpp"

namespace cycletrack {

// Sparse triangle-to-triangle intersection areas between two triangulations.
// Row i lists (column, area) pairs for triangle i of the earlier step, sorted by column.
class OverlapMatrix {
public:
    using Entry = std::pair<TriangleId, double>;

    OverlapMatrix() = default;
    OverlapMatrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols) {}

    std::size_t rows() const { return rows_.size(); }
    std::size_t cols() const { return cols_; }
    std::span<const Entry> row(TriangleId i) const { return rows_[i]; }
    std::size_t nonzeros() const;

    // Entries for one row must arrive in ascending column order.
    void set_row(TriangleId i, std::vector<Entry> entries);

    double at(TriangleId i, TriangleId j) const;
    OverlapMatrix transpose() const;

    friend bool operator==(const OverlapMatrix&, const OverlapMatrix&) = default;

private:
    std::vector<std::vector<Entry>> rows_;
    std::size_t cols_ = 0;
};

double triangle_overlap_area(const TrianglePoints& a, const TrianglePoints& b);

// Candidate pairs come from a uniform grid over the later step's triangle
// boxes (cell size: median box diagonal of the earlier step), then a box test,
// then exact clipping. Same result as testing every pair.
OverlapMatrix compute_overlap_matrix(const Triangulation& earlier, const Triangulation& later);

// One level of one step: which segment each triangle belongs to.
struct LevelCut {
    std::vector<std::string> labels;
    std::vector<double> areas;
    std::vector<std::size_t> segment_of_triangle;
};

LevelCut make_level_cut(const CycleHierarchy& h, std::span<const NodeId> nodes);

struct Segment {
    std::span<const TriangleId> triangles;  // ascending
    double area = 0.0;
};

struct RegionOverlap {
    double raw = 0.0;
    double omega = 0.0;
};

// Sum of M over seg_a x seg_b, and that sum over the smaller segment area.
RegionOverlap region_overlap(const OverlapMatrix& m, const Segment& seg_a, const Segment& seg_b);

// A temporal link between segment positions in two consecutive level cuts.
struct SegmentLink {
    std::size_t from = 0;
    std::size_t to = 0;
    double raw = 0.0;
    double omega = 0.0;

    friend bool operator==(const SegmentLink&, const SegmentLink&) = default;
};

// Links with omega > rho (strict), sorted by (from, to). Only segment pairs
// that share a matrix entry are visited.
std::vector<SegmentLink> leaf_temporal_links(const LevelCut& from, const LevelCut& to, const OverlapMatrix& m,
                                             double rho);

// Maps each link to its parents' pair one level up. Raw overlaps of links
// sharing a parent pair are summed; omega is recomputed from parent areas.
// No rho filtering.
std::vector<SegmentLink> lift_links(std::span<const SegmentLink> links, std::span<const std::size_t> up_from,
                                    std::span<const std::size_t> up_to, std::span<const double> parent_areas_from,
                                    std::span<const double> parent_areas_to);

struct TrackNode {
    std::string label;
    std::size_t step = 0;
    std::size_t level = 0;
    double area = 0.0;
    Point centroid;
    std::size_t rattlers = 0;
    std::optional<std::size_t> parent;  // index into TrackingGraph::nodes
};

struct HierarchyLink {
    std::size_t child = 0;  // node indices
    std::size_t parent = 0;
};

struct TemporalLink {
    std::size_t from = 0;  // node indices
    std::size_t to = 0;
    std::string from_label;
    std::string to_label;
    double raw_overlap = 0.0;
    double omega_coeff = 0.0;
    std::size_t level = 0;
};

// Nodes are unique by (label, level): a segment that survives to a coarser
// level appears once per level under the same label.
struct TrackingGraph {
    std::vector<TrackNode> nodes;
    std::vector<HierarchyLink> hierarchy_links;
    std::vector<TemporalLink> temporal_links;
    double rho = 0.0;
    std::vector<std::vector<double>> levels;  // per step
    std::vector<std::string> step_labels;
    BBox domain;
    std::size_t steps = 0;

    std::size_t level_count() const { return levels.empty() ? 0 : levels.front().size(); }
    std::optional<std::size_t> find(const std::string& label, std::size_t level) const;
};

struct StepResult {
    Triangulation triangulation;
    CycleHierarchy hierarchy;
    RestrictedHierarchy restricted;
};

struct TrackingResult {
    std::vector<StepResult> steps;
    TrackingGraph graph;
};

// End-to-end: per step CDT, dual, hierarchy and restriction; per consecutive
// pair the overlap matrix, leaf links and lifted links.
TrackingResult track(const TimeSeriesDataset& ds, std::span<const LevelPolicy> policies, double rho = 0.0);

TrackingGraph build_tracking_graph(const TimeSeriesDataset& ds, std::span<const LevelPolicy> policies,
                                   double rho = 0.0);

std::string tracking_graph_to_json(const TrackingGraph& g);
TrackingGraph tracking_graph_from_json(std::string_view text);

}  // namespace cycletrack
