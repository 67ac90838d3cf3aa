#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cycletrack/geometry.hpp"
#include "cycletrack/tracking.hpp"

namespace cycletrack {

struct Color {
    int r = 0;
    int g = 0;
    int b = 0;

    friend bool operator==(const Color&, const Color&) = default;
};

inline constexpr Color kNeutralGrey{150, 150, 150};
inline constexpr Color kCoarseGrey{210, 210, 210};
inline constexpr Color kCoarseRibbonGrey{170, 170, 170};

struct ColormapCorners {
    Color c00{0, 80, 160};
    Color c10{220, 60, 40};
    Color c01{40, 160, 60};
    Color c11{230, 200, 40};
};

// Bilinear blend of the corners over the centroid's position in `domain`,
// clamped to the box. Throws DataError for a degenerate box.
Color colormap2d(Point centroid, const BBox& domain, const ColormapCorners& corners = {});

std::span<const Color> default_palette();

// Palette entry keyed by an FNV-1a hash of the parent's label. Nodes without a
// parent get kNeutralGrey.
Color parent_color(const TrackingGraph& g, std::size_t node, std::span<const Color> palette = default_palette());

enum class ColorMode { Spatial, Parent };

struct Canvas {
    double width = 1200.0;
    double height = 600.0;
    double margin = 20.0;
    double gap = 4.0;
    double node_width = 12.0;
};

struct LayoutNode {
    std::string id;
    double x0 = 0.0;
    double x1 = 0.0;
    double y0 = 0.0;
    double y1 = 0.0;
    Color color;
    std::size_t level = 0;
    std::size_t step = 0;

    friend bool operator==(const LayoutNode&, const LayoutNode&) = default;
};

struct Ribbon {
    std::string from;
    std::string to;
    std::size_t level = 0;
    double x_from = 0.0;  // right edge of the source node
    double x_to = 0.0;    // left edge of the target node
    double y_from = 0.0;  // ribbon center at each end
    double y_to = 0.0;
    double thickness = 0.0;
    Color color;

    friend bool operator==(const Ribbon&, const Ribbon&) = default;
};

struct LayoutGraph {
    std::string kind;  // "sankey" or "nested"
    std::size_t columns = 0;
    double width = 0.0;
    double height = 0.0;
    std::vector<LayoutNode> nodes;
    std::vector<Ribbon> ribbons;

    friend bool operator==(const LayoutGraph&, const LayoutGraph&) = default;
};

// Pairs of links between the same two columns whose endpoint orders disagree.
// Each link is (rank in left column, rank in right column).
std::size_t count_crossings(std::span<const std::pair<std::size_t, std::size_t>> links);

// Final vertical order of the nodes in each column, top to bottom, as node
// indices into the graph.
struct ColumnOrder {
    std::vector<std::vector<std::size_t>> columns;
    std::size_t initial_crossings = 0;
    std::size_t final_crossings = 0;
    std::size_t sweeps = 0;
};

// Initial order by centroid (y descending, then x, then label), refined by up to
// eight alternating barycenter sweeps. A pass that increases crossings is reverted.
ColumnOrder order_columns(const TrackingGraph& g, std::size_t level);

// Throws DataError for a level the graph does not have.
LayoutGraph sankey_layout(const TrackingGraph& g, std::size_t level, const Canvas& canvas = {},
                          ColorMode mode = ColorMode::Spatial);

// Fine level `level` inside grey containers for level + 1.
// Throws DataError unless both levels exist.
LayoutGraph nested_layout(const TrackingGraph& g, const Canvas& canvas = {}, ColorMode mode = ColorMode::Spatial,
                          std::size_t level = 0);

std::string layout_to_svg(const LayoutGraph& lg);
std::string layout_to_json(const LayoutGraph& lg);
LayoutGraph layout_from_json(std::string_view text);

// `format` is "svg" or "json".
void export_layout(const LayoutGraph& lg, std::string_view format, const std::filesystem::path& path);

}  // namespace cycletrack
