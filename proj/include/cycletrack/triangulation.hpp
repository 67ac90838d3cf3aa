#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cycletrack/core_model.hpp"
#include "cycletrack/geometry.hpp"

namespace cycletrack {

using TriangleId = std::uint32_t;
inline constexpr TriangleId kNoTriangle = static_cast<TriangleId>(-1);

// Corners are vertex indices into the base network, counterclockwise.
struct Triangle {
    TriangleId id = 0;
    std::array<std::uint32_t, 3> v{};
};

struct TriEdge {
    std::uint32_t a = 0;  // vertex index, a < b
    std::uint32_t b = 0;
    bool is_force_edge = false;
    double force = 0.0;  // 0 unless is_force_edge
    std::array<TriangleId, 2> triangles{kNoTriangle, kNoTriangle};

    bool interior() const { return triangles[1] != kNoTriangle; }
};

// Constrained Delaunay triangulation of one force network.
class Triangulation {
public:
    Triangulation(ForceNetwork base, std::vector<Triangle> triangles, std::vector<TriEdge> edges);

    const ForceNetwork& base() const { return base_; }
    const std::vector<Triangle>& triangles() const { return triangles_; }
    const std::vector<TriEdge>& tri_edges() const { return edges_; }
    std::size_t size() const { return triangles_.size(); }

    TrianglePoints corners(TriangleId t) const;
    double area(TriangleId t) const { return areas_[t]; }
    Point centroid(TriangleId t) const { return centroids_[t]; }
    const BBox& bbox(TriangleId t) const { return bboxes_[t]; }

    // Some triangle incident to the vertex (every vertex has one).
    TriangleId triangle_at_vertex(std::size_t vertex) const { return vertex_triangle_[vertex]; }

    // Union of triangle bounding boxes.
    const BBox& extent() const { return extent_; }

private:
    ForceNetwork base_;
    std::vector<Triangle> triangles_;
    std::vector<TriEdge> edges_;
    std::vector<double> areas_;
    std::vector<Point> centroids_;
    std::vector<BBox> bboxes_;
    std::vector<TriangleId> vertex_triangle_;
    BBox extent_;
};

struct DualEdge {
    TriangleId a = 0;
    TriangleId b = 0;
    double weight = 0.0;
};

// Triangles are the nodes; one edge per interior tri-edge, weighted by its force.
struct DualGraph {
    std::size_t node_count = 0;
    std::vector<DualEdge> edges;
};

struct TriangleGeometry {
    double area = 0.0;
    Point centroid;
};

// Throws DataError for fewer than 3 points, all-collinear input, or a
// constraint that cannot be inserted.
Triangulation constrained_delaunay(const ForceNetwork& net);

DualGraph build_dual(const Triangulation& tri);

TriangleGeometry triangle_geometry(const TrianglePoints& corners);

}  // namespace cycletrack
