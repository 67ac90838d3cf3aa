#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cycletrack/geometry.hpp"

namespace cycletrack {

using VertexId = std::int64_t;

struct Vertex {
    VertexId id = 0;
    double x = 0.0;
    double y = 0.0;
    std::optional<double> radius;

    Point position() const { return {x, y}; }
    friend bool operator==(const Vertex&, const Vertex&) = default;
};

struct ContactEdge {
    VertexId u = 0;
    VertexId v = 0;
    double force = 0.0;

    friend bool operator==(const ContactEdge&, const ContactEdge&) = default;
};

// One time step: a weighted planar straight-line graph over particle centers.
// Validated on construction and immutable afterwards.
class ForceNetwork {
public:
    // Throws DataError on duplicate ids or coordinates, dangling or repeated
    // edges, nonpositive forces, crossing edges, or a vertex on an edge.
    ForceNetwork(std::vector<Vertex> vertices, std::vector<ContactEdge> edges,
                 std::optional<double> epsilon = std::nullopt);

    const std::vector<Vertex>& vertices() const { return vertices_; }
    const std::vector<ContactEdge>& edges() const { return edges_; }

    // Maximum edge force, 0 for an edge-free network.
    double omega() const { return omega_; }
    // Vertex weight offset; vertices carry weight omega + epsilon.
    double epsilon() const { return epsilon_; }

    std::size_t vertex_count() const { return vertices_.size(); }
    std::size_t index_of(VertexId id) const;
    Point point(std::size_t index) const { return vertices_[index].position(); }
    const std::vector<Point>& points() const { return points_; }

    // Endpoints of edges()[i] as vertex indices.
    std::pair<std::size_t, std::size_t> edge_indices(std::size_t i) const { return edge_indices_[i]; }

    // Force on the contact between two vertex indices, if there is one.
    std::optional<double> force_between(std::size_t a, std::size_t b) const;

    friend bool operator==(const ForceNetwork& a, const ForceNetwork& b) {
        return a.vertices_ == b.vertices_ && a.edges_ == b.edges_ && a.epsilon_ == b.epsilon_;
    }

private:
    std::vector<Vertex> vertices_;
    std::vector<ContactEdge> edges_;
    std::vector<Point> points_;
    std::vector<std::pair<std::size_t, std::size_t>> edge_indices_;
    std::unordered_map<VertexId, std::size_t> index_;
    std::unordered_map<std::uint64_t, double> force_by_pair_;
    double omega_ = 0.0;
    double epsilon_ = 0.0;
};

struct TimeSeriesDataset {
    std::vector<ForceNetwork> steps;
    std::vector<std::string> step_labels;
};

double default_epsilon(double omega);

ForceNetwork parse_force_network(std::string_view json_text);
std::string serialize_force_network(const ForceNetwork& net);

ForceNetwork load_force_network(const std::filesystem::path& path);
void save_force_network(const ForceNetwork& net, const std::filesystem::path& path);

// Loads every *.json in `directory` in lexicographic order, unless a
// dataset.json manifest lists the step files explicitly.
TimeSeriesDataset load_dataset(const std::filesystem::path& directory);
void save_dataset(const TimeSeriesDataset& ds, const std::filesystem::path& directory);

// Vertex ids with no incident contact, ascending.
std::vector<VertexId> identify_rattlers(const ForceNetwork& net);

// Total disk area over system area. Every vertex must carry a radius.
double packing_fraction(const ForceNetwork& net, double system_area);

// Hexagonal-lattice packing under a loading profile. Step t keeps the lattice
// contacts whose base force times force_scale[t] exceeds threshold[t].
struct SyntheticSpec {
    int rows = 10;
    int cols = 10;
    int steps = 5;
    std::uint64_t seed = 0;
    std::vector<double> force_scale;  // one per step
    std::vector<double> threshold;    // one per step
    double spacing = 1.0;
    double jitter = 0.05;  // interior displacement, fraction of spacing; boundary stays fixed
    double radius = 0.5;   // fraction of spacing
};

enum class LoadingProfile { Constant, Monotone, LoadUnload };

// Fills force_scale/threshold for `spec.steps` steps following `profile`.
void apply_profile(SyntheticSpec& spec, LoadingProfile profile, double threshold = 0.5);

// Parses "grid=RxC,steps=T,profile=loadunload,threshold=0.5,jitter=0.05,seed=N".
SyntheticSpec parse_synthetic_spec(std::string_view text);

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec);

}  // namespace cycletrack
