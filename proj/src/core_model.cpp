#include "cycletrack/core_model.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>

#include <json.hpp>

#include "cycletrack/error.hpp"
#include "cycletrack/predicates.hpp"

namespace cycletrack {

namespace {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

std::uint64_t pair_key(std::size_t a, std::size_t b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
}

std::string edge_name(const ContactEdge& e) {
    return "(" + std::to_string(e.u) + "," + std::to_string(e.v) + ")";
}

// Reports the first crossing pair or vertex-on-edge incidence, if any.
// Edges are swept by min x so only x-overlapping pairs are compared.
void check_planarity(const std::vector<ContactEdge>& edges,
                     const std::vector<std::pair<std::size_t, std::size_t>>& ends,
                     const std::vector<Point>& pts, const std::vector<Vertex>& vertices) {
    const std::size_t m = edges.size();
    std::vector<std::size_t> order(m);
    for (std::size_t i = 0; i < m; ++i) order[i] = i;
    auto xmin = [&](std::size_t i) { return std::min(pts[ends[i].first].x, pts[ends[i].second].x); };
    auto xmax = [&](std::size_t i) { return std::max(pts[ends[i].first].x, pts[ends[i].second].x); };
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return xmin(a) != xmin(b) ? xmin(a) < xmin(b) : a < b;
    });

    for (std::size_t oi = 0; oi < m; ++oi) {
        const std::size_t i = order[oi];
        const Point p0 = pts[ends[i].first];
        const Point p1 = pts[ends[i].second];
        const double right = xmax(i);
        for (std::size_t oj = oi + 1; oj < m && xmin(order[oj]) <= right; ++oj) {
            const std::size_t j = order[oj];
            const Point q0 = pts[ends[j].first];
            const Point q1 = pts[ends[j].second];
            if (predicates::segments_cross_properly(p0, p1, q0, q1)) {
                const auto [a, b] = std::minmax(i, j);
                throw DataError("edge crossing: " + edge_name(edges[a]) + " x " + edge_name(edges[b]));
            }
        }
    }

    // vertices sorted by x; each edge checks the vertices within its x-range
    std::vector<std::size_t> by_x(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) by_x[i] = i;
    std::sort(by_x.begin(), by_x.end(), [&](std::size_t a, std::size_t b) { return pts[a] < pts[b]; });
    for (std::size_t i = 0; i < m; ++i) {
        const Point a = pts[ends[i].first];
        const Point b = pts[ends[i].second];
        auto lo = std::lower_bound(by_x.begin(), by_x.end(), xmin(i),
                                   [&](std::size_t v, double x) { return pts[v].x < x; });
        for (auto it = lo; it != by_x.end() && pts[*it].x <= xmax(i); ++it) {
            if (predicates::on_segment_interior(a, b, pts[*it])) {
                throw DataError("vertex " + std::to_string(vertices[*it].id) + " lies on contact edge " +
                                edge_name(edges[i]));
            }
        }
    }
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << text;
    if (!out) throw DataError("write failed: " + path.string());
}

double require_number(const json& obj, const char* key, const char* what) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number()) {
        throw DataError(std::string("schema: ") + what + " requires numeric \"" + key + "\"");
    }
    return it->get<double>();
}

VertexId require_integer(const json& obj, const char* key, const char* what) {
    auto it = obj.find(key);
    if (it == obj.end() || !it->is_number_integer()) {
        throw DataError(std::string("schema: ") + what + " requires integer \"" + key + "\"");
    }
    return it->get<VertexId>();
}

// Portable uniform double in [0, 1) from the top 53 bits.
double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1p-53; }

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

}  // namespace

double default_epsilon(double omega) { return 1e-9 * std::max(1.0, omega); }

ForceNetwork::ForceNetwork(std::vector<Vertex> vertices, std::vector<ContactEdge> edges,
                           std::optional<double> epsilon)
    : vertices_(std::move(vertices)), edges_(std::move(edges)) {
    points_.reserve(vertices_.size());
    index_.reserve(vertices_.size());
    for (std::size_t i = 0; i < vertices_.size(); ++i) {
        const Vertex& v = vertices_[i];
        if (!std::isfinite(v.x) || !std::isfinite(v.y)) {
            throw DataError("vertex " + std::to_string(v.id) + " has non-finite coordinates");
        }
        if (v.radius && !(*v.radius > 0.0 && std::isfinite(*v.radius))) {
            throw DataError("vertex " + std::to_string(v.id) + " has nonpositive radius");
        }
        if (!index_.emplace(v.id, i).second) throw DataError("duplicate vertex id " + std::to_string(v.id));
        points_.push_back(v.position());
    }

    std::vector<std::size_t> sorted(points_.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) sorted[i] = i;
    std::sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return points_[a] < points_[b]; });
    for (std::size_t k = 1; k < sorted.size(); ++k) {
        if (points_[sorted[k]] == points_[sorted[k - 1]]) {
            throw DataError("duplicate vertex coordinates: vertices " + std::to_string(vertices_[sorted[k - 1]].id) +
                            " and " + std::to_string(vertices_[sorted[k]].id));
        }
    }

    edge_indices_.reserve(edges_.size());
    for (const ContactEdge& e : edges_) {
        if (e.u == e.v) throw DataError("self-loop edge " + edge_name(e));
        if (!(e.force > 0.0) || !std::isfinite(e.force)) throw DataError("nonpositive force on edge " + edge_name(e));
        auto iu = index_.find(e.u);
        auto iv = index_.find(e.v);
        if (iu == index_.end() || iv == index_.end()) throw DataError("edge " + edge_name(e) + " references unknown vertex");
        if (!force_by_pair_.emplace(pair_key(iu->second, iv->second), e.force).second) {
            throw DataError("duplicate edge " + edge_name(e));
        }
        edge_indices_.emplace_back(iu->second, iv->second);
        omega_ = std::max(omega_, e.force);
    }

    epsilon_ = epsilon.value_or(default_epsilon(omega_));
    if (!(epsilon_ > 0.0)) throw DataError("epsilon must be positive");

    check_planarity(edges_, edge_indices_, points_, vertices_);
}

std::size_t ForceNetwork::index_of(VertexId id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw DataError("unknown vertex id " + std::to_string(id));
    return it->second;
}

std::optional<double> ForceNetwork::force_between(std::size_t a, std::size_t b) const {
    auto it = force_by_pair_.find(pair_key(a, b));
    if (it == force_by_pair_.end()) return std::nullopt;
    return it->second;
}

ForceNetwork parse_force_network(std::string_view json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::parse_error& e) {
        throw DataError(std::string("schema: invalid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw DataError("schema: top level must be an object");
    auto vit = doc.find("vertices");
    auto eit = doc.find("edges");
    if (vit == doc.end() || !vit->is_array()) throw DataError("schema: missing \"vertices\" array");
    if (eit == doc.end() || !eit->is_array()) throw DataError("schema: missing \"edges\" array");

    std::vector<Vertex> vertices;
    vertices.reserve(vit->size());
    for (const json& jv : *vit) {
        if (!jv.is_object()) throw DataError("schema: vertex entries must be objects");
        Vertex v;
        v.id = require_integer(jv, "id", "vertex");
        v.x = require_number(jv, "x", "vertex");
        v.y = require_number(jv, "y", "vertex");
        if (auto r = jv.find("radius"); r != jv.end() && !r->is_null()) {
            if (!r->is_number()) throw DataError("schema: vertex radius must be numeric");
            v.radius = r->get<double>();
        }
        vertices.push_back(v);
    }
    std::vector<ContactEdge> edges;
    edges.reserve(eit->size());
    for (const json& je : *eit) {
        if (!je.is_object()) throw DataError("schema: edge entries must be objects");
        edges.push_back({require_integer(je, "u", "edge"), require_integer(je, "v", "edge"),
                         require_number(je, "force", "edge")});
    }
    return ForceNetwork(std::move(vertices), std::move(edges));
}

std::string serialize_force_network(const ForceNetwork& net) {
    ordered_json doc;
    ordered_json vs = ordered_json::array();
    for (const Vertex& v : net.vertices()) {
        ordered_json jv;
        jv["id"] = v.id;
        jv["x"] = v.x;
        jv["y"] = v.y;
        if (v.radius) jv["radius"] = *v.radius;
        vs.push_back(std::move(jv));
    }
    ordered_json es = ordered_json::array();
    for (const ContactEdge& e : net.edges()) {
        ordered_json je;
        je["u"] = e.u;
        je["v"] = e.v;
        je["force"] = e.force;
        es.push_back(std::move(je));
    }
    doc["vertices"] = std::move(vs);
    doc["edges"] = std::move(es);
    return doc.dump(1) + "\n";
}

ForceNetwork load_force_network(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    try {
        return parse_force_network(text);
    } catch (const DataError& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

void save_force_network(const ForceNetwork& net, const std::filesystem::path& path) {
    write_file(path, serialize_force_network(net));
}

TimeSeriesDataset load_dataset(const std::filesystem::path& directory) {
    namespace fs = std::filesystem;
    if (!fs::is_directory(directory)) throw DataError("not a directory: " + directory.string());

    std::vector<fs::path> files;
    const fs::path manifest = directory / "dataset.json";
    if (fs::exists(manifest)) {
        json doc;
        try {
            doc = json::parse(read_file(manifest));
        } catch (const json::parse_error& e) {
            throw DataError(manifest.string() + ": invalid JSON: " + e.what());
        }
        auto it = doc.find("steps");
        if (it == doc.end() || !it->is_array()) throw DataError(manifest.string() + ": missing \"steps\" array");
        for (const json& s : *it) {
            if (!s.is_string()) throw DataError(manifest.string() + ": step entries must be strings");
            files.push_back(directory / s.get<std::string>());
        }
    } else {
        for (const auto& entry : fs::directory_iterator(directory)) {
            if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
        }
        std::sort(files.begin(), files.end(),
                  [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    }
    if (files.empty()) throw DataError("empty dataset: " + directory.string());

    TimeSeriesDataset ds;
    for (const fs::path& f : files) {
        ds.steps.push_back(load_force_network(f));
        ds.step_labels.push_back(f.stem().string());
    }
    return ds;
}

void save_dataset(const TimeSeriesDataset& ds, const std::filesystem::path& directory) {
    std::filesystem::create_directories(directory);
    for (std::size_t t = 0; t < ds.steps.size(); ++t) {
        const std::string label = t < ds.step_labels.size() ? ds.step_labels[t] : "t" + std::to_string(t);
        save_force_network(ds.steps[t], directory / (label + ".json"));
    }
}

std::vector<VertexId> identify_rattlers(const ForceNetwork& net) {
    std::vector<bool> touched(net.vertex_count(), false);
    for (std::size_t i = 0; i < net.edges().size(); ++i) {
        const auto [a, b] = net.edge_indices(i);
        touched[a] = touched[b] = true;
    }
    std::vector<VertexId> out;
    for (std::size_t i = 0; i < touched.size(); ++i) {
        if (!touched[i]) out.push_back(net.vertices()[i].id);
    }
    std::sort(out.begin(), out.end());
    return out;
}

double packing_fraction(const ForceNetwork& net, double system_area) {
    if (!(system_area > 0.0)) throw DataError("system area must be positive");
    double disk_area = 0.0;
    for (const Vertex& v : net.vertices()) {
        if (!v.radius) throw DataError("vertex " + std::to_string(v.id) + " has no radius");
        disk_area += std::numbers::pi * *v.radius * *v.radius;
    }
    return disk_area / system_area;
}

void apply_profile(SyntheticSpec& spec, LoadingProfile profile, double threshold) {
    const int T = spec.steps;
    if (T <= 0) throw DataError("synthetic: steps must be positive");
    spec.force_scale.assign(T, 1.0);
    spec.threshold.assign(T, threshold);
    for (int t = 0; t < T; ++t) {
        const double u = T > 1 ? static_cast<double>(t) / (T - 1) : 1.0;
        switch (profile) {
            case LoadingProfile::Constant:
                break;
            case LoadingProfile::Monotone:
                spec.force_scale[t] = 0.6 + 0.9 * u;
                break;
            case LoadingProfile::LoadUnload:
                spec.force_scale[t] = 0.6 + 0.9 * (1.0 - std::abs(2.0 * u - 1.0));
                break;
        }
    }
}

SyntheticSpec parse_synthetic_spec(std::string_view text) {
    SyntheticSpec spec;
    LoadingProfile profile = LoadingProfile::LoadUnload;
    double threshold = 0.5;

    auto to_double = [](std::string_view key, std::string_view v) {
        double out = 0.0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size()) {
            throw DataError("synthetic: bad number for " + std::string(key) + ": " + std::string(v));
        }
        return out;
    };
    auto to_int = [](std::string_view key, std::string_view v) {
        long long out = 0;
        auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size()) {
            throw DataError("synthetic: bad integer for " + std::string(key) + ": " + std::string(v));
        }
        return out;
    };

    while (!text.empty()) {
        const auto comma = text.find(',');
        const std::string_view item = text.substr(0, comma);
        text = comma == std::string_view::npos ? std::string_view{} : text.substr(comma + 1);
        if (item.empty()) continue;
        const auto eq = item.find('=');
        if (eq == std::string_view::npos) throw DataError("synthetic: expected key=value, got " + std::string(item));
        const std::string_view key = item.substr(0, eq);
        const std::string_view value = item.substr(eq + 1);
        if (key == "grid") {
            const auto x = value.find('x');
            if (x == std::string_view::npos) {
                spec.rows = spec.cols = static_cast<int>(to_int(key, value));
            } else {
                spec.rows = static_cast<int>(to_int(key, value.substr(0, x)));
                spec.cols = static_cast<int>(to_int(key, value.substr(x + 1)));
            }
        } else if (key == "steps") {
            spec.steps = static_cast<int>(to_int(key, value));
        } else if (key == "seed") {
            spec.seed = static_cast<std::uint64_t>(to_int(key, value));
        } else if (key == "profile") {
            if (value == "constant") profile = LoadingProfile::Constant;
            else if (value == "monotone") profile = LoadingProfile::Monotone;
            else if (value == "loadunload") profile = LoadingProfile::LoadUnload;
            else throw DataError("synthetic: unknown profile " + std::string(value));
        } else if (key == "threshold") {
            threshold = to_double(key, value);
        } else if (key == "jitter") {
            spec.jitter = to_double(key, value);
        } else if (key == "spacing") {
            spec.spacing = to_double(key, value);
        } else {
            throw DataError("synthetic: unknown key " + std::string(key));
        }
    }
    if (spec.rows <= 0 || spec.cols <= 0) throw DataError("synthetic: grid size must be positive");
    apply_profile(spec, profile, threshold);
    return spec;
}

TimeSeriesDataset generate_synthetic(const SyntheticSpec& spec) {
    if (spec.rows <= 0 || spec.cols <= 0) throw DataError("synthetic: grid size must be positive");
    if (spec.steps <= 0) throw DataError("synthetic: steps must be positive");
    if (spec.force_scale.size() != static_cast<std::size_t>(spec.steps) ||
        spec.threshold.size() != static_cast<std::size_t>(spec.steps)) {
        throw DataError("synthetic: loading profile must have one entry per step");
    }
    if (!(spec.spacing > 0.0)) throw DataError("synthetic: spacing must be positive");
    // Larger displacements could flip a lattice triangle and make contacts cross.
    if (spec.jitter < 0.0 || spec.jitter > 0.15) throw DataError("synthetic: jitter must lie in [0, 0.15]");

    const int rows = spec.rows;
    const int cols = spec.cols;
    const double s = spec.spacing;
    const double row_height = s * std::numbers::sqrt3 / 2.0;
    auto vid = [cols](int r, int c) { return static_cast<VertexId>(r) * cols + c; };

    struct LatticeEdge {
        VertexId u, v;
        double base;
    };
    std::mt19937_64 force_rng(splitmix64(spec.seed));
    std::vector<LatticeEdge> lattice;
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            std::vector<std::pair<int, int>> nbrs;
            if (c + 1 < cols) nbrs.emplace_back(r, c + 1);
            if (r + 1 < rows) {
                if (r % 2 == 0) {
                    if (c > 0) nbrs.emplace_back(r + 1, c - 1);
                    nbrs.emplace_back(r + 1, c);
                } else {
                    nbrs.emplace_back(r + 1, c);
                    if (c + 1 < cols) nbrs.emplace_back(r + 1, c + 1);
                }
            }
            for (auto [nr, nc] : nbrs) {
                const double base = 0.05 + 0.95 * (1.0 - uniform01(force_rng));  // (0.05, 1]
                lattice.push_back({vid(r, c), vid(nr, nc), base});
            }
        }
    }

    const int width = std::max(2, static_cast<int>(std::to_string(spec.steps).size()));
    TimeSeriesDataset ds;
    for (int t = 0; t < spec.steps; ++t) {
        std::mt19937_64 pos_rng(splitmix64(spec.seed ^ splitmix64(static_cast<std::uint64_t>(t) + 1)));
        std::vector<Vertex> vertices;
        vertices.reserve(static_cast<std::size_t>(rows) * cols);
        for (int r = 0; r < rows; ++r) {
            for (int c = 0; c < cols; ++c) {
                double x = c * s + (r % 2 == 1 ? 0.5 * s : 0.0);
                double y = r * row_height;
                const double dx = (2.0 * uniform01(pos_rng) - 1.0) * spec.jitter * s;
                const double dy = (2.0 * uniform01(pos_rng) - 1.0) * spec.jitter * s;
                const bool boundary = r == 0 || c == 0 || r == rows - 1 || c == cols - 1;
                if (!boundary) {
                    x += dx;
                    y += dy;
                }
                vertices.push_back({vid(r, c), x, y, spec.radius * s});
            }
        }
        std::vector<ContactEdge> edges;
        for (const LatticeEdge& e : lattice) {
            const double f = e.base * spec.force_scale[t];
            if (f > spec.threshold[t]) edges.push_back({e.u, e.v, f});
        }
        ds.steps.emplace_back(std::move(vertices), std::move(edges));
        std::string label = std::to_string(t + 1);
        label.insert(0, static_cast<std::size_t>(std::max(0, width - static_cast<int>(label.size()))), '0');
        ds.step_labels.push_back("t" + label);
    }
    return ds;
}

}  // namespace cycletrack
