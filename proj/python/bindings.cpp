#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <sstream>

#include "cycletrack/cli.hpp"
#include "cycletrack/core_model.hpp"
#include "cycletrack/error.hpp"
#include "cycletrack/hierarchy.hpp"
#include "cycletrack/layout.hpp"
#include "cycletrack/tracking.hpp"
#include "cycletrack/triangulation.hpp"

namespace py = pybind11;
using namespace cycletrack;

namespace {

ForceNetwork make_network(const std::vector<py::tuple>& vertices, const std::vector<py::tuple>& edges,
                          std::optional<double> epsilon) {
    std::vector<Vertex> vs;
    vs.reserve(vertices.size());
    for (const auto& t : vertices) {
        if (t.size() != 3 && t.size() != 4) throw DataError("vertex tuples are (id, x, y[, radius])");
        Vertex v{t[0].cast<VertexId>(), t[1].cast<double>(), t[2].cast<double>(), std::nullopt};
        if (t.size() == 4 && !t[3].is_none()) v.radius = t[3].cast<double>();
        vs.push_back(v);
    }
    std::vector<ContactEdge> es;
    es.reserve(edges.size());
    for (const auto& t : edges) {
        if (t.size() != 3) throw DataError("edge tuples are (u, v, force)");
        es.push_back({t[0].cast<VertexId>(), t[1].cast<VertexId>(), t[2].cast<double>()});
    }
    return ForceNetwork(std::move(vs), std::move(es), epsilon);
}

TimeSeriesDataset make_dataset(const std::vector<ForceNetwork>& steps) {
    TimeSeriesDataset ds;
    ds.steps = steps;
    for (std::size_t t = 0; t < steps.size(); ++t) ds.step_labels.push_back(std::to_string(t));
    return ds;
}

py::dict segment_dict(const CycleHierarchy& h, NodeId id) {
    const HierarchyNode& n = h.node(id);
    py::dict d;
    d["label"] = n.label;
    d["alpha"] = n.merge_alpha;
    d["triangles"] = h.triangle_set(id);
    d["area"] = n.area;
    d["centroid"] = py::make_tuple(n.centroid.x, n.centroid.y);
    d["rattlers"] = h.rattlers(id);
    return d;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Cycle extraction and tracking for granular force networks";

    py::register_exception<DataError>(m, "DataError", PyExc_ValueError);

    py::class_<ForceNetwork>(m, "ForceNetwork")
        .def(py::init(&make_network), py::arg("vertices"), py::arg("edges"), py::arg("epsilon") = py::none())
        .def_static("from_json", &parse_force_network, py::arg("text"))
        .def_static("load", &load_force_network, py::arg("path"))
        .def("save", [](const ForceNetwork& n, const std::filesystem::path& p) { save_force_network(n, p); })
        .def("to_json", &serialize_force_network)
        .def_property_readonly("vertices",
                               [](const ForceNetwork& n) {
                                   py::list out;
                                   for (const auto& v : n.vertices()) {
                                       out.append(py::make_tuple(v.id, v.x, v.y, v.radius ? py::cast(*v.radius) : py::none()));
                                   }
                                   return out;
                               })
        .def_property_readonly("edges",
                               [](const ForceNetwork& n) {
                                   py::list out;
                                   for (const auto& e : n.edges()) out.append(py::make_tuple(e.u, e.v, e.force));
                                   return out;
                               })
        .def_property_readonly("omega", &ForceNetwork::omega)
        .def_property_readonly("epsilon", &ForceNetwork::epsilon)
        .def("rattlers", &identify_rattlers)
        .def("packing_fraction", &packing_fraction, py::arg("system_area"))
        .def("level", [](const ForceNetwork& n, std::string_view policy) { return level_policy(n, parse_level_policy(policy)); },
             py::arg("policy"))
        .def("__len__", &ForceNetwork::vertex_count)
        .def("__eq__", [](const ForceNetwork& a, const ForceNetwork& b) { return a == b; });

    py::class_<Triangulation>(m, "Triangulation")
        .def(py::init([](const ForceNetwork& n) { return constrained_delaunay(n); }), py::arg("network"))
        .def("__len__", &Triangulation::size)
        .def_property_readonly("triangles",
                               [](const Triangulation& t) {
                                   std::vector<std::array<std::uint32_t, 3>> out;
                                   for (const auto& tr : t.triangles()) out.push_back({tr.v[0], tr.v[1], tr.v[2]});
                                   return out;
                               })
        .def("corners",
             [](const Triangulation& t, TriangleId i) {
                 if (i >= t.size()) throw py::index_error("triangle index out of range");
                 const auto c = t.corners(i);
                 return py::make_tuple(py::make_tuple(c[0].x, c[0].y), py::make_tuple(c[1].x, c[1].y),
                                       py::make_tuple(c[2].x, c[2].y));
             })
        .def("area",
             [](const Triangulation& t, TriangleId i) {
                 if (i >= t.size()) throw py::index_error("triangle index out of range");
                 return t.area(i);
             })
        .def("dual_edges", [](const Triangulation& t) {
            std::vector<std::tuple<std::size_t, std::size_t, double>> out;
            for (const auto& e : build_dual(t).edges) out.emplace_back(e.a, e.b, e.weight);
            return out;
        });

    py::class_<CycleHierarchy>(m, "CycleHierarchy")
        .def(py::init([](const Triangulation& t, std::size_t step) { return build_cycle_hierarchy(t, build_dual(t), step); }),
             py::arg("triangulation"), py::arg("step") = 0)
        .def("__len__", [](const CycleHierarchy& h) { return h.nodes().size(); })
        .def_property_readonly("leaf_count", [](const CycleHierarchy& h) { return h.leaves().size(); })
        .def("segments",
             [](const CycleHierarchy& h, double alpha) {
                 py::list out;
                 for (NodeId id : h.segments_at_level(alpha)) out.append(segment_dict(h, id));
                 return out;
             },
             py::arg("alpha"))
        .def("to_json", &hierarchy_to_json, py::arg("include_triangles") = false);

    m.def("triangle_overlap_area",
          [](const std::array<std::array<double, 2>, 3>& a, const std::array<std::array<double, 2>, 3>& b) {
              const TrianglePoints ta{Point{a[0][0], a[0][1]}, Point{a[1][0], a[1][1]}, Point{a[2][0], a[2][1]}};
              const TrianglePoints tb{Point{b[0][0], b[0][1]}, Point{b[1][0], b[1][1]}, Point{b[2][0], b[2][1]}};
              return triangle_overlap_area(ta, tb);
          },
          "Intersection area of two counterclockwise triangles.", py::arg("a"), py::arg("b"));

    m.def("overlap_matrix",
          [](const Triangulation& earlier, const Triangulation& later) {
              const OverlapMatrix mat = compute_overlap_matrix(earlier, later);
              std::vector<std::tuple<TriangleId, TriangleId, double>> out;
              for (TriangleId i = 0; i < mat.rows(); ++i) {
                  for (const auto& [j, area] : mat.row(i)) out.emplace_back(i, j, area);
              }
              return out;
          },
          "Nonzero (row, column, area) entries.", py::arg("earlier"), py::arg("later"));

    py::class_<TrackingGraph>(m, "TrackingGraph")
        .def_static("from_json", &tracking_graph_from_json, py::arg("text"))
        .def("to_json", &tracking_graph_to_json)
        .def_property_readonly("node_count", [](const TrackingGraph& g) { return g.nodes.size(); })
        .def_property_readonly("level_count", &TrackingGraph::level_count)
        .def_readonly("levels", &TrackingGraph::levels)
        .def_property_readonly("hierarchy_links",
                               [](const TrackingGraph& g) {
                                   std::vector<std::pair<std::size_t, std::size_t>> out;
                                   for (const auto& l : g.hierarchy_links) out.emplace_back(l.child, l.parent);
                                   return out;
                               })
        .def_property_readonly("temporal_links",
                               [](const TrackingGraph& g) {
                                   py::list out;
                                   for (const auto& l : g.temporal_links) {
                                       py::dict d;
                                       d["from"] = l.from_label;
                                       d["to"] = l.to_label;
                                       d["level"] = l.level;
                                       d["raw"] = l.raw_overlap;
                                       d["omega"] = l.omega_coeff;
                                       out.append(d);
                                   }
                                   return out;
                               })
        .def("layout",
             [](const TrackingGraph& g, std::string_view kind, std::size_t level, std::string_view color,
                std::string_view format) {
                 const ColorMode mode = color == "parent" ? ColorMode::Parent : ColorMode::Spatial;
                 if (color != "parent" && color != "spatial") throw DataError("color must be spatial or parent");
                 LayoutGraph lg;
                 if (kind == "sankey") {
                     lg = sankey_layout(g, level, {}, mode);
                 } else if (kind == "nested") {
                     lg = nested_layout(g, {}, mode, level);
                 } else {
                     throw DataError("layout must be sankey or nested");
                 }
                 if (format == "svg") return layout_to_svg(lg);
                 if (format == "json") return layout_to_json(lg);
                 throw DataError("format must be svg or json");
             },
             py::arg("kind") = "sankey", py::arg("level") = 0, py::arg("color") = "spatial", py::arg("format") = "svg");

    m.def("track",
          [](const std::vector<ForceNetwork>& steps, std::string_view levels, double rho) {
              const auto policies = parse_level_policies(levels);
              py::gil_scoped_release release;
              return build_tracking_graph(make_dataset(steps), policies, rho);
          },
          py::arg("steps"), py::arg("levels") = "fine,median", py::arg("rho") = 0.0);

    m.def("load_dataset", [](const std::filesystem::path& dir) { return load_dataset(dir).steps; }, py::arg("directory"));

    m.def("generate_synthetic",
          [](std::string_view spec, std::optional<std::uint64_t> seed) {
              SyntheticSpec s = parse_synthetic_spec(spec);
              if (seed) s.seed = *seed;
              return generate_synthetic(s).steps;
          },
          py::arg("spec"), py::arg("seed") = py::none());

    m.def("run_cli",
          [](std::vector<std::string> args) {
              args.insert(args.begin(), "cycletrack");
              std::vector<const char*> argv;
              for (const auto& a : args) argv.push_back(a.c_str());
              std::ostringstream out, err;
              const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
              return py::make_tuple(code, out.str(), err.str());
          },
          "Run the command-line tool in-process; returns (exit code, stdout, stderr).", py::arg("args"));
}
