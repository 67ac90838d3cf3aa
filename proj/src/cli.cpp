#include "cycletrack/cli.hpp"

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <regex>
#include <sstream>
#include <thread>

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>

#include "cycletrack/core_model.hpp"
#include "cycletrack/error.hpp"
#include "cycletrack/hierarchy.hpp"
#include "cycletrack/layout.hpp"
#include "cycletrack/tracking.hpp"
#include "cycletrack/triangulation.hpp"

namespace cycletrack {

namespace {

namespace fs = std::filesystem;

constexpr int kOk = 0;
constexpr int kDataError = 1;
constexpr int kUsageError = 2;

// A usage problem found after flag parsing.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

constexpr std::string_view kIndexPage = R"(<!DOCTYPE html>
<html><head><meta charset="utf-8"><title>cycletrack</title></head>
<body>
<h1>cycletrack</h1>
<p id="summary">loading...</p>
<script>
fetch('/api/graph').then(r => r.json()).then(g => {
  document.getElementById('summary').textContent =
    g.params.steps + ' steps, ' + g.nodes.length + ' nodes, ' + g.temporal_links.length + ' temporal links';
});
</script>
</body></html>
)";

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw DataError("cannot read " + path.string());
    return ss.str();
}

void write_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) {
        throw DataError("cannot write " + path.string());
    }
}

TimeSeriesDataset dataset_from_flags(const std::string& input, const std::string& synthetic,
                                     const std::optional<std::int64_t>& seed) {
    if (!synthetic.empty()) {
        SyntheticSpec spec = parse_synthetic_spec(synthetic);
        if (seed) spec.seed = static_cast<std::uint64_t>(*seed);
        return generate_synthetic(spec);
    }
    if (fs::is_directory(input)) return load_dataset(input);
    TimeSeriesDataset ds;
    ds.steps.push_back(load_force_network(input));
    ds.step_labels.push_back(fs::path(input).stem().string());
    return ds;
}

int cmd_build(const std::string& input, const std::string& synthetic, const std::optional<std::int64_t>& seed,
              const std::string& levels, double rho, const std::string& output, std::ostream& err) {
    const TimeSeriesDataset ds = dataset_from_flags(input, synthetic, seed);
    const std::vector<LevelPolicy> policies = parse_level_policies(levels);
    const TrackingResult result = track(ds, policies, rho);
    write_file(output, tracking_graph_to_json(result.graph));

    const fs::path dir = hierarchy_dir_for(output);
    fs::create_directories(dir);
    for (const auto& entry : fs::directory_iterator(dir)) {
        const std::string stem = entry.path().stem().string();
        if (entry.path().extension() == ".json" && !stem.empty() &&
            stem.find_first_not_of("0123456789") == std::string::npos) {
            fs::remove(entry.path());
        }
    }
    for (std::size_t t = 0; t < result.steps.size(); ++t) {
        write_file(dir / (std::to_string(t) + ".json"), hierarchy_to_json(result.steps[t].hierarchy));
    }
    err << "wrote " << output << ": " << result.graph.nodes.size() << " nodes, " << result.graph.temporal_links.size()
        << " temporal links\n";
    return kOk;
}

int cmd_extract(const std::string& input, const std::optional<double>& alpha, const std::optional<double>& percentile,
                const std::string& output, std::ostream& out) {
    if (alpha.has_value() == percentile.has_value()) throw UsageError("extract needs exactly one of --alpha, --percentile");
    const TimeSeriesDataset ds = dataset_from_flags(input, "", std::nullopt);
    if (ds.steps.size() != 1) {
        throw DataError("extract needs a single step, " + input + " has " + std::to_string(ds.steps.size()));
    }
    const ForceNetwork& net = ds.steps.front();
    const double level = alpha ? *alpha : level_policy(net, LevelPolicy::percentile(*percentile));
    const Triangulation tri = constrained_delaunay(net);
    const CycleHierarchy h = build_cycle_hierarchy(tri, build_dual(tri), 0);

    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (NodeId id : h.segments_at_level(level)) {
        const HierarchyNode& n = h.node(id);
        doc.push_back({{"label", n.label},
                       {"alpha", n.merge_alpha},
                       {"triangles", h.triangle_set(id)},
                       {"area", n.area},
                       {"centroid", {n.centroid.x, n.centroid.y}},
                       {"rattlers", h.rattlers(id)}});
    }
    const std::string text = doc.dump(1) + "\n";
    if (output.empty()) {
        out << text;
    } else {
        write_file(output, text);
    }
    return kOk;
}

int cmd_render(const std::string& graph_path, const std::string& layout, std::size_t level, const std::string& color,
               const std::string& svg, const std::string& json_out) {
    if (svg.empty() && json_out.empty()) throw UsageError("render needs --svg and/or --json");
    const TrackingGraph g = tracking_graph_from_json(read_file(graph_path));
    if (level >= g.level_count()) {
        throw UsageError("unknown level " + std::to_string(level) + ": graph has " + std::to_string(g.level_count()) +
                         " levels");
    }
    const ColorMode mode = color == "parent" ? ColorMode::Parent : ColorMode::Spatial;
    LayoutGraph lg;
    if (layout == "nested") {
        if (level + 1 >= g.level_count()) throw UsageError("nested layout needs two levels from --level");
        lg = nested_layout(g, Canvas{}, mode, level);
    } else {
        lg = sankey_layout(g, level, Canvas{}, mode);
    }
    if (!svg.empty()) write_file(svg, layout_to_svg(lg));
    if (!json_out.empty()) write_file(json_out, layout_to_json(lg));
    return kOk;
}

int cmd_generate(const std::string& synthetic, const std::optional<std::int64_t>& seed, const std::string& output,
                 std::ostream& err) {
    const TimeSeriesDataset ds = dataset_from_flags("", synthetic, seed);
    save_dataset(ds, output);
    err << "wrote " << ds.steps.size() << " steps to " << output << "\n";
    return kOk;
}

int cmd_serve(const std::string& graph_path, int port, std::ostream& err) {
    if (!fs::is_regular_file(graph_path)) throw DataError("cannot read " + graph_path);
    const char* viewer = std::getenv("CYCLETRACK_VIEWER_DIR");
    auto server = make_server(graph_path, viewer ? fs::path(viewer) : fs::path());
    if (!server->bind_to_port("127.0.0.1", port)) throw DataError("cannot listen on port " + std::to_string(port));

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);
    std::thread waiter([&] {
        int sig = 0;
        sigwait(&signals, &sig);
        server->stop();
    });
    err << "serving " << graph_path << " on http://127.0.0.1:" << port << "/\n";
    const bool ok = server->listen_after_bind();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    return ok ? kOk : kDataError;
}

}  // namespace

fs::path hierarchy_dir_for(const fs::path& graph_path) {
    return graph_path.parent_path() / (graph_path.stem().string() + "_hierarchy");
}

std::unique_ptr<httplib::Server> make_server(const fs::path& graph_path, const fs::path& viewer_dir) {
    auto server = std::make_unique<httplib::Server>();
    // no SO_REUSEPORT: a port held by another process must fail to bind
    server->set_socket_options([](socket_t sock) {
        int yes = 1;
        setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    const fs::path hierarchies = hierarchy_dir_for(graph_path);
    auto serve_file = [](const fs::path& path, httplib::Response& res) {
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            res.status = 404;
            res.set_content("not found\n", "text/plain");
            return;
        }
        std::ostringstream ss;
        ss << in.rdbuf();
        res.set_content(ss.str(), "application/json");
    };
    server->Get("/api/graph", [graph_path, serve_file](const httplib::Request&, httplib::Response& res) {
        serve_file(graph_path, res);
    });
    server->Get(R"(/api/hierarchy/(\d+))", [hierarchies, serve_file](const httplib::Request& req, httplib::Response& res) {
        serve_file(hierarchies / (req.matches[1].str() + ".json"), res);
    });
    if (!viewer_dir.empty() && fs::is_directory(viewer_dir)) {
        server->set_mount_point("/", viewer_dir.string());
    } else {
        server->Get("/", [](const httplib::Request&, httplib::Response& res) {
            res.set_content(std::string(kIndexPage), "text/html");
        });
    }
    return server;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"Cycle tracking for granular force networks", "cycletrack"};
    app.require_subcommand(1);

    std::string input, output, levels = "fine,median", synthetic, graph, layout, color = "spatial", svg, json_out;
    double rho = 0.0;
    std::optional<double> alpha, percentile;
    std::optional<std::int64_t> seed;
    std::size_t level = 0;
    int port = 8080;

    auto* build = app.add_subcommand("build", "Build the tracking graph of a dataset");
    auto* build_input = build->add_option("--input", input, "Dataset directory or single step file");
    auto* build_synth = build->add_option("--synthetic", synthetic, "Synthetic dataset spec instead of --input");
    build_input->excludes(build_synth);
    build->add_option("--seed", seed, "Seed for --synthetic");
    build->add_option("--levels", levels, "Level policies: fine, median, p:<pct>, v:<value>")->capture_default_str();
    build->add_option("--rho", rho, "Minimum overlap coefficient for leaf links")->capture_default_str()->check(
        CLI::NonNegativeNumber);
    build->add_option("--output", output, "Tracking graph JSON")->required();

    auto* extract = app.add_subcommand("extract", "Segments of one step at one level");
    extract->add_option("--input", input, "Step file")->required();
    auto* extract_alpha = extract->add_option("--alpha", alpha, "Force level")->check(CLI::NonNegativeNumber);
    auto* extract_pct = extract->add_option("--percentile", percentile, "Percentile of edge forces")
                            ->check(CLI::Range(0.0, 100.0));
    extract_alpha->excludes(extract_pct);
    extract->add_option("--output", output, "Segments JSON (default: stdout)");

    auto* render = app.add_subcommand("render", "Lay out a tracking graph as SVG or JSON");
    render->add_option("--graph", graph, "Tracking graph JSON")->required();
    render->add_option("--layout", layout, "Layout kind")->required()->check(CLI::IsMember({"sankey", "nested"}));
    render->add_option("--level", level, "Level index (fine level for nested)")->capture_default_str();
    render->add_option("--color", color, "Node colors")->capture_default_str()->check(
        CLI::IsMember({"spatial", "parent"}));
    render->add_option("--svg", svg, "SVG output");
    render->add_option("--json", json_out, "Layout JSON output");

    auto* serve = app.add_subcommand("serve", "Serve a tracking graph and its merge trees over HTTP");
    serve->add_option("--graph", graph, "Tracking graph JSON")->required();
    serve->add_option("--port", port, "Port")->capture_default_str()->check(CLI::Range(0, 65535));

    auto* generate = app.add_subcommand("generate", "Write a synthetic dataset");
    generate->add_option("--synthetic", synthetic, "grid=RxC,steps=T,profile=loadunload,threshold=,jitter=,seed=")
        ->required();
    generate->add_option("--seed", seed, "Seed override");
    generate->add_option("--output", output, "Output directory")->required();

    try {
        app.parse(argc, argv);
        if (build->parsed() && input.empty() && synthetic.empty()) {
            throw CLI::RequiredError("--input or --synthetic");
        }
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n";
        const CLI::App* sub = nullptr;
        for (const CLI::App* s : app.get_subcommands()) sub = s;
        err << (sub ? sub->help() : app.help());
        return kUsageError;
    }

    try {
        if (build->parsed()) return cmd_build(input, synthetic, seed, levels, rho, output, err);
        if (extract->parsed()) return cmd_extract(input, alpha, percentile, output, out);
        if (render->parsed()) return cmd_render(graph, layout, level, color, svg, json_out);
        if (serve->parsed()) return cmd_serve(graph, port, err);
        if (generate->parsed()) return cmd_generate(synthetic, seed, output, err);
    } catch (const UsageError& e) {
        err << "error: " << e.what() << "\n";
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
    return kUsageError;
}

}  // namespace cycletrack
