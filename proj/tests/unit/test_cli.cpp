#include <doctest.h>

#include <sstream>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "cycletrack/cli.hpp"
#include "cycletrack/core_model.hpp"
#include "oracles.hpp"
#include "tempdir.hpp"

using namespace cycletrack;
using nlohmann::json;

namespace {

struct Run {
    int code = 0;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args) {
    args.insert(args.begin(), "cycletrack");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

void write_n1(const std::filesystem::path& dir, int steps = 2) {
    std::filesystem::create_directories(dir);
    for (int t = 1; t <= steps; ++t) save_force_network(oracle::n1_network(), dir / ("t0" + std::to_string(t) + ".json"));
}

std::size_t count_of(const std::string& text, const std::string& needle) {
    std::size_t n = 0;
    for (auto p = text.find(needle); p != std::string::npos; p = text.find(needle, p + 1)) ++n;
    return n;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("build on the two-step N1 fixture") {
    testutil::TempDir dir;
    write_n1(dir / "data");
    const Run r = run({"build", "--input", (dir / "data").string(), "--levels", "fine,median", "--rho", "0", "--output",
                       (dir / "g.json").string()});
    REQUIRE(r.code == 0);
    const json g = json::parse(testutil::slurp(dir / "g.json"));
    CHECK(g["nodes"].size() == 6);
    CHECK(g["temporal_links"].size() == 3);
    CHECK(g["params"]["rho"] == 0.0);
    CHECK(std::filesystem::exists(dir / "g_hierarchy" / "0.json"));
    CHECK(std::filesystem::exists(dir / "g_hierarchy" / "1.json"));
}

TEST_CASE("usage errors exit with 2") {
    testutil::TempDir dir;
    Run r = run({"build", "--output", (dir / "g.json").string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("--input") != std::string::npos);
    CHECK(r.err.find("Usage") != std::string::npos);
    CHECK(run({}).code == 2);
    CHECK(run({"frobnicate"}).code == 2);
    CHECK(run({"build", "--input", "x", "--output", "y", "--rho", "-1"}).code == 2);
    CHECK(run({"extract", "--input", "x"}).code == 2);
    CHECK(run({"render", "--graph", "g.json", "--layout", "circle", "--svg", "a.svg"}).code == 2);
    CHECK(run({"render", "--graph", "g.json", "--layout", "sankey", "--color", "plaid", "--svg", "a.svg"}).code == 2);
    CHECK(run({"--help"}).code == 0);
}

TEST_CASE("data errors exit with 1 and name the file") {
    testutil::TempDir dir;
    std::filesystem::create_directories(dir / "data");
    testutil::spit(dir / "data" / "t01.json", "{ broken");
    const Run r = run({"build", "--input", (dir / "data").string(), "--output", (dir / "g.json").string()});
    CHECK(r.code == 1);
    CHECK(r.err.find("t01.json") != std::string::npos);

    const Run missing = run({"extract", "--input", (dir / "nope.json").string(), "--alpha", "1"});
    CHECK(missing.code == 1);
    CHECK(missing.err.find("nope.json") != std::string::npos);
}

TEST_CASE("extract") {
    testutil::TempDir dir;
    save_force_network(oracle::n1_network(), dir / "n1.json");
    const std::string input = (dir / "n1.json").string();

    Run r = run({"extract", "--input", input, "--alpha", "0.5"});
    REQUIRE(r.code == 0);
    json segs = json::parse(r.out);
    CHECK(segs.size() == 2);
    for (const auto& s : segs) {
        for (const char* key : {"label", "alpha", "triangles", "area", "centroid", "rattlers"}) CHECK(s.contains(key));
    }

    r = run({"extract", "--input", input, "--alpha", "3"});
    CHECK(json::parse(r.out).size() == 1);

    // forces {1,3,3,3,3}: the 50th percentile is the median, 3
    const Run pct = run({"extract", "--input", input, "--percentile", "50", "--output", (dir / "p.json").string()});
    REQUIRE(pct.code == 0);
    const Run med = run({"extract", "--input", input, "--alpha", "3"});
    CHECK(testutil::slurp(dir / "p.json") == med.out);

    CHECK(run({"extract", "--input", input, "--alpha", "1", "--percentile", "50"}).code == 2);
}

TEST_CASE("render") {
    testutil::TempDir dir;
    write_n1(dir / "data");
    REQUIRE(run({"build", "--input", (dir / "data").string(), "--output", (dir / "g.json").string()}).code == 0);
    const std::string graph = (dir / "g.json").string();

    Run r = run({"render", "--graph", graph, "--layout", "sankey", "--level", "0", "--svg", (dir / "s.svg").string()});
    REQUIRE(r.code == 0);
    const std::string svg = testutil::slurp(dir / "s.svg");
    CHECK(svg.rfind("<?xml", 0) == 0);
    CHECK(svg.find("</svg>") != std::string::npos);
    CHECK(count_of(svg, "<rect") == 4);

    r = run({"render", "--graph", graph, "--layout", "nested", "--color", "parent", "--json", (dir / "n.json").string()});
    REQUIRE(r.code == 0);
    const json lj = json::parse(testutil::slurp(dir / "n.json"));
    CHECK(lj["kind"] == "nested");
    CHECK(lj["nodes"].size() == 6);

    CHECK(run({"render", "--graph", graph, "--layout", "sankey", "--level", "5", "--svg", "x.svg"}).code == 2);
    CHECK(run({"render", "--graph", graph, "--layout", "sankey"}).code == 2);

    REQUIRE(run({"build", "--input", (dir / "data").string(), "--levels", "fine", "--output",
                 (dir / "one.json").string()})
                .code == 0);
    CHECK(run({"render", "--graph", (dir / "one.json").string(), "--layout", "nested", "--svg",
               (dir / "x.svg").string()})
              .code == 2);
}

TEST_CASE("build is deterministic and leaves its inputs alone") {
    testutil::TempDir dir;
    REQUIRE(run({"generate", "--synthetic", "grid=8x8,steps=4", "--seed", "9", "--output", (dir / "data").string()})
                .code == 0);
    std::map<std::string, std::string> before;
    for (const auto& e : std::filesystem::directory_iterator(dir / "data")) before[e.path().string()] = testutil::slurp(e.path());
    REQUIRE(run({"build", "--input", (dir / "data").string(), "--output", (dir / "a.json").string()}).code == 0);
    REQUIRE(run({"build", "--input", (dir / "data").string(), "--output", (dir / "b.json").string()}).code == 0);
    CHECK(testutil::slurp(dir / "a.json") == testutil::slurp(dir / "b.json"));
    const std::string graph = testutil::slurp(dir / "a.json");
    REQUIRE(run({"render", "--graph", (dir / "a.json").string(), "--layout", "nested", "--svg",
                 (dir / "a.svg").string()})
                .code == 0);
    CHECK(testutil::slurp(dir / "a.json") == graph);
    for (const auto& [path, text] : before) CHECK(testutil::slurp(path) == text);

    REQUIRE(run({"build", "--synthetic", "grid=8x8,steps=4", "--seed", "9", "--output", (dir / "c.json").string()})
                .code == 0);
    CHECK(testutil::slurp(dir / "c.json") == graph);
}

TEST_CASE("serve endpoints") {
    testutil::TempDir dir;
    write_n1(dir / "data");
    REQUIRE(run({"build", "--input", (dir / "data").string(), "--output", (dir / "g.json").string()}).code == 0);

    auto server = make_server(dir / "g.json", {});
    const int port = server->bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    std::thread worker([&] { server->listen_after_bind(); });
    server->wait_until_ready();

    httplib::Client client("127.0.0.1", port);
    auto graph = client.Get("/api/graph");
    REQUIRE(graph);
    CHECK(graph->status == 200);
    CHECK(graph->get_header_value("Content-Type") == "application/json");
    CHECK(graph->body == testutil::slurp(dir / "g.json"));

    auto h0 = client.Get("/api/hierarchy/0");
    REQUIRE(h0);
    CHECK(h0->status == 200);
    CHECK(json::parse(h0->body)["step"] == 0);
    CHECK(h0->body == testutil::slurp(dir / "g_hierarchy" / "0.json"));

    auto missing = client.Get("/api/hierarchy/999");
    REQUIRE(missing);
    CHECK(missing->status == 404);

    auto index = client.Get("/");
    REQUIRE(index);
    CHECK(index->status == 200);
    CHECK(index->body.find("<html") != std::string::npos);

    server->stop();
    worker.join();

    testutil::TempDir viewer;
    testutil::spit(viewer / "index.html", "<html>viewer bundle</html>");
    auto static_server = make_server(dir / "g.json", viewer.path());
    const int port2 = static_server->bind_to_any_port("127.0.0.1");
    std::thread worker2([&] { static_server->listen_after_bind(); });
    static_server->wait_until_ready();
    httplib::Client client2("127.0.0.1", port2);
    auto page = client2.Get("/");
    REQUIRE(page);
    CHECK(page->body == "<html>viewer bundle</html>");
    CHECK(client2.Get("/api/graph")->body == testutil::slurp(dir / "g.json"));
    static_server->stop();
    worker2.join();
}

TEST_CASE("serve reports a busy port") {
    testutil::TempDir dir;
    write_n1(dir / "data");
    REQUIRE(run({"build", "--input", (dir / "data").string(), "--output", (dir / "g.json").string()}).code == 0);
    httplib::Server blocker;
    const int port = blocker.bind_to_any_port("127.0.0.1");
    REQUIRE(port > 0);
    const Run r = run({"serve", "--graph", (dir / "g.json").string(), "--port", std::to_string(port)});
    CHECK(r.code == 1);
    CHECK(r.err.find("port") != std::string::npos);
}

}  // TEST_SUITE
