#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <string>

namespace httplib {
class Server;
}

namespace cycletrack {

// Exit codes: 0 success, 1 data or I/O error, 2 usage error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// Directory holding the per-step merge trees written next to a graph file.
std::filesystem::path hierarchy_dir_for(const std::filesystem::path& graph_path);

// Routes for `serve`, without binding a port. Static assets come from
// `viewer_dir` when it is non-empty, otherwise a built-in page is served at /.
std::unique_ptr<httplib::Server> make_server(const std::filesystem::path& graph_path,
                                             const std::filesystem::path& viewer_dir);

}  // namespace cycletrack
