#pragma once

#include <filesystem>
#include <optional>
#include <string>

#include "uavip/cliserve/session.hpp"

namespace httplib {
class Server;
}

namespace uavip::cliserve {

struct ServerOptions {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::optional<std::filesystem::path> static_dir;  // served at /
  bool cors = true;
};

// POST /sessions, POST /sessions/{id}/answer, GET /sessions/{id},
// DELETE /sessions/{id}. JSON bodies; errors as {"error": message}.
void install_routes(httplib::Server& server, SessionManager& sessions, const ServerOptions& options);

// Blocks until the server stops.
void serve(SessionManager& sessions, const ServerOptions& options);

}  // namespace uavip::cliserve
