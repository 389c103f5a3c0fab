#include "uavip/cliserve/server.hpp"

#include <httplib.h>

#include "uavip/error.hpp"

namespace uavip::cliserve {

using nlohmann::json;

namespace {

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void reply_error(httplib::Response& res, int status, const std::string& message) {
  reply(res, status, {{"error", message}});
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) {
    return json::object();
  }
  json body = json::parse(req.body, nullptr, false);
  if (body.is_discarded() || !body.is_object()) {
    throw ConfigError("request body must be a JSON object");
  }
  return body;
}

// Maps library errors onto status codes.
template <typename Fn>
void guarded(httplib::Response& res, Fn&& fn) {
  try {
    fn();
  } catch (const SessionNotFound& e) {
    reply_error(res, 404, e.what());
  } catch (const SessionConflict& e) {
    reply_error(res, 409, e.what());
  } catch (const ConfigError& e) {
    reply_error(res, 400, e.what());
  } catch (const std::exception& e) {
    reply_error(res, 500, e.what());
  }
}

}  // namespace

void install_routes(httplib::Server& server, SessionManager& sessions, const ServerOptions& options) {
  if (options.cors) {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Methods", "GET, POST, DELETE, OPTIONS"},
                                {"Access-Control-Allow-Headers", "Content-Type"}});
    server.Options(R"(/sessions.*)", [](const httplib::Request&, httplib::Response& res) {
      res.status = 204;
    });
  }
  if (options.static_dir && !server.set_mount_point("/", options.static_dir->string())) {
    throw ConfigError("static directory " + options.static_dir->string() + " does not exist");
  }

  server.Post("/sessions", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const json body = parse_body(req);
      std::optional<double> threshold;
      std::optional<std::size_t> budget;
      if (body.contains("stop_threshold") && !body["stop_threshold"].is_null()) {
        if (!body["stop_threshold"].is_number()) {
          throw ConfigError("stop_threshold must be a number");
        }
        threshold = body["stop_threshold"].get<double>();
      }
      if (body.contains("budget") && !body["budget"].is_null()) {
        if (!body["budget"].is_number_unsigned()) {
          throw ConfigError("budget must be a non-negative integer");
        }
        budget = body["budget"].get<std::size_t>();
      }
      const auto s = sessions.create(threshold, budget);
      reply(res, 201,
            {{"session_id", s.id},
             {"prior_posterior", s.trace.prior},
             {"first_query", sessions.query_json(s.pending)},
             {"status", to_string(s.status)}});
    });
  });

  server.Post(R"(/sessions/([^/]+)/answer)", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const std::string id = req.matches[1];
      sessions.get(id);  // 404 before body validation
      const json body = parse_body(req);
      if (!body.contains("query_index") || !body["query_index"].is_number_unsigned()) {
        throw ConfigError("query_index must be a non-negative integer");
      }
      if (!body.contains("answer") || !body["answer"].is_string()) {
        throw ConfigError("answer must be \"yes\", \"no\" or \"unsure\"");
      }
      const auto s = sessions.answer(id, body["query_index"].get<std::size_t>(),
                                     user_answer_from_string(body["answer"].get<std::string>()));
      reply(res, 200,
            {{"posterior", s.posterior()},
             {"next_query", sessions.query_json(s.pending)},
             {"status", to_string(s.status)}});
    });
  });

  server.Get(R"(/sessions/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] { reply(res, 200, sessions.state_json(sessions.get(req.matches[1]))); });
  });

  server.Delete(R"(/sessions/([^/]+))", [&sessions](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      sessions.remove(req.matches[1]);
      reply(res, 200, {{"deleted", std::string(req.matches[1])}});
    });
  });
}

void serve(SessionManager& sessions, const ServerOptions& options) {
  httplib::Server server;
  install_routes(server, sessions, options);
  if (!server.listen(options.host, options.port)) {
    throw std::runtime_error("cannot listen on " + options.host + ":" + std::to_string(options.port));
  }
}

}  // namespace uavip::cliserve
