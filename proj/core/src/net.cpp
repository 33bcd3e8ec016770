#include "tutor/net.h"

#include <httplib.h>

namespace tutor {

HttpChatClient::HttpChatClient(std::string url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) {
    throw ValidationError("endpoint", "endpoint must be an absolute http(s) URL");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  base_ = url.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : url.substr(path_start);
}

std::string HttpChatClient::complete(const ChatRequest& request, const std::string& api_key) {
  httplib::Client cli(base_);
  const auto ms = std::chrono::milliseconds(request.timeout_ms > 0 ? request.timeout_ms : 10000);
  cli.set_connection_timeout(ms);
  cli.set_read_timeout(ms);
  cli.set_write_timeout(ms);
  httplib::Headers headers{{"Authorization", "Bearer " + api_key}};
  auto res = cli.Post(path_, headers, chat_request_body(request).dump(), "application/json");
  if (!res) {
    const auto err = res.error();
    const std::string what = httplib::to_string(err);
    if (err == httplib::Error::ConnectionTimeout || err == httplib::Error::Read) {
      throw ChatError(ChatError::Kind::kTimeout, what);
    }
    throw ChatError(ChatError::Kind::kTransport, what);
  }
  if (res->status != 200) {
    throw ChatError(ChatError::Kind::kBadResponse, "HTTP " + std::to_string(res->status));
  }
  try {
    const auto doc = nlohmann::json::parse(res->body);
    return doc.at("choices").at(0).at("message").at("content").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw ChatError(ChatError::Kind::kBadResponse, e.what());
  }
}

ApiError api_error_from_current_exception() {
  auto make = [](int status, const char* code, const std::string& message,
                 const std::string& field = {}) {
    ApiError e{status, {{"code", code}, {"message", message}}};
    if (!field.empty()) e.body["field"] = field;
    return e;
  };
  try {
    throw;
  } catch (const ValidationError& e) {
    return make(400, "validation_error", e.what(), e.field());
  } catch (const nlohmann::json::parse_error& e) {
    return make(400, "invalid_json", e.what());
  } catch (const NotFoundError& e) {
    return make(404, "not_found", e.what());
  } catch (const PreconditionError& e) {
    return make(409, "precondition_failed", e.what());
  } catch (const std::exception& e) {
    return make(500, "internal_error", e.what());
  }
}

namespace {

void send_json(httplib::Response& res, int status, const nlohmann::json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

template <class F>
void guarded(httplib::Response& res, F&& f) {
  try {
    f();
  } catch (...) {
    const ApiError e = api_error_from_current_exception();
    send_json(res, e.status, e.body);
  }
}

}  // namespace

void mount_api(httplib::Server& server, TutorService& service) {
  // The console may be served from another origin.
  server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                              {"Access-Control-Allow-Headers", "Content-Type"},
                              {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
  server.Options(R"(/api/v1/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
  });

  server.Get("/api/v1/health", [](const httplib::Request&, httplib::Response& res) {
    send_json(res, 200, {{"status", "ok"}});
  });

  server.Get("/api/v1/scenarios", [&service](const httplib::Request&, httplib::Response& res) {
    guarded(res, [&] { send_json(res, 200, service.list_scenarios()); });
  });

  server.Post("/api/v1/sessions", [&service](const httplib::Request& req, httplib::Response& res) {
    guarded(res, [&] {
      const auto body = req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
      send_json(res, 201, service.create_session(parse_create_request(body)));
    });
  });

  server.Post(R"(/api/v1/sessions/([^/]+)/turns)",
              [&service](const httplib::Request& req, httplib::Response& res) {
                guarded(res, [&] {
                  const auto body = nlohmann::json::parse(req.body);
                  send_json(res, 200, service.submit_turn(req.matches[1], parse_turn_request(body)));
                });
              });

  server.Get(R"(/api/v1/sessions/([^/]+)/traces)",
             [&service](const httplib::Request& req, httplib::Response& res) {
               guarded(res, [&] { send_json(res, 200, nlohmann::json(service.get_traces(req.matches[1]))); });
             });
}

}  // namespace tutor
