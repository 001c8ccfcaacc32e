#pragma once
// HTTP+JSON routes over TaskService.
//
//   POST /sessions                       {"seed"?: n}            -> session
//   GET  /sessions/{id}                                          -> session
//   GET  /sessions/{id}/maps/{index}                             -> client map payload (no holds)
//   POST /sessions/{id}/reveal           {"x", "y", "index"?}    -> {"holds": [{id, x, y}]}
//   POST /sessions/{id}/trials           TrialRecord             -> {"trial_id", "score", "session"}
//   GET  /trials/{id}                                            -> stored TrialRecord
//
// Errors are {"error": message} with 400 (invalid), 404 (unknown or out of
// range) or 409 (duplicate).

#include <mutex>
#include <optional>
#include <string>

#include "httplib.h"
#include <nlohmann/json.hpp>

#include "adp/service.hpp"

namespace adp {

inline int http_status(ServiceError::Kind k) {
  switch (k) {
    case ServiceError::Kind::kUnknownSession:
    case ServiceError::Kind::kUnknownTrial:
    case ServiceError::Kind::kOutOfRange: return 404;
    case ServiceError::Kind::kDuplicate: return 409;
    case ServiceError::Kind::kInvalid: return 400;
  }
  return 500;
}

class HttpTaskServer {
 public:
  explicit HttpTaskServer(TaskService& service) : service_(service) { install(); }

  bool listen(const std::string& host, int port) { return server_.listen(host, port); }
  // Binds to an ephemeral port; returns it, or -1.
  int bind_any(const std::string& host = "127.0.0.1") { return server_.bind_to_any_port(host); }
  bool listen_after_bind() { return server_.listen_after_bind(); }
  void stop() { server_.stop(); }
  void wait_until_ready() { server_.wait_until_ready(); }

 private:
  static void send_json(httplib::Response& res, const nlohmann::json& body, int status = 200) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  template <typename Fn>
  static void guarded(httplib::Response& res, Fn&& fn) {
    try {
      fn();
    } catch (const ServiceError& e) {
      send_json(res, {{"error", e.what()}}, http_status(e.kind()));
    } catch (const nlohmann::json::exception& e) {
      send_json(res, {{"error", std::string("malformed JSON: ") + e.what()}}, 400);
    } catch (const std::exception& e) {
      send_json(res, {{"error", e.what()}}, 400);
    }
  }

  // Last map served per session, the default target of a reveal.
  std::size_t current_index(const std::string& session) {
    std::lock_guard lock(mu_);
    auto it = current_.find(session);
    return it == current_.end() ? 0 : it->second;
  }

  void install() {
    server_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        std::optional<std::uint64_t> seed;
        if (!req.body.empty()) {
          const auto body = nlohmann::json::parse(req.body);
          if (body.contains("seed")) seed = body.at("seed").get<std::uint64_t>();
        }
        send_json(res, session_to_json(service_.open_session(seed), service_.policy()), 201);
      });
    });

    server_.Get(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { send_json(res, session_to_json(service_.session(req.matches[1]), service_.policy())); });
    });

    server_.Get(R"(/sessions/([^/]+)/maps/(\d+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        const std::size_t index = std::stoul(req.matches[2]);
        send_json(res, service_.serve_map(id, index));
        std::lock_guard lock(mu_);
        current_[id] = index;
      });
    });

    server_.Post(R"(/sessions/([^/]+)/reveal)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        const std::string id = req.matches[1];
        const auto body = nlohmann::json::parse(req.body);
        const Point fovea{body.at("x").get<double>(), body.at("y").get<double>()};
        const std::size_t index = body.contains("index") ? body.at("index").get<std::size_t>() : current_index(id);
        nlohmann::json holds = nlohmann::json::array();
        for (const Hold& h : service_.reveal_at(id, index, fovea))
          holds.push_back({{"id", h.id}, {"x", h.position.x}, {"y", h.position.y}});
        send_json(res, {{"index", index}, {"holds", holds}});
      });
    });

    server_.Post(R"(/sessions/([^/]+)/trials)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        Session updated;
        const auto out = service_.submit_trial(req.matches[1], nlohmann::json::parse(req.body), &updated);
        send_json(res,
                  {{"trial_id", out.trial_id},
                   {"score", out.score},
                   {"anomalies", out.anomalies},
                   {"session", session_to_json(updated, service_.policy())}},
                  201);
      });
    });

    server_.Get(R"(/trials/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        res.status = 200;
        res.set_content(service_.trial_text(req.matches[1]), "application/json");
      });
    });
  }

  TaskService& service_;
  httplib::Server server_;
  std::mutex mu_;
  std::map<std::string, std::size_t> current_;
};

}  // namespace adp
