#ifndef QUAYDECK_SERVICE_SERVER_HPP_
#define QUAYDECK_SERVICE_SERVER_HPP_

#include <memory>
#include <string>

// Eigen must precede httplib: <resolv.h> defines a `_res` macro.
#include "quaydeck/service/session.hpp"
#include "httplib.h"

namespace quaydeck::service {

inline Json error_body(const std::string& kind, const std::string& message) {
  return {{"schema", kApiSchema}, {"error", {{"kind", kind}, {"message", message}}}};
}

inline Preference preference_from(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != 2 || !j[0].is_number() || !j[1].is_number())
    throw ValidationError(path + ": expected [p1, p2]");
  return {j[0].get<double>(), j[1].get<double>()};
}

inline SessionSpec session_spec_from(const Json& j) {
  SessionSpec s;
  s.instance_id = quaydeck::detail::member(j, "instance_id", "session").get<std::string>();
  s.checkpoint_id = quaydeck::detail::member(j, "checkpoint_id", "session").get<std::string>();
  if (j.contains("preference")) s.preference = preference_from(j["preference"], "preference");
  s.seed = j.value("seed", std::uint64_t{1});
  s.calibrate = j.value("calibrate", false);
  const std::string mode = j.value("action_mode", std::string("greedy"));
  if (mode == "greedy") s.action_mode = RolloutMode::Greedy;
  else if (mode == "sample") s.action_mode = RolloutMode::Sample;
  else throw ValidationError("action_mode must be greedy or sample");
  return s;
}

/// HTTP front end. Frames stream as newline-delimited JSON over a chunked
/// response.
class Server {
 public:
  explicit Server(std::shared_ptr<SessionManager> mgr) : mgr_(std::move(mgr)) { routes(); }

  httplib::Server& http() { return http_; }
  SessionManager& manager() { return *mgr_; }

  /// Binds to `port` (0 = any free port) and returns the bound port.
  int bind(const std::string& host, int port) {
    const int p = port == 0 ? http_.bind_to_any_port(host) : (http_.bind_to_port(host, port) ? port : -1);
    if (p < 0) throw ConfigError("cannot bind " + host + ":" + std::to_string(port));
    return p;
  }
  void listen_after_bind() { http_.listen_after_bind(); }
  void stop() { http_.stop(); }

 private:
  template <typename F>
  static void guarded(httplib::Response& res, F&& f) {
    try {
      f();
    } catch (const NotFound& e) {
      reply(res, 404, error_body("not_found", e.what()));
    } catch (const InvalidAction& e) {
      reply(res, 409, error_body("invalid_action", e.what()));
    } catch (const ValidationError& e) {
      reply(res, 400, error_body("validation", e.what()));
    } catch (const ParseError& e) {
      reply(res, 400, error_body("parse", e.what()));
    } catch (const ConfigError& e) {
      reply(res, 400, error_body("config", e.what()));
    } catch (const Json::exception& e) {
      reply(res, 400, error_body("parse", e.what()));
    } catch (const std::exception& e) {
      reply(res, 500, error_body("internal", e.what()));
    }
  }

  static void reply(httplib::Response& res, int status, const Json& body) {
    res.status = status;
    res.set_content(body.dump() + "\n", "application/json");
  }

  static Json body_of(const httplib::Request& req) {
    if (req.body.empty()) return Json::object();
    Json j = quaydeck::detail::parse_document(req.body, "request");
    if (j.contains("schema") && j["schema"] != kApiSchema) throw ValidationError("unsupported schema");
    return j;
  }

  void routes() {
    http_.Post("/sessions", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = mgr_->create(session_spec_from(body_of(req)));
        reply(res, 201, {{"schema", kApiSchema}, {"session_id", s->id()}, {"state", s->state()}});
      });
    });
    http_.Post(R"(/sessions/([^/]+)/preference)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = mgr_->get(req.matches[1]);
        const auto ack = s->set_preference(preference_from(quaydeck::detail::member(body_of(req), "preference", "request"), "preference"));
        reply(res, 200, {{"schema", kApiSchema},
                         {"preference", pref_json(ack.preference)},
                         {"effective_from_decision", ack.effective_from_decision},
                         {"ack_seq", ack.ack_seq}});
      });
    });
    http_.Post(R"(/sessions/([^/]+)/control)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = mgr_->get(req.matches[1]);
        reply(res, 200, s->control(parse_control(body_of(req))));
      });
    });
    http_.Get(R"(/sessions/([^/]+)/state)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] { reply(res, 200, mgr_->get(req.matches[1])->state()); });
    });
    http_.Delete(R"(/sessions/([^/]+))", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        mgr_->erase(req.matches[1]);
        reply(res, 200, {{"schema", kApiSchema}, {"deleted", std::string(req.matches[1])}});
      });
    });
    http_.Get(R"(/sessions/([^/]+)/stream)", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        auto s = mgr_->get(req.matches[1]);
        auto cursor = std::make_shared<std::size_t>(s->hub().subscribe());
        res.set_chunked_content_provider("application/x-ndjson", [s, cursor](std::size_t, httplib::DataSink& sink) {
          for (;;) {
            if (s->hub().drained(*cursor)) {
              sink.done();
              return true;
            }
            if (auto f = s->hub().next(*cursor, std::chrono::milliseconds(200))) {
              const std::string line = *f + "\n";
              return sink.write(line.data(), line.size());
            }
            if (!sink.is_writable()) return false;
          }
        });
      });
    });
    http_.Get("/pareto", [this](const httplib::Request& req, httplib::Response& res) {
      guarded(res, [&] {
        if (!req.has_param("checkpoint_id")) throw ValidationError("checkpoint_id is required");
        const std::string ck = req.get_param_value("checkpoint_id");
        std::string inst = req.get_param_value("instance_id");
        if (inst.empty()) {
          const auto ids = mgr_->store().instance_ids();
          if (ids.size() != 1) throw ValidationError("instance_id is required when several instances are loaded");
          inst = ids[0];
        }
        auto num = [&](const char* k, long long def) {
          if (!req.has_param(k)) return def;
          try {
            return std::stoll(req.get_param_value(k));
          } catch (const std::exception&) {
            throw ValidationError(std::string(k) + " must be an integer");
          }
        };
        const auto table = mgr_->pareto(ck, inst, static_cast<int>(num("grid", 11)), static_cast<int>(num("C", 16)),
                                        static_cast<std::uint64_t>(num("seed", 1)));
        res.status = 200;
        res.set_content(table, "text/tab-separated-values");
      });
    });
    http_.Get("/artifacts", [this](const httplib::Request&, httplib::Response& res) {
      reply(res, 200, {{"schema", kApiSchema},
                       {"instances", mgr_->store().instance_ids()},
                       {"checkpoints", mgr_->store().checkpoint_ids()}});
    });
  }

  std::shared_ptr<SessionManager> mgr_;
  httplib::Server http_;
};

}  // namespace quaydeck::service

#endif  // QUAYDECK_SERVICE_SERVER_HPP_
