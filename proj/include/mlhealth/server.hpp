#pragma once

#include <string>

#include "mlhealth/gateway.hpp"
#include "mlhealth/http.hpp"

namespace mlhealth::gateway {

/// Maps an exception to its HTTP status.
inline int status_for(const std::exception& e) {
  if (dynamic_cast<const InvalidInput*>(&e)) return 400;
  if (dynamic_cast<const NotFound*>(&e)) return 404;
  if (dynamic_cast<const json::exception*>(&e)) return 400;
  return 500;
}

inline json error_body(int status, const std::string& message) { return {{"status", status}, {"error", message}}; }

/// HTTP/1.1 front end for a Gateway.
class Server {
 public:
  explicit Server(Gateway& gw) : gw_(gw) {
    http_.set_socket_options([](socket_t sock) {
      int yes = 1;
      ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
    });
    routes();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds the listening socket; port 0 picks a free one. False when busy.
  bool bind(const std::string& host, int port) {
    if (port == 0) {
      port_ = http_.bind_to_any_port(host);
      return port_ > 0;
    }
    if (!http_.bind_to_port(host, port)) return false;
    port_ = port;
    return true;
  }

  int port() const { return port_; }

  /// Serves until stop() is called.
  bool run() { return http_.listen_after_bind(); }

  void stop() { http_.stop(); }

  void wait_until_ready() const { http_.wait_until_ready(); }

 private:
  using Req = httplib::Request;
  using Res = httplib::Response;

  static void reply(Res& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static json body_of(const Req& req) {
    try {
      return json::parse(req.body);
    } catch (const json::exception& e) {
      throw InvalidInput(std::string("request body is not valid JSON: ") + e.what());
    }
  }

  static std::optional<std::string> param(const Req& req, const std::string& name) {
    if (!req.has_param(name)) return std::nullopt;
    return req.get_param_value(name);
  }

  static std::optional<std::int64_t> int_param(const Req& req, const std::string& name) {
    auto v = param(req, name);
    if (!v) return std::nullopt;
    return parse_int_param(name, *v);
  }

  template <class Fn>
  static httplib::Server::Handler guarded(Fn fn) {
    return [fn](const Req& req, Res& res) {
      try {
        fn(req, res);
      } catch (const std::exception& e) {
        int status = status_for(e);
        reply(res, status, error_body(status, e.what()));
      }
    };
  }

  void routes() {
    Gateway& gw = gw_;
    http_.Post("/api/stats", guarded([&gw](const Req& req, Res& res) {
                 reply(res, 200, {{"seq", gw.set_stat(body_of(req))}});
               }));
    http_.Get("/api/stats", guarded([&gw](const Req& req, Res& res) {
                Gateway::StatFilter f;
                f.name = param(req, "name");
                f.pipeline_id = param(req, "pipeline");
                if (auto v = int_param(req, "since")) f.range.start = *v;
                if (auto v = int_param(req, "until")) f.range.end = *v;
                json out = json::array();
                for (const auto& s : gw.stats(f)) out.push_back(to_json(s));
                reply(res, 200, out);
              }));
    http_.Post(R"(/api/distributions/([^/]+))", guarded([&gw](const Req& req, Res& res) {
                 std::optional<std::size_t> k;
                 if (auto v = int_param(req, "top_k")) {
                   if (*v <= 0) throw InvalidInput("top_k must be positive");
                   k = static_cast<std::size_t>(*v);
                 }
                 auto ack = gw.set_distribution(req.matches[1], body_of(req), param(req, "pipeline").value_or(""), k);
                 json out{{"seq", ack.seq}};
                 if (ack.model) out["model"] = to_json(*ack.model);
                 if (ack.report) out["report"] = to_json(*ack.report);
                 reply(res, 200, out);
               }));
    http_.Post("/api/alerts", guarded([&gw](const Req& req, Res& res) {
                 reply(res, 200, {{"seq", gw.health_alert(body_of(req))}});
               }));
    http_.Get("/api/alerts", guarded([&gw](const Req& req, Res& res) {
                json out = json::array();
                auto since = int_param(req, "since").value_or(std::numeric_limits<TimestampMs>::min());
                for (const auto& a : gw.alerts(since, param(req, "model"))) out.push_back(to_json(a));
                reply(res, 200, out);
              }));
    http_.Get("/api/models", guarded([&gw](const Req& req, Res& res) {
                TimeRange r;
                if (auto v = int_param(req, "start")) r.start = *v;
                if (auto v = int_param(req, "end")) r.end = *v;
                json out = json::array();
                for (const auto& m : gw.models(r)) out.push_back(to_json(m));
                reply(res, 200, out);
              }));
    http_.Get("/api/models/current", guarded([&gw](const Req& req, Res& res) {
                auto p = param(req, "pipeline");
                if (!p) throw InvalidInput("missing query parameter 'pipeline'");
                reply(res, 200, to_json(gw.current_model(*p)));
              }));
    http_.Get(R"(/api/health-reports/([^/]+))", guarded([&gw](const Req& req, Res& res) {
                json out = json::array();
                for (const auto& r : gw.health_reports(req.matches[1])) out.push_back(to_json(r));
                reply(res, 200, out);
              }));
    http_.Get(R"(/api/profiles/([^/]+))", guarded([&gw](const Req& req, Res& res) {
                reply(res, 200, to_json(gw.profile(req.matches[1])));
              }));
    http_.Get(R"(/api/policies/([^/]+))", guarded([&gw](const Req& req, Res& res) {
                reply(res, 200, to_json(gw.policy(req.matches[1])));
              }));
    http_.Post(R"(/api/policies/([^/]+))", guarded([&gw](const Req& req, Res& res) {
                 reply(res, 200, to_json(gw.set_policy(req.matches[1], body_of(req))));
               }));
    http_.set_exception_handler([](const Req&, Res& res, std::exception_ptr ep) {
      std::string msg = "internal error";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        msg = e.what();
      } catch (...) {
      }
      reply(res, 500, error_body(500, msg));
    });
  }

  Gateway& gw_;
  httplib::Server http_;
  int port_ = -1;
};

}  // namespace mlhealth::gateway
