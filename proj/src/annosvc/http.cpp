#include "mqud/annosvc/http.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace mqud::annosvc {

int http_status(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Unauthorized: return 401;
    case ErrorKind::UnknownAnnotator:
    case ErrorKind::UnknownTask: return 404;
    case ErrorKind::TaskNotPending:
    case ErrorKind::DuplicateKey: return 409;
    case ErrorKind::IncompletePayload:
    case ErrorKind::VocabularyViolation:
    case ErrorKind::InvariantViolation: return 422;
    default: return 500;
  }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, ErrorKind kind, const std::string& message) {
  send_json(res, http_status(kind), {{"error", to_string(kind)}, {"message", message}});
}

template <typename F>
httplib::Server::Handler guarded(F&& f) {
  return [f = std::forward<F>(f)](const httplib::Request& req, httplib::Response& res) {
    try {
      f(req, res);
    } catch (const Error& e) {
      send_error(res, e.kind(), e.what());
    } catch (const std::exception& e) {
      send_json(res, 400, {{"error", "BadRequest"}, {"message", e.what()}});
    }
  };
}

const RosterEntry& authenticate(const AnnotationService& svc, const httplib::Request& req) {
  const auto header = req.get_header_value("Authorization");
  const std::string prefix = "Bearer ";
  if (header.rfind(prefix, 0) != 0) throw Error(ErrorKind::Unauthorized, "missing bearer token");
  const auto* who = svc.roster().by_token(header.substr(prefix.size()));
  if (!who) throw Error(ErrorKind::Unauthorized, "unknown token");
  return *who;
}

}  // namespace

std::unique_ptr<httplib::Server> make_server(AnnotationService& svc, const HttpOptions& options) {
  auto server = std::make_unique<httplib::Server>();
  auto& s = *server;

  s.Get("/schema", guarded([](const httplib::Request&, httplib::Response& res) {
          send_json(res, 200, AnnotationService::schema());
        }));
  s.Get("/task/next", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          const auto& who = authenticate(svc, req);
          auto t = svc.next_task(who.annotator_id);
          if (!t) {
            res.status = 204;
            return;
          }
          auto body = to_json(*t);
          body["bundle"] = svc.qud_bundle(t->qud_id);
          send_json(res, 200, body);
        }));
  s.Get("/tasks/mine", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          const auto& who = authenticate(svc, req);
          json rows = json::array();
          for (const auto& t : svc.tasks_for(who.annotator_id)) rows.push_back(to_json(t));
          send_json(res, 200, {{"tasks", rows}});
        }));
  s.Post(R"(/task/([A-Za-z0-9_]+)/submit)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const auto& who = authenticate(svc, req);
           auto payload = json::parse(req.body, nullptr, false);
           if (payload.is_discarded()) throw Error(ErrorKind::IncompletePayload, "body is not JSON");
           auto receipt = svc.submit(req.matches[1], who.annotator_id, payload);
           send_json(res, 200, {{"task_id", std::string(req.matches[1])},
                                {"status", "submitted"},
                                {"file", receipt.file},
                                {"offset", receipt.offset},
                                {"line", receipt.line}});
         }));
  s.Post(R"(/task/([A-Za-z0-9_]+)/skip)", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
           const auto& who = authenticate(svc, req);
           auto body = json::parse(req.body.empty() ? "{}" : req.body, nullptr, false);
           const std::string reason = body.is_object() ? body.value("reason", "") : "";
           svc.skip(req.matches[1], who.annotator_id, reason);
           send_json(res, 200, {{"task_id", std::string(req.matches[1])}, {"status", "skipped"}});
         }));
  s.Get("/progress", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          authenticate(svc, req);
          send_json(res, 200, svc.progress());
        }));
  s.Get(R"(/qud/([A-Za-z0-9_]+))", guarded([&svc](const httplib::Request& req, httplib::Response& res) {
          authenticate(svc, req);
          send_json(res, 200, svc.qud_bundle(req.matches[1]));
        }));
  if (options.assets) {
    const auto* assets = options.assets;
    s.Get(R"(/asset/(sha256:[0-9a-f]+))", guarded([assets](const httplib::Request& req, httplib::Response& res) {
            auto bytes = assets->read(req.matches[1]);
            if (!bytes) {
              send_json(res, 404, {{"error", "UnknownAsset"}, {"message", std::string(req.matches[1])}});
              return;
            }
            const bool png = bytes->rfind("\x89PNG", 0) == 0;
            res.set_content(*bytes, png ? "image/png" : "application/octet-stream");
          }));
  }
  if (options.ui_dir) {
    if (!s.set_mount_point("/", options.ui_dir->string()))
      spdlog::warn("UI directory {} not found; only the API is served", options.ui_dir->string());
  }
  return server;
}

}  // namespace mqud::annosvc
