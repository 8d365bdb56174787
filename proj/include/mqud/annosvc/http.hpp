#pragma once

#include <filesystem>
#include <memory>
#include <optional>

#include "mqud/annosvc/service.hpp"
#include "mqud/paperstore/assets.hpp"
#include "mqud/util/error.hpp"

namespace httplib {
class Server;
}

namespace mqud::annosvc {

struct HttpOptions {
  std::optional<std::filesystem::path> ui_dir;  // built UI bundle, served at /
  const paperstore::AssetStore* assets = nullptr;
};

/// Routes: GET /task/next, POST /task/{id}/submit, POST /task/{id}/skip,
/// GET /tasks/mine, GET /progress, GET /qud/{id}, GET /schema,
/// GET /asset/{hash}, plus the static UI. Annotator routes need
/// "Authorization: Bearer <token>". Errors are {error, message} JSON.
std::unique_ptr<httplib::Server> make_server(AnnotationService& service, const HttpOptions& options);

/// HTTP status for an error kind.
int http_status(ErrorKind kind);

}  // namespace mqud::annosvc
