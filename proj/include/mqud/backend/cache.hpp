#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

namespace mqud::backend {

/// Request-hash → response store behind `backend_cache.jsonl`. Rows are
/// {schema, kind, key, request, response}. save() rewrites the file sorted
/// by (kind, key) so recorded caches are byte-stable.
class ResponseCache {
 public:
  ResponseCache() = default;
  explicit ResponseCache(std::filesystem::path path);

  std::optional<nlohmann::json> get(const std::string& kind, const std::string& key) const;
  void put(const std::string& kind, const std::string& key, const nlohmann::json& request,
           const nlohmann::json& response);
  void save() const;
  std::size_t size() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  struct Entry {
    nlohmann::json request;
    nlohmann::json response;
  };
  std::filesystem::path path_;
  std::map<std::pair<std::string, std::string>, Entry> entries_;
  mutable std::mutex mu_;
};

}  // namespace mqud::backend
