#include "mqud/backend/cache.hpp"

#include "mqud/util/jsonl.hpp"

namespace mqud::backend {

ResponseCache::ResponseCache(std::filesystem::path path) : path_(std::move(path)) {
  for (const auto& row : util::read_jsonl(path_))
    entries_[{row.at("kind").get<std::string>(), row.at("key").get<std::string>()}] = {row.value("request", nlohmann::json()),
                                                                                      row.at("response")};
}

std::optional<nlohmann::json> ResponseCache::get(const std::string& kind, const std::string& key) const {
  std::lock_guard lock(mu_);
  auto it = entries_.find({kind, key});
  if (it == entries_.end()) return std::nullopt;
  return std::optional<nlohmann::json>(std::in_place, it->second.response);
}

void ResponseCache::put(const std::string& kind, const std::string& key, const nlohmann::json& request,
                        const nlohmann::json& response) {
  std::lock_guard lock(mu_);
  entries_[{kind, key}] = {request, response};
}

void ResponseCache::save() const {
  std::lock_guard lock(mu_);
  std::vector<nlohmann::json> rows;
  for (const auto& [k, e] : entries_)
    rows.push_back({{"schema", util::kSchema}, {"kind", k.first}, {"key", k.second}, {"request", e.request},
                    {"response", e.response}});
  util::write_jsonl(path_, rows);
}

std::size_t ResponseCache::size() const {
  std::lock_guard lock(mu_);
  return entries_.size();
}

}  // namespace mqud::backend
