#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mqud::util {

using json = nlohmann::json;

inline constexpr const char* kSchema = "mqud/1";

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, const std::string& content);

/// "sha256:<hex>" of a file's bytes.
std::string file_hash(const std::filesystem::path& path);

/// Parses every non-empty line; malformed lines raise InvariantViolation with
/// the line number. A missing file yields an empty vector.
std::vector<json> read_jsonl(const std::filesystem::path& path);

/// Rewrites the file with one compact object per line.
void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows);

struct Receipt {
  std::string file;
  std::uint64_t offset = 0;  // byte offset of the line start
  std::uint64_t line = 0;    // 1-based
};

/// Append-only JSONL writer. Thread-safe; each append is one flushed line.
class JsonlAppender {
 public:
  explicit JsonlAppender(std::filesystem::path path);

  Receipt append(const json& row);
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
  std::uint64_t offset_ = 0;
  std::uint64_t lines_ = 0;
  std::mutex mu_;
};

}  // namespace mqud::util
