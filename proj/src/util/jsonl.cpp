#include "mqud/util/jsonl.hpp"

#include <sstream>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"

namespace mqud::util {

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableSource, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::ConfigError, "cannot write " + path.string());
  out << content;
}

std::string file_hash(const std::filesystem::path& path) { return content_hash(read_text_file(path)); }

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::vector<json> rows;
  if (!std::filesystem::exists(path)) return rows;
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::UnreadableSource, "cannot open " + path.string());
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw Error(ErrorKind::InvariantViolation,
                  path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<json>& rows) {
  std::string content;
  for (const auto& r : rows) {
    content += r.dump();
    content.push_back('\n');
  }
  write_text_file(path, content);
}

JsonlAppender::JsonlAppender(std::filesystem::path path) : path_(std::move(path)) {
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  if (std::filesystem::exists(path_)) {
    offset_ = std::filesystem::file_size(path_);
    std::ifstream in(path_, std::ios::binary);
    std::string line;
    while (std::getline(in, line)) ++lines_;
  }
  out_.open(path_, std::ios::binary | std::ios::app);
  if (!out_) throw Error(ErrorKind::ConfigError, "cannot append to " + path_.string());
}

Receipt JsonlAppender::append(const json& row) {
  const std::string line = row.dump() + "\n";
  std::lock_guard lock(mu_);
  Receipt r{path_.filename().string(), offset_, lines_ + 1};
  out_ << line;
  out_.flush();
  if (!out_) throw Error(ErrorKind::ConfigError, "write failed on " + path_.string());
  offset_ += line.size();
  ++lines_;
  return r;
}

}  // namespace mqud::util
