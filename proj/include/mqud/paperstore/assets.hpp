#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqud/paperstore/paper.hpp"

namespace mqud::paperstore {

/// `<paper_id>/<image_path>` → content hash. Serialized as sorted
/// tab-separated lines.
class AssetManifest {
 public:
  void add(const std::string& paper_id, const std::string& image_path, const std::string& hash);
  std::optional<std::string> hash_for(const std::string& paper_id, const std::string& image_path) const;
  const std::map<std::string, std::string>& entries() const { return entries_; }

  std::string serialize() const;
  static AssetManifest parse(const std::string& content);
  void save(const std::filesystem::path& path) const;
  static AssetManifest load(const std::filesystem::path& path);

 private:
  std::map<std::string, std::string> entries_;
};

/// Content-addressed image store: files are named by their hash hex.
class AssetStore {
 public:
  explicit AssetStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  /// Copies bytes in, returns "sha256:<hex>".
  std::string put(const std::string& bytes, const std::string& extension);
  std::optional<std::string> read(const std::string& hash) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

struct IngestFailure {
  std::string source;
  std::string error;
};

struct IngestResult {
  std::vector<PaperRecord> papers;  // sorted by paper_id, eligibility marked
  AssetManifest manifest;
  std::vector<IngestFailure> failures;
};

/// Parses every subdirectory of `root` (one paper each) in parallel, marks
/// eligibility, and copies figure images into `store`. parallel = false is
/// the serial reference; both give identical results.
IngestResult ingest_corpus(const std::filesystem::path& root, const std::vector<std::string>& section_lexicon,
                           AssetStore* store, bool parallel = true);

}  // namespace mqud::paperstore
