#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <string>
#include <vector>

#include "mqud/corpus/types.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::corpus {

/// Append-only store over `quds.jsonl` and `annotations.jsonl` in one
/// directory. Opening replays both files to rebuild the in-memory index.
/// Appends are serialized; queries take a shared lock and return copies.
class CorpusStore {
 public:
  explicit CorpusStore(std::filesystem::path root);

  /// Throws DuplicateKey on a repeated qud_id, InvariantViolation when the
  /// record breaks its invariants.
  util::Receipt append(const QudRecord& record);
  /// Throws DuplicateKey on a repeated (qud_id, annotator_id) and
  /// InvariantViolation when the qud_id is unknown.
  util::Receipt append(const AnnotationRecord& record);

  std::vector<QudRecord> quds() const;
  std::vector<AnnotationRecord> annotations() const;
  std::optional<QudRecord> find_qud(const std::string& qud_id) const;
  std::vector<AnnotationRecord> annotations_for(const std::string& qud_id) const;
  bool has_annotation(const std::string& qud_id, const std::string& annotator_id) const;
  std::size_t qud_count() const;

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path quds_path() const { return root_ / "quds.jsonl"; }
  std::filesystem::path annotations_path() const { return root_ / "annotations.jsonl"; }

 private:
  void check_annotation(const AnnotationRecord& record) const;

  std::filesystem::path root_;
  std::vector<QudRecord> quds_;
  std::map<std::string, std::size_t> qud_index_;
  std::vector<AnnotationRecord> annotations_;
  std::set<std::pair<std::string, std::string>> annotation_keys_;
  std::unique_ptr<util::JsonlAppender> qud_out_;
  std::unique_ptr<util::JsonlAppender> annotation_out_;
  mutable std::shared_mutex mu_;
};

/// Loads QudRecords from any JSONL file (quds, candidates, variants).
std::vector<QudRecord> load_quds(const std::filesystem::path& path);
std::vector<AnnotationRecord> load_annotations(const std::filesystem::path& path);

}  // namespace mqud::corpus
