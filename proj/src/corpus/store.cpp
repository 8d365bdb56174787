#include "mqud/corpus/store.hpp"

#include <mutex>

#include "mqud/util/error.hpp"

namespace mqud::corpus {

namespace fs = std::filesystem;

CorpusStore::CorpusStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  for (const auto& row : util::read_jsonl(quds_path())) {
    auto r = row.get<QudRecord>();
    if (!qud_index_.emplace(r.qud_id, quds_.size()).second)
      throw Error(ErrorKind::DuplicateKey, quds_path().string() + ": qud_id '" + r.qud_id + "' repeated");
    quds_.push_back(std::move(r));
  }
  for (const auto& row : util::read_jsonl(annotations_path())) {
    auto a = row.get<AnnotationRecord>();
    check_annotation(a);
    annotation_keys_.emplace(a.qud_id, a.annotator_id);
    annotations_.push_back(std::move(a));
  }
  qud_out_ = std::make_unique<util::JsonlAppender>(quds_path());
  annotation_out_ = std::make_unique<util::JsonlAppender>(annotations_path());
}

void CorpusStore::check_annotation(const AnnotationRecord& a) const {
  validate(a);
  if (!qud_index_.count(a.qud_id))
    throw Error(ErrorKind::InvariantViolation, "annotation for unknown qud_id '" + a.qud_id + "'");
  if (annotation_keys_.count({a.qud_id, a.annotator_id}))
    throw Error(ErrorKind::DuplicateKey, "annotation (" + a.qud_id + ", " + a.annotator_id + ") already stored");
}

util::Receipt CorpusStore::append(const QudRecord& record) {
  validate(record);
  std::unique_lock lock(mu_);
  if (qud_index_.count(record.qud_id))
    throw Error(ErrorKind::DuplicateKey, "qud_id '" + record.qud_id + "' already stored");
  auto receipt = qud_out_->append(json(record));
  qud_index_.emplace(record.qud_id, quds_.size());
  quds_.push_back(record);
  return receipt;
}

util::Receipt CorpusStore::append(const AnnotationRecord& record) {
  std::unique_lock lock(mu_);
  check_annotation(record);
  auto receipt = annotation_out_->append(json(record));
  annotation_keys_.emplace(record.qud_id, record.annotator_id);
  annotations_.push_back(record);
  return receipt;
}

std::vector<QudRecord> CorpusStore::quds() const {
  std::shared_lock lock(mu_);
  return quds_;
}

std::vector<AnnotationRecord> CorpusStore::annotations() const {
  std::shared_lock lock(mu_);
  return annotations_;
}

std::optional<QudRecord> CorpusStore::find_qud(const std::string& qud_id) const {
  std::shared_lock lock(mu_);
  auto it = qud_index_.find(qud_id);
  if (it == qud_index_.end()) return std::nullopt;
  return quds_[it->second];
}

std::vector<AnnotationRecord> CorpusStore::annotations_for(const std::string& qud_id) const {
  std::shared_lock lock(mu_);
  std::vector<AnnotationRecord> out;
  for (const auto& a : annotations_)
    if (a.qud_id == qud_id) out.push_back(a);
  return out;
}

bool CorpusStore::has_annotation(const std::string& qud_id, const std::string& annotator_id) const {
  std::shared_lock lock(mu_);
  return annotation_keys_.count({qud_id, annotator_id}) > 0;
}

std::size_t CorpusStore::qud_count() const {
  std::shared_lock lock(mu_);
  return quds_.size();
}

std::vector<QudRecord> load_quds(const fs::path& path) {
  std::vector<QudRecord> out;
  for (const auto& row : util::read_jsonl(path)) out.push_back(row.get<QudRecord>());
  return out;
}

std::vector<AnnotationRecord> load_annotations(const fs::path& path) {
  std::vector<AnnotationRecord> out;
  for (const auto& row : util::read_jsonl(path)) out.push_back(row.get<AnnotationRecord>());
  return out;
}

}  // namespace mqud::corpus
