#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mqud/corpus/store.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::annosvc {

using nlohmann::json;

struct RosterEntry {
  std::string annotator_id;
  std::string token;
  std::set<std::string> papers;  // papers this annotator authored
};

/// {"annotators": [{"annotator_id", "token", "papers": [...]}]}
class Roster {
 public:
  Roster() = default;
  explicit Roster(std::vector<RosterEntry> entries);
  static Roster load(const std::filesystem::path& path);

  const std::vector<RosterEntry>& entries() const { return entries_; }
  const RosterEntry* by_id(const std::string& id) const;
  const RosterEntry* by_token(const std::string& token) const;

 private:
  std::vector<RosterEntry> entries_;
};

enum class TaskStatus { pending, submitted, skipped };
std::string_view to_string(TaskStatus s);

struct TaskAssignment {
  std::string task_id;
  std::string qud_id;
  std::string annotator_id;
  TaskStatus status = TaskStatus::pending;
  std::string assigned_at;  // ISO-8601 UTC
  std::optional<std::string> dual_group;
  std::size_t sequence = 0;  // plan order; lower is older

  bool operator==(const TaskAssignment&) const = default;
};

json to_json(const TaskAssignment& t);
TaskAssignment task_from_json(const json& j);

struct ServiceConfig {
  bool author_matching = true;
  std::size_t dual_size = 60;
  std::uint64_t seed = 0;
  // Recorded per deployment: what the annotator sees while rating.
  std::string blinding = "full_bundle";
};

/// Deterministic plan over the original QUDs in corpus order. Each QUD goes
/// to the least-loaded eligible annotator (ties to roster order); QUDs in the
/// dual subset (seeded, stratified by type, drawn from QUDs with two eligible
/// annotators) go to the two least-loaded. With author matching on, only
/// authors of the QUD's paper are eligible; QUDs without one stay unassigned.
std::vector<TaskAssignment> plan_assignments(const std::vector<corpus::QudRecord>& quds, const Roster& roster,
                                             const ServiceConfig& config, const std::string& assigned_at);

/// Task queue over a corpus store. The plan is persisted in
/// `assignments.jsonl` on first start and reloaded afterwards; skips go to
/// `task_events.jsonl`; submissions are AnnotationRecords in the store.
class AnnotationService {
 public:
  AnnotationService(corpus::CorpusStore& store, Roster roster, ServiceConfig config,
                    const std::filesystem::path& workdir);

  const Roster& roster() const { return roster_; }
  const ServiceConfig& config() const { return config_; }

  /// Oldest pending task of the annotator. Throws UnknownAnnotator.
  std::optional<TaskAssignment> next_task(const std::string& annotator_id) const;
  std::vector<TaskAssignment> tasks_for(const std::string& annotator_id) const;
  std::optional<TaskAssignment> task(const std::string& task_id) const;

  /// Validates the whole payload before anything is written. Throws
  /// UnknownTask, Unauthorized, TaskNotPending, IncompletePayload,
  /// VocabularyViolation.
  util::Receipt submit(const std::string& task_id, const std::string& annotator_id, const json& payload);
  void skip(const std::string& task_id, const std::string& annotator_id, const std::string& reason);

  json progress() const;
  /// Question, answer, caption, title, abstract, image and anchor text.
  json qud_bundle(const std::string& qud_id) const;
  /// Dimension vocabularies for the UI.
  static json schema();

 private:
  TaskStatus status_of(const TaskAssignment& t) const;
  TaskAssignment& find_task(const std::string& task_id);

  corpus::CorpusStore& store_;
  Roster roster_;
  ServiceConfig config_;
  std::vector<TaskAssignment> tasks_;
  std::map<std::string, std::size_t> task_index_;
  std::set<std::string> skipped_;
  std::unique_ptr<util::JsonlAppender> events_;
  std::filesystem::path workdir_;
  mutable std::mutex mu_;
};

/// Checks a submission payload against the seven dimensions and builds the
/// record. Throws IncompletePayload or VocabularyViolation.
corpus::AnnotationRecord annotation_from_payload(const std::string& qud_id, const std::string& annotator_id,
                                                 const json& payload);

}  // namespace mqud::annosvc
