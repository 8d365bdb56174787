#include "mqud/annosvc/service.hpp"

#include <algorithm>
#include <random>

#include <spdlog/spdlog.h>

#include "mqud/corpus/sft_export.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"

namespace mqud::annosvc {

namespace fs = std::filesystem;
using corpus::AnnotationRecord;

Roster::Roster(std::vector<RosterEntry> entries) : entries_(std::move(entries)) {
  std::set<std::string> ids, tokens;
  for (const auto& e : entries_) {
    if (e.annotator_id.empty() || e.token.empty())
      throw Error(ErrorKind::ConfigError, "roster entries need annotator_id and token");
    if (!ids.insert(e.annotator_id).second) throw Error(ErrorKind::ConfigError, "roster repeats " + e.annotator_id);
    if (!tokens.insert(e.token).second) throw Error(ErrorKind::ConfigError, "roster repeats a token");
  }
}

Roster Roster::load(const fs::path& path) {
  const auto j = json::parse(util::read_text_file(path), nullptr, false);
  if (j.is_discarded() || !j.contains("annotators") || !j["annotators"].is_array())
    throw Error(ErrorKind::ConfigError, path.string() + ": expected {\"annotators\": [...]}");
  std::vector<RosterEntry> entries;
  for (const auto& a : j["annotators"]) {
    RosterEntry e;
    e.annotator_id = a.value("annotator_id", "");
    e.token = a.value("token", "");
    for (const auto& p : a.value("papers", json::array())) e.papers.insert(p.get<std::string>());
    entries.push_back(std::move(e));
  }
  return Roster(std::move(entries));
}

const RosterEntry* Roster::by_id(const std::string& id) const {
  for (const auto& e : entries_)
    if (e.annotator_id == id) return &e;
  return nullptr;
}

const RosterEntry* Roster::by_token(const std::string& token) const {
  for (const auto& e : entries_)
    if (e.token == token) return &e;
  return nullptr;
}

std::string_view to_string(TaskStatus s) {
  switch (s) {
    case TaskStatus::pending: return "pending";
    case TaskStatus::submitted: return "submitted";
    case TaskStatus::skipped: return "skipped";
  }
  return "?";
}

json to_json(const TaskAssignment& t) {
  json j = {{"schema", util::kSchema},   {"task_id", t.task_id},         {"qud_id", t.qud_id},
            {"annotator_id", t.annotator_id}, {"status", to_string(t.status)}, {"assigned_at", t.assigned_at},
            {"sequence", t.sequence}};
  j["dual_group"] = t.dual_group ? json(*t.dual_group) : json(nullptr);
  return j;
}

TaskAssignment task_from_json(const json& j) {
  TaskAssignment t;
  t.task_id = j.at("task_id").get<std::string>();
  t.qud_id = j.at("qud_id").get<std::string>();
  t.annotator_id = j.at("annotator_id").get<std::string>();
  t.assigned_at = j.value("assigned_at", "");
  t.sequence = j.value("sequence", std::size_t{0});
  if (j.contains("dual_group") && !j["dual_group"].is_null()) t.dual_group = j["dual_group"].get<std::string>();
  return t;
}

std::vector<TaskAssignment> plan_assignments(const std::vector<corpus::QudRecord>& quds, const Roster& roster,
                                             const ServiceConfig& config, const std::string& assigned_at) {
  const auto& people = roster.entries();
  auto eligible = [&](const corpus::QudRecord& q) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < people.size(); ++i)
      if (!config.author_matching || people[i].papers.count(q.context.paper_id)) out.push_back(i);
    return out;
  };

  // Dual subset: stratified by type over QUDs that two annotators can take.
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto& q : quds)
    if (q.provenance == corpus::Provenance::generated && eligible(q).size() >= 2)
      strata[std::string(corpus::to_string(q.qud_type))].push_back(q.qud_id);
  std::map<std::string, std::size_t> counts;
  for (auto& [t, ids] : strata) counts[t] = ids.size();
  const auto quota = corpus::stratified_quota(counts, config.dual_size);
  std::set<std::string> dual;
  for (auto& [t, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    std::mt19937_64 rng(util::mix_seed(config.seed, util::stable_u64("dual:" + t)));
    std::shuffle(ids.begin(), ids.end(), rng);
    for (std::size_t i = 0; i < quota.at(t); ++i) dual.insert(ids[i]);
  }

  std::vector<std::size_t> load(people.size(), 0);
  std::vector<TaskAssignment> plan;
  std::size_t groups = 0, unassigned = 0;
  for (const auto& q : quds) {
    if (q.provenance != corpus::Provenance::generated) continue;
    auto who = eligible(q);
    if (who.empty()) {
      ++unassigned;
      continue;
    }
    std::stable_sort(who.begin(), who.end(), [&](std::size_t a, std::size_t b) { return load[a] < load[b]; });
    const bool is_dual = dual.count(q.qud_id) > 0;
    std::optional<std::string> group;
    if (is_dual) group = "dual_" + std::to_string(++groups);
    for (std::size_t k = 0; k < (is_dual ? 2u : 1u); ++k) {
      const auto& person = people[who[k]];
      ++load[who[k]];
      TaskAssignment t;
      t.task_id = "t_" + util::hash_parts({q.qud_id, person.annotator_id}).substr(0, 12);
      t.qud_id = q.qud_id;
      t.annotator_id = person.annotator_id;
      t.assigned_at = assigned_at;
      t.dual_group = group;
      t.sequence = plan.size();
      plan.push_back(std::move(t));
    }
  }
  if (unassigned) spdlog::info("{} QUDs have no eligible annotator and stay with the judge", unassigned);
  return plan;
}

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

AnnotationService::AnnotationService(corpus::CorpusStore& store, Roster roster, ServiceConfig config,
                                     const fs::path& workdir)
    : store_(store), roster_(std::move(roster)), config_(std::move(config)), workdir_(workdir) {
  const auto plan_path = workdir_ / "assignments.jsonl";
  if (fs::exists(plan_path)) {
    for (const auto& row : util::read_jsonl(plan_path)) tasks_.push_back(task_from_json(row));
  } else {
    tasks_ = plan_assignments(store_.quds(), roster_, config_, now_iso());
    std::vector<json> rows;
    for (const auto& t : tasks_) rows.push_back(to_json(t));
    util::write_jsonl(plan_path, rows);
  }
  for (std::size_t i = 0; i < tasks_.size(); ++i) task_index_[tasks_[i].task_id] = i;
  const auto events_path = workdir_ / "task_events.jsonl";
  for (const auto& e : util::read_jsonl(events_path))
    if (e.value("event", "") == "skip") skipped_.insert(e.at("task_id").get<std::string>());
  events_ = std::make_unique<util::JsonlAppender>(events_path);
}

TaskStatus AnnotationService::status_of(const TaskAssignment& t) const {
  if (store_.has_annotation(t.qud_id, t.annotator_id)) return TaskStatus::submitted;
  if (skipped_.count(t.task_id)) return TaskStatus::skipped;
  return TaskStatus::pending;
}

std::optional<TaskAssignment> AnnotationService::next_task(const std::string& annotator_id) const {
  if (!roster_.by_id(annotator_id)) throw Error(ErrorKind::UnknownAnnotator, annotator_id);
  std::lock_guard lock(mu_);
  for (const auto& t : tasks_) {
    if (t.annotator_id != annotator_id) continue;
    auto s = status_of(t);
    if (s == TaskStatus::pending) {
      auto out = t;
      out.status = s;
      return out;
    }
  }
  return std::nullopt;
}

std::vector<TaskAssignment> AnnotationService::tasks_for(const std::string& annotator_id) const {
  if (!roster_.by_id(annotator_id)) throw Error(ErrorKind::UnknownAnnotator, annotator_id);
  std::lock_guard lock(mu_);
  std::vector<TaskAssignment> out;
  for (const auto& t : tasks_)
    if (t.annotator_id == annotator_id) {
      out.push_back(t);
      out.back().status = status_of(t);
    }
  return out;
}

std::optional<TaskAssignment> AnnotationService::task(const std::string& task_id) const {
  std::lock_guard lock(mu_);
  auto it = task_index_.find(task_id);
  if (it == task_index_.end()) return std::nullopt;
  auto t = tasks_[it->second];
  t.status = status_of(t);
  return t;
}

TaskAssignment& AnnotationService::find_task(const std::string& task_id) {
  auto it = task_index_.find(task_id);
  if (it == task_index_.end()) throw Error(ErrorKind::UnknownTask, task_id);
  return tasks_[it->second];
}

AnnotationRecord annotation_from_payload(const std::string& qud_id, const std::string& annotator_id,
                                         const json& payload) {
  if (!payload.is_object()) throw Error(ErrorKind::IncompletePayload, "payload must be a JSON object");
  std::vector<std::string> missing;
  for (auto dim : corpus::kDimensions)
    if (!payload.contains(std::string(dim)) || payload[std::string(dim)].is_null()) missing.emplace_back(dim);
  if (!missing.empty())
    throw Error(ErrorKind::IncompletePayload,
                "missing " + [&] {
                  std::string s;
                  for (const auto& m : missing) s += (s.empty() ? "" : ", ") + m;
                  return s;
                }());
  json full = payload;
  full["qud_id"] = qud_id;
  full["annotator_id"] = annotator_id;
  full["source"] = "human_expert";
  if (full.contains("notes") && !full["notes"].is_string())
    throw Error(ErrorKind::VocabularyViolation, "notes must be a string");
  try {
    return full.get<AnnotationRecord>();
  } catch (const Error& e) {
    throw Error(ErrorKind::VocabularyViolation, e.what());
  }
}

util::Receipt AnnotationService::submit(const std::string& task_id, const std::string& annotator_id,
                                        const json& payload) {
  std::lock_guard lock(mu_);
  auto& t = find_task(task_id);
  if (t.annotator_id != annotator_id) throw Error(ErrorKind::Unauthorized, task_id + " belongs to another annotator");
  if (status_of(t) != TaskStatus::pending) throw Error(ErrorKind::TaskNotPending, task_id);
  auto record = annotation_from_payload(t.qud_id, annotator_id, payload);
  return store_.append(record);
}

void AnnotationService::skip(const std::string& task_id, const std::string& annotator_id, const std::string& reason) {
  std::lock_guard lock(mu_);
  auto& t = find_task(task_id);
  if (t.annotator_id != annotator_id) throw Error(ErrorKind::Unauthorized, task_id + " belongs to another annotator");
  if (status_of(t) != TaskStatus::pending) throw Error(ErrorKind::TaskNotPending, task_id);
  events_->append({{"schema", util::kSchema}, {"event", "skip"}, {"task_id", task_id}, {"reason", reason},
                   {"at", now_iso()}});
  skipped_.insert(task_id);
}

json AnnotationService::progress() const {
  std::lock_guard lock(mu_);
  json per = json::object();
  for (const auto& e : roster_.entries())
    per[e.annotator_id] = {{"assigned", 0}, {"submitted", 0}, {"skipped", 0}, {"pending", 0}};
  std::map<std::string, std::size_t> dual_done;
  for (const auto& t : tasks_) {
    const auto s = status_of(t);
    auto& p = per[t.annotator_id];
    p["assigned"] = p["assigned"].get<int>() + 1;
    p[std::string(to_string(s))] = p[std::string(to_string(s))].get<int>() + 1;
    if (t.dual_group) dual_done[*t.dual_group] += s == TaskStatus::submitted;
  }
  std::size_t complete = 0;
  for (const auto& [g, n] : dual_done) complete += n == 2;
  std::set<std::string> annotated;
  for (const auto& a : store_.annotations())
    if (a.source == corpus::AnnotationSource::human_expert) annotated.insert(a.qud_id);
  std::size_t originals = 0;
  for (const auto& q : store_.quds()) originals += q.provenance == corpus::Provenance::generated;
  return {{"annotators", per},
          {"dual_groups", {{"total", dual_done.size()}, {"complete", complete}}},
          {"corpus",
           {{"quds", originals},
            {"annotated", annotated.size()},
            {"annotated_fraction", originals ? static_cast<double>(annotated.size()) / originals : 0.0}}},
          {"blinding", config_.blinding},
          {"author_matching", config_.author_matching}};
}

json AnnotationService::qud_bundle(const std::string& qud_id) const {
  auto q = store_.find_qud(qud_id);
  if (!q) throw Error(ErrorKind::UnknownTask, "no QUD " + qud_id);
  json j = {{"qud_id", q->qud_id},
            {"paper_id", q->context.paper_id},
            {"figure_label", q->context.figure_label},
            {"title", q->context.title},
            {"abstract", q->context.abstract},
            {"caption", q->context.caption},
            {"question", q->question},
            {"answer", q->abstractive_answer},
            {"anchor_text", q->anchor_text},
            {"blinding", config_.blinding}};
  if (q->context.image_ref) {
    j["image_ref"] = *q->context.image_ref;
    j["image_url"] = "/asset/" + *q->context.image_ref;
  } else {
    j["image_ref"] = nullptr;
    j["image_url"] = nullptr;
  }
  return j;
}

json AnnotationService::schema() {
  using namespace corpus;
  json dims = json::array();
  auto add = [&](const char* name, std::vector<std::string> values) {
    dims.push_back({{"name", name}, {"values", values}});
  };
  add("salience", vocabulary<Salience>());
  add("figure_useful", vocabulary<FigureUseful>());
  add("answered_by_figure", vocabulary<AnsweredByFigure>());
  add("answer_correct", vocabulary<AnswerCorrect>());
  add("answer_quality", vocabulary<AnswerQuality>());
  add("figure_type", vocabulary<FigureType>());
  add("q_grammar", vocabulary<QGrammar>());
  return {{"schema", util::kSchema}, {"dimensions", dims}, {"notes", "optional free text"},
          {"actions", {"submit", "skip"}}};
}

}  // namespace mqud::annosvc
