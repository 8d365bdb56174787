#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "mqud/annosvc/http.hpp"
#include "mqud/annosvc/service.hpp"
#include "mqud/corpus/store.hpp"
#include "mqud/paperstore/assets.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"
#include "support.hpp"

using namespace mqud;
using namespace mqud::annosvc;
using mqud::testing::make_qud;
namespace fs = std::filesystem;

namespace {

Roster roster3() {
  return Roster({{"alice", "tok-a", {"p1", "p2"}}, {"bob", "tok-b", {"p1"}}, {"carol", "tok-c", {"p2", "p3"}}});
}

std::vector<corpus::QudRecord> quds(int n) {
  std::vector<corpus::QudRecord> out;
  for (int i = 0; i < n; ++i)
    out.push_back(make_qud("p" + std::to_string(1 + i % 3), "f", corpus::kQudTypes[i % 6], "Q" + std::to_string(i) + "?"));
  return out;
}

json full_payload() {
  return {{"salience", "salient"},          {"figure_useful", "useful"},  {"answered_by_figure", "no"},
          {"answer_correct", "acceptable"}, {"answer_quality", "high"},   {"figure_type", "data"},
          {"q_grammar", "acceptable"},      {"notes", "fine"}};
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ConfigError;
}

}  // namespace

TEST_CASE("roster loads and looks up by id and token") {
  testing::TempDir dir("roster");
  util::write_text_file(dir.path() / "r.json",
                        R"({"annotators": [{"annotator_id": "a", "token": "t", "papers": ["p1"]}]})");
  const auto r = Roster::load(dir.path() / "r.json");
  REQUIRE(r.entries().size() == 1);
  CHECK(r.by_token("t")->annotator_id == "a");
  CHECK(r.by_id("a")->papers.count("p1"));
  CHECK(r.by_token("x") == nullptr);
}

TEST_CASE("assignment respects author matching and dual size") {
  ServiceConfig cfg;
  cfg.dual_size = 4;
  const auto plan = plan_assignments(quds(12), roster3(), cfg, "2026-01-01T00:00:00Z");
  std::map<std::string, std::set<std::string>> papers = {{"alice", {"p1", "p2"}}, {"bob", {"p1"}}, {"carol", {"p2", "p3"}}};
  std::map<std::string, int> per_qud;
  std::set<std::string> groups;
  const auto qs = quds(12);
  for (const auto& t : plan) {
    auto q = std::find_if(qs.begin(), qs.end(), [&](const corpus::QudRecord& r) { return r.qud_id == t.qud_id; });
    CHECK(papers[t.annotator_id].count(q->context.paper_id));
    ++per_qud[t.qud_id];
    if (t.dual_group) groups.insert(*t.dual_group);
  }
  CHECK(per_qud.size() == 12);
  CHECK(groups.size() == 4);
  CHECK(plan.size() == 16);
  CHECK(plan_assignments(quds(12), roster3(), cfg, "x").size() == plan.size());
  // With matching off, everyone can take everything.
  cfg.author_matching = false;
  cfg.dual_size = 0;
  CHECK(plan_assignments(quds(12), roster3(), cfg, "x").size() == 12);
}

TEST_CASE("payload validation") {
  CHECK(annotation_from_payload("q", "a", full_payload()).figure_type == corpus::FigureType::data);
  auto p = full_payload();
  p.erase("salience");
  CHECK(kind_of([&] { annotation_from_payload("q", "a", p); }) == ErrorKind::IncompletePayload);
  p = full_payload();
  p["salience"] = "very";
  CHECK(kind_of([&] { annotation_from_payload("q", "a", p); }) == ErrorKind::VocabularyViolation);
}

TEST_CASE("service lifecycle: next, submit, skip, restart") {
  testing::TempDir dir("svc");
  auto qs = quds(6);
  {
    corpus::CorpusStore store(dir.path());
    for (const auto& q : qs) store.append(q);
    ServiceConfig cfg;
    cfg.dual_size = 0;
    AnnotationService svc(store, roster3(), cfg, dir.path());
    auto t = svc.next_task("bob");
    REQUIRE(t);
    CHECK(t->status == TaskStatus::pending);
    CHECK(kind_of([&] { svc.submit(t->task_id, "alice", full_payload()); }) == ErrorKind::Unauthorized);
    auto rc = svc.submit(t->task_id, "bob", full_payload());
    CHECK(rc.line == 1);
    CHECK(svc.task(t->task_id)->status == TaskStatus::submitted);
    CHECK(kind_of([&] { svc.submit(t->task_id, "bob", full_payload()); }) == ErrorKind::TaskNotPending);
    auto t2 = svc.next_task("bob");
    if (t2) {
      svc.skip(t2->task_id, "bob", "not my area");
      CHECK(svc.task(t2->task_id)->status == TaskStatus::skipped);
    }
    CHECK(kind_of([&] { svc.next_task("mallory"); }) == ErrorKind::UnknownAnnotator);
    CHECK(kind_of([&] { svc.submit("t_missing", "bob", full_payload()); }) == ErrorKind::UnknownTask);
    CHECK(svc.progress()["annotators"]["bob"]["submitted"] == 1);
    const auto stored = store.annotations_for(t->qud_id);
    REQUIRE(stored.size() == 1);
    CHECK(stored[0].annotator_id == "bob");
    CHECK(stored[0].notes == "fine");
  }
  // A restart keeps the plan and derives status from disk.
  corpus::CorpusStore store(dir.path());
  const auto before = util::read_text_file(dir.path() / "assignments.jsonl");
  AnnotationService svc(store, roster3(), ServiceConfig{}, dir.path());
  CHECK(util::read_text_file(dir.path() / "assignments.jsonl") == before);
  std::size_t done = 0, skipped = 0;
  for (const auto& t : svc.tasks_for("bob")) {
    done += t.status == TaskStatus::submitted;
    skipped += t.status == TaskStatus::skipped;
  }
  CHECK(done == 1);
  CHECK(skipped <= 1);
}

TEST_CASE("schema lists seven dimensions") {
  const auto s = AnnotationService::schema();
  CHECK(s["dimensions"].size() == 7);
  CHECK(s["dimensions"][0]["name"] == "salience");
}

TEST_CASE("HTTP round trip") {
  testing::TempDir dir("http");
  auto qs = quds(3);
  corpus::CorpusStore store(dir.path());
  for (const auto& q : qs) store.append(q);
  ServiceConfig cfg;
  cfg.dual_size = 0;
  AnnotationService svc(store, roster3(), cfg, dir.path());
  paperstore::AssetStore assets(dir.path() / "assets");
  const auto png = util::read_text_file(testing::fixture("papers/paper_b/figs/spectrum.png"));
  const auto hash = assets.put(png, ".png");
  fs::create_directories(dir.path() / "ui");
  util::write_text_file(dir.path() / "ui/index.html", "<html>ui</html>");
  HttpOptions opts;
  opts.assets = &assets;
  opts.ui_dir = dir.path() / "ui";
  auto server = make_server(svc, opts);
  const int port = server->bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread th([&] { server->listen_after_bind(); });
  struct Stop {
    httplib::Server& s;
    std::thread& t;
    ~Stop() {
      s.stop();
      t.join();
    }
  } stop{*server, th};
  server->wait_until_ready();

  httplib::Client c("127.0.0.1", port);
  const httplib::Headers bob = {{"Authorization", "Bearer tok-a"}};  // alice holds the first task
  CHECK(c.Get("/schema")->status == 200);
  CHECK(c.Get("/task/next")->status == 401);
  CHECK(c.Get("/task/next", {{"Authorization", "Bearer nope"}})->status == 401);
  auto next = c.Get("/task/next", bob);
  REQUIRE(next->status == 200);
  const auto task = json::parse(next->body);
  CHECK(task["bundle"]["question"].is_string());
  const std::string id = task["task_id"];
  auto partial = full_payload();
  partial.erase("q_grammar");
  CHECK(c.Post("/task/" + id + "/submit", bob, partial.dump(), "application/json")->status == 422);
  auto bad = full_payload();
  bad["figure_type"] = "chart";
  CHECK(c.Post("/task/" + id + "/submit", bob, bad.dump(), "application/json")->status == 422);
  auto ok = c.Post("/task/" + id + "/submit", bob, full_payload().dump(), "application/json");
  REQUIRE(ok->status == 200);
  CHECK(json::parse(ok->body)["line"] == 1);
  CHECK(c.Post("/task/" + id + "/submit", bob, full_payload().dump(), "application/json")->status == 409);
  CHECK(c.Post("/task/t_nothing/skip", bob, "{}", "application/json")->status == 404);
  // The stored record matches what was sent.
  const auto stored = store.annotations_for(task["qud_id"]);
  REQUIRE(stored.size() == 1);
  for (auto dim : corpus::kDimensions) CHECK(stored[0].dimension(dim) == full_payload()[std::string(dim)]);
  auto mine = json::parse(c.Get("/tasks/mine", bob)->body);
  CHECK(mine["tasks"].size() >= 1);
  CHECK(c.Get("/progress", bob)->status == 200);
  CHECK(c.Get("/qud/q_nope", bob)->status == 404);
  auto img = c.Get("/asset/" + hash);
  REQUIRE(img->status == 200);
  CHECK(img->body == png);
  CHECK(img->get_header_value("Content-Type") == "image/png");
  CHECK(c.Get("/asset/sha256:00")->status == 404);
  auto ui = c.Get("/index.html");
  REQUIRE(ui);
  CHECK(ui->body == "<html>ui</html>");
}

TEST_CASE("status mapping") {
  CHECK(http_status(ErrorKind::Unauthorized) == 401);
  CHECK(http_status(ErrorKind::UnknownTask) == 404);
  CHECK(http_status(ErrorKind::TaskNotPending) == 409);
  CHECK(http_status(ErrorKind::IncompletePayload) == 422);
  CHECK(http_status(ErrorKind::BackendUnavailable) == 500);
}
