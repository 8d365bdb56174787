#include <doctest.h>

#include <thread>

#include "mqud/backend/cache.hpp"
#include "mqud/backend/chat.hpp"
#include "mqud/backend/scoring.hpp"
#include "mqud/backend/throttle.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"
#include "mqud/util/parallel.hpp"
#include "support.hpp"

using namespace mqud;
using namespace mqud::backend;

namespace {

BackendRequest grounding_request(const std::string& answer) {
  BackendRequest r;
  r.template_id = TemplateId::grounding_check;
  r.text_slots = {{"caption", "Peak memory vs length."},
                  {"source_text", "The dense model runs out of memory beyond sixteen thousand tokens."},
                  {"question", "Why does the curve stop?"},
                  {"answer", answer}};
  r.decoding = default_decoding(r.template_id);
  return r;
}

}  // namespace

TEST_CASE("templates render every slot") {
  for (auto id : {TemplateId::qud_generate, TemplateId::rephrase, TemplateId::grounding_check, TemplateId::judge}) {
    BackendRequest r;
    r.template_id = id;
    for (const auto& s : template_slots(id)) r.text_slots[s] = "<<" + s + ">>";
    const auto text = render(r);
    for (const auto& s : template_slots(id)) CHECK(text.find("<<" + s + ">>") != std::string::npos);
    CHECK(text.find('{' + template_slots(id)[0] + '}') == std::string::npos);
    CHECK(template_from_string(to_string(id)) == id);
  }
}

TEST_CASE("render rejects missing and unknown slots") {
  auto r = grounding_request("x");
  r.text_slots.erase("answer");
  CHECK_THROWS_AS(render(r), Error);
  r = grounding_request("x");
  r.text_slots["extra"] = "y";
  CHECK_THROWS_AS(render(r), Error);
  r = grounding_request("x");
  r.retry_note = "Reply with JSON only.";
  CHECK(render(r).ends_with("Reply with JSON only."));
}

TEST_CASE("request keys are stable and content sensitive") {
  const auto a = grounding_request("one");
  CHECK(request_key(a) == request_key(grounding_request("one")));
  CHECK(request_key(a) != request_key(grounding_request("two")));
  auto hot = a;
  hot.decoding["temperature"] = 0.7;
  CHECK(request_key(a) != request_key(hot));
}

TEST_CASE("default decoding") {
  CHECK(default_decoding(TemplateId::qud_generate)["temperature"] == 0.7);
  CHECK(default_decoding(TemplateId::rephrase)["temperature"] == 0.7);
  CHECK(default_decoding(TemplateId::grounding_check)["temperature"] == 0.0);
  CHECK(default_decoding(TemplateId::judge)["temperature"] == 0.0);
}

TEST_CASE("json replies are found inside fences and prose") {
  CHECK(parse_json_reply(R"([{"a":1}])")->at(0)["a"] == 1);
  CHECK(parse_json_reply("Sure!\n```json\n{\"grounded\": true}\n```\nDone.")->at("grounded") == true);
  CHECK(parse_json_reply("prefix {\"a\": {\"b\": 2}} suffix")->at("a")["b"] == 2);
  CHECK_FALSE(parse_json_reply("no json here").has_value());
  CHECK_FALSE(parse_json_reply("{broken").has_value());
}

TEST_CASE("cache persists sorted rows and reloads") {
  testing::TempDir dir("cache");
  const auto p = dir.path() / "c.jsonl";
  {
    ResponseCache c(p);
    c.put("chat", "k2", {{"r", 2}}, "two");
    c.put("chat", "k1", {{"r", 1}}, "one");
    c.put("score", "k1", {}, {{"mean_nll", 1.0}});
    c.save();
  }
  ResponseCache c(p);
  CHECK(c.size() == 3);
  CHECK(c.get("chat", "k1") == nlohmann::json("one"));
  CHECK_FALSE(c.get("chat", "k3").has_value());
  const auto rows = util::read_jsonl(p);
  CHECK(rows[0]["key"] == "k1");
  CHECK(rows[0]["schema"] == util::kSchema);
}

TEST_CASE("record then replay returns the same reply") {
  testing::TempDir dir("replay");
  ResponseCache cache(dir.path() / "c.jsonl");
  MockBackend mock;
  RecordingBackend rec(mock, cache);
  const auto req = grounding_request("The dense model runs out of memory beyond sixteen thousand tokens.");
  const auto live = rec.complete(req);
  ReplayBackend replay(cache);
  CHECK(replay.complete(req) == live);
  try {
    replay.complete(grounding_request("something never asked"));
    FAIL("expected a miss");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnavailable);
  }
}

TEST_CASE("scripted backend is FIFO and fails when exhausted") {
  ScriptedBackend s({"a", "b"});
  CHECK(s.complete(grounding_request("x")) == "a");
  CHECK(s.complete(grounding_request("y")) == "b");
  CHECK_THROWS_AS(s.complete(grounding_request("z")), Error);
  CHECK(s.requests().size() == 3);
}

TEST_CASE("mock grounding follows token coverage") {
  MockBackend m;
  auto yes = parse_json_reply(m.complete(grounding_request("The dense model runs out of memory beyond sixteen thousand tokens.")));
  CHECK(yes->at("grounded") == true);
  auto no = parse_json_reply(m.complete(grounding_request("Quantum chromodynamics explains lattice gluon behaviour entirely.")));
  CHECK(no->at("grounded") == false);
  CHECK(m.complete(grounding_request("abc")) == m.complete(grounding_request("abc")));
}

TEST_CASE("throttle bounds requests in flight") {
  Throttle t(2, 0.0, 1.0);
  MockBackend mock;
  ThrottledBackend th(mock, t);
  util::parallel_for(16, 6, [&](std::size_t i) {
    th.complete(grounding_request("answer " + std::to_string(i)));
    std::this_thread::sleep_for(std::chrono::milliseconds(2));
  });
  CHECK(t.peak_in_flight() <= 2);
  CHECK(t.in_flight() == 0);
}

TEST_CASE("throttle rate limit spaces requests") {
  Throttle t(4, 200.0, 1.0);
  const auto start = std::chrono::steady_clock::now();
  for (int i = 0; i < 5; ++i) auto slot = t.acquire();
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  CHECK(secs >= 4.0 / 200.0 * 0.9);
}

TEST_CASE("mock scoring is deterministic and image sensitive") {
  const std::string own = "sha256:" + std::string(64, '1');
  const std::string other = "sha256:" + std::string(64, '2');
  MockScoringBackend m("m", {{own, "caption a"}, {other, "caption b"}});
  ScoreRequest r{"T", "A", "caption a", own, "Why does the curve bend?"};
  const auto mm = m.score(r);
  CHECK(mm.token_nlls.size() > 0);
  CHECK(m.score(r).mean_nll == mm.mean_nll);
  r.image_ref.reset();
  const auto to = m.score(r);
  r.image_ref = other;
  const auto swapped = m.score(r);
  CHECK(to.token_nlls.size() == mm.token_nlls.size());
  CHECK(mm.mean_nll < to.mean_nll);
  CHECK(swapped.mean_nll > mm.mean_nll);
  CHECK(score_from_json(to_json(mm)).token_nlls == mm.token_nlls);
}

TEST_CASE("scoring replay by request") {
  testing::TempDir dir("score");
  ResponseCache cache(dir.path() / "c.jsonl");
  MockScoringBackend m("m");
  RecordingScoringBackend rec(m, cache);
  ScoreRequest r{"T", "A", "cap", std::nullopt, "Q?"};
  const auto a = rec.score(r);
  ReplayScoringBackend replay(cache, "m");
  CHECK(replay.score(r).mean_nll == a.mean_nll);
  r.question = "Other?";
  CHECK_THROWS_AS(replay.score(r), Error);
}

TEST_CASE("live backend without a server is unavailable") {
  LiveConfig cfg;
  cfg.base_url = "http://127.0.0.1:1";
  cfg.timeout_seconds = 1;
  LiveBackend live(cfg, [](const std::string&) { return std::nullopt; });
  try {
    live.complete(grounding_request("x"));
    FAIL("expected BackendUnavailable");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::BackendUnavailable);
  }
}
