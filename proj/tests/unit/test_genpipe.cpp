#include <doctest.h>

#include <random>

#include "mqud/backend/chat.hpp"
#include "mqud/genpipe/augment.hpp"
#include "mqud/genpipe/filter.hpp"
#include "mqud/genpipe/generate.hpp"
#include "mqud/paperstore/eligibility.hpp"
#include "mqud/paperstore/latex.hpp"
#include "mqud/util/error.hpp"
#include "support.hpp"

using namespace mqud;
using namespace mqud::genpipe;
using backend::json;
using mqud::testing::make_qud;
using mqud::testing::words;

namespace {

paperstore::PaperRecord paper_a() {
  return paperstore::mark_eligibility(paperstore::parse_paper(testing::fixture("papers/paper_a")),
                                      paperstore::default_section_lexicon());
}

json item(const std::string& q, const std::string& type = "cause", const std::string& source = "") {
  return {{"question", q}, {"answer", words(30)}, {"answer_source", source}, {"question_type", type}, {"difficulty", "medium"}};
}

std::string grounded_reply(bool g) { return json{{"grounded", g}, {"reason", g ? "ok" : "no"}}.dump(); }

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ConfigError;
}

// Brute-force longest common substring length.
std::size_t lcs_oracle(const std::string& a, const std::string& b) {
  std::size_t best = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.size(); ++j) {
      std::size_t k = 0;
      while (i + k < a.size() && j + k < b.size() && a[i + k] == b[j + k]) ++k;
      best = std::max(best, k);
    }
  return best;
}

}  // namespace

TEST_CASE("longest common substring against brute force") {
  std::mt19937 rng(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::string a, b;
    for (int i = 0, n = static_cast<int>(rng() % 30); i < n; ++i) a += static_cast<char>('a' + rng() % 3);
    for (int i = 0, n = static_cast<int>(rng() % 30); i < n; ++i) b += static_cast<char>('a' + rng() % 3);
    const auto l = longest_common_substring(a, b);
    CHECK(l.length == lcs_oracle(a, b));
    if (l.length) CHECK(a.substr(l.a_pos, l.length) == b.substr(l.b_pos, l.length));
  }
}

TEST_CASE("evidence maps to anchor character offsets") {
  const auto p = paper_a();
  const auto anchors = paperstore::anchor_paragraphs(p, "fig:scaling", 0);
  const std::string quote = "the sparse model grows almost linearly";
  const auto ev = map_evidence(quote + ". Unrelated words that never appear anywhere zzz.", anchors);
  REQUIRE(ev.spans.size() >= 1);
  const auto& s = ev.spans[0];
  CHECK(anchors[0].text.substr(s.begin, s.end - s.begin) == s.text);
  CHECK(s.text.find("grows almost linearly") != std::string::npos);
  CHECK(ev.coverage > 0.3);
  CHECK(ev.coverage < 1.0);
  CHECK(map_evidence("", anchors).coverage == 0.0);
}

TEST_CASE("generation builds validated records") {
  const auto p = paper_a();
  const auto& fig = *p.find_figure("fig:scaling");
  const auto anchors = paperstore::anchor_paragraphs(p, fig.label, 1);
  const auto ctx = make_context(p, fig, nullptr);
  json reply = json::array();
  for (int i = 0; i < 6; ++i)
    reply.push_back(item("Why does the curve bend " + std::to_string(i) + "?", i % 2 ? " Comparison " : "cause",
                         "the sparse model grows almost linearly"));
  backend::ScriptedBackend s({"Here you go:\n" + reply.dump()});
  const auto out = generate_candidates(s, p, fig, ctx, anchors);
  REQUIRE(out.size() == 6);
  CHECK(out[1].qud_type == corpus::QudType::comparison);
  for (const auto& r : out) {
    CHECK_NOTHROW(corpus::validate(r));
    CHECK(r.provenance == corpus::Provenance::generated);
    CHECK_FALSE(r.grounded.has_value());
  }
  const auto req = s.requests()[0];
  CHECK(req.text_slots.at("figure_number") == "3");
  CHECK(req.text_slots.at("n_questions") == "6");
  CHECK(req.text_slots.at("other_figures").find("Figure 2: ROUGE-L") != std::string::npos);
  CHECK(req.decoding["temperature"] == 0.7);
}

TEST_CASE("generation re-asks once then gives up") {
  const auto p = paper_a();
  const auto& fig = *p.find_figure("fig:scaling");
  const auto anchors = paperstore::anchor_paragraphs(p, fig.label, 1);
  const auto ctx = make_context(p, fig, nullptr);
  json good = json::array({item("Why?"), item("How?"), item("What?"), item("Which?"), item("When?")});
  backend::ScriptedBackend once({"not json", good.dump()});
  CHECK(generate_candidates(once, p, fig, ctx, anchors).size() == 5);
  CHECK_FALSE(once.requests()[1].retry_note.empty());
  backend::ScriptedBackend never({"not json", "[{\"question\": 1}]"});
  CHECK(kind_of([&] { generate_candidates(never, p, fig, ctx, anchors); }) == ErrorKind::UnparseableResponse);
  backend::ScriptedBackend bad_type({json::array({item("Why?", "opinion")}).dump()});
  CHECK(kind_of([&] { generate_candidates(bad_type, p, fig, ctx, anchors); }) == ErrorKind::TypeOutOfVocabulary);
  GenerateOptions opts;
  opts.n = 8;
  backend::ScriptedBackend unused;
  CHECK(kind_of([&] { generate_candidates(unused, p, fig, ctx, anchors, opts); }) == ErrorKind::ConfigError);
  CHECK(kind_of([&] { generate_candidates(unused, p, *p.find_figure("fig:overview"), ctx, anchors); }) ==
        ErrorKind::InvariantViolation);
}

TEST_CASE("length boundaries are inclusive") {
  CHECK_FALSE(length_ok(words(19)));
  CHECK(length_ok(words(20)));
  CHECK(length_ok(words(120)));
  CHECK_FALSE(length_ok(words(121)));
}

TEST_CASE("figure reference test uses visual terms and caption words") {
  CHECK(references_figure("Why do the bars differ?", "Scores."));
  CHECK(references_figure("Why does the curve bend?", "Scores."));
  CHECK(references_figure("Why does memory grow?", "Peak memory by length."));
  CHECK_FALSE(references_figure("Why is it so?", "Peak memory by length."));
}

TEST_CASE("filter applies all four checks") {
  std::vector<corpus::QudRecord> in;
  auto a = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend upward?", words(30));
  auto dup = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend upward here?", words(30));
  auto short_ans = make_qud("p", "f", corpus::QudType::cause, "Why is the curve flat?", words(10));
  auto no_fig = make_qud("p", "f", corpus::QudType::cause, "Why is it so?", words(30));
  auto ungrounded = make_qud("p", "f", corpus::QudType::cause, "How does the legend read?", words(30));
  auto other_fig = make_qud("p", "g", corpus::QudType::cause, "Why does the curve bend upward?", words(30));
  in = {a, dup, short_ans, no_fig, ungrounded, other_fig};
  backend::ScriptedBackend s;
  for (int i = 0; i < 6; ++i) s.push(grounded_reply(i != 4));
  const auto r = filter_candidates(s, in);
  REQUIRE(r.reports.size() == 6);
  CHECK(r.reports[0].kept);
  CHECK(r.reports[1].duplicate_of == a.qud_id);
  CHECK_FALSE(r.reports[2].length_ok);
  CHECK_FALSE(r.reports[3].references_figure);
  CHECK_FALSE(r.reports[4].grounded);
  CHECK(r.reports[5].kept);  // dedup is per figure
  REQUIRE(r.kept.size() == 2);
  for (const auto& k : r.kept) CHECK(k.grounded == true);
}

TEST_CASE("records without evidence are not grounded") {
  auto a = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend?", words(30));
  a.extractive_evidence.clear();
  backend::ScriptedBackend s({grounded_reply(true)});
  const auto r = filter_candidates(s, {a});
  CHECK_FALSE(r.reports[0].grounded);
  CHECK(r.kept.empty());
}

TEST_CASE("filter runs the same in parallel") {
  std::vector<corpus::QudRecord> in;
  for (int i = 0; i < 20; ++i)
    in.push_back(make_qud("p", "f" + std::to_string(i % 4), corpus::QudType::extent,
                          "How far does curve " + std::to_string(i) + " reach?", words(15 + i * 3, "a")));
  backend::MockBackend m;
  FilterOptions serial, par;
  par.workers = 4;
  const auto a = filter_candidates(m, in, serial);
  const auto b = filter_candidates(m, in, par);
  CHECK(a.reports == b.reports);
}

TEST_CASE("non-answers") {
  CHECK(is_non_answer("Not mentioned in the text."));
  CHECK(is_non_answer("I cannot determine this from the source."));
  CHECK(is_non_answer("N/A"));
  CHECK_FALSE(is_non_answer(words(25)));
}

TEST_CASE("rephrase keeps grounded variants and logs the rest") {
  auto parent = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend?", words(30));
  json variants = json::array({{{"question", "What makes the curve bend?"}, {"answer", words(25)}},
                               {{"question", "Why is there a bend in the curve?"}, {"answer", "Not mentioned in the text."}}});
  backend::ScriptedBackend s({variants.dump(), grounded_reply(true)});
  const auto r = rephrase_augment(s, parent, 2);
  REQUIRE(r.accepted.size() == 1);
  REQUIRE(r.rejected.size() == 1);
  CHECK(r.accepted[0].parent_id == parent.qud_id);
  CHECK(r.accepted[0].provenance == corpus::Provenance::rephrase_variant);
  CHECK(r.accepted[0].grounded == true);
  CHECK(r.rejected[0].grounded == false);
  CHECK(r.log.size() == 1);
  CHECK(r.log[0].rfind("VariantRejected", 0) == 0);
  CHECK_NOTHROW(corpus::validate(r.accepted[0]));

  backend::ScriptedBackend none;
  CHECK(rephrase_augment(none, parent, 0).accepted.empty());
  CHECK(none.requests().empty());
}

TEST_CASE("a variant equal to its parent is rejected") {
  auto parent = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend?", words(30));
  json variants = json::array({{{"question", "why does the curve bend"}, {"answer", words(25)}}});
  backend::ScriptedBackend s({variants.dump()});
  const auto r = rephrase_augment(s, parent, 1);
  CHECK(r.accepted.empty());
  CHECK(r.rejected.size() == 1);
}
