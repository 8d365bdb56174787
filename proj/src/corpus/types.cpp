#include "mqud/corpus/types.hpp"

#include <algorithm>
#include <set>
#include <utility>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"
#include "mqud/util/text.hpp"

namespace mqud::corpus {

namespace {

template <typename E>
struct Names;

#define MQUD_ENUM_NAMES(E, ...)                                                        \
  template <>                                                                          \
  struct Names<E> {                                                                    \
    static constexpr std::pair<E, std::string_view> table[] = {__VA_ARGS__};           \
  };

MQUD_ENUM_NAMES(QudType, {QudType::cause, "cause"}, {QudType::comparison, "comparison"},
                {QudType::extent, "extent"}, {QudType::consequence, "consequence"},
                {QudType::procedural, "procedural"}, {QudType::concept_, "concept"})
MQUD_ENUM_NAMES(Difficulty, {Difficulty::medium, "medium"}, {Difficulty::hard, "hard"})
MQUD_ENUM_NAMES(Provenance, {Provenance::generated, "generated"}, {Provenance::rephrase_variant, "rephrase_variant"})
MQUD_ENUM_NAMES(AnnotationSource, {AnnotationSource::human_expert, "human_expert"},
                {AnnotationSource::llm_judge, "llm_judge"})
MQUD_ENUM_NAMES(Salience, {Salience::salient, "salient"}, {Salience::not_salient, "not_salient"})
MQUD_ENUM_NAMES(FigureUseful, {FigureUseful::useful, "useful"}, {FigureUseful::not_useful, "not_useful"})
MQUD_ENUM_NAMES(AnsweredByFigure, {AnsweredByFigure::yes, "yes"}, {AnsweredByFigure::no, "no"})
MQUD_ENUM_NAMES(AnswerCorrect, {AnswerCorrect::acceptable, "acceptable"},
                {AnswerCorrect::not_acceptable, "not_acceptable"})
MQUD_ENUM_NAMES(AnswerQuality, {AnswerQuality::high, "high"}, {AnswerQuality::low, "low"})
MQUD_ENUM_NAMES(FigureType, {FigureType::result, "result"}, {FigureType::data, "data"},
                {FigureType::method, "method"}, {FigureType::comparison, "comparison"},
                {FigureType::other, "other"})
MQUD_ENUM_NAMES(QGrammar, {QGrammar::acceptable, "acceptable"}, {QGrammar::not_acceptable, "not_acceptable"})

#undef MQUD_ENUM_NAMES

template <typename E>
std::string_view name_of(E v) {
  for (const auto& [e, n] : Names<E>::table)
    if (e == v) return n;
  return "?";
}

template <typename E>
E require_enum(const json& j, const char* key, const char* record) {
  if (!j.contains(key) || !j[key].is_string())
    throw Error(ErrorKind::InvariantViolation, std::string(record) + " missing field '" + key + "'");
  const auto s = j[key].get<std::string>();
  auto v = parse_enum<E>(s);
  if (!v) throw Error(ErrorKind::InvariantViolation, std::string(record) + " field '" + key + "' has value '" + s + "'");
  return *v;
}

}  // namespace

template <typename E>
std::optional<E> parse_enum(std::string_view s) {
  for (const auto& [e, n] : Names<E>::table)
    if (n == s) return e;
  return std::nullopt;
}

template <typename E>
std::vector<std::string> vocabulary() {
  std::vector<std::string> out;
  for (const auto& entry : Names<E>::table) out.emplace_back(entry.second);
  return out;
}

#define MQUD_ENUM_API(E)                                                      \
  std::string_view to_string(E v) { return name_of(v); }                      \
  template std::optional<E> parse_enum<E>(std::string_view);                  \
  template std::vector<std::string> vocabulary<E>();

MQUD_ENUM_API(QudType)
MQUD_ENUM_API(Difficulty)
MQUD_ENUM_API(Provenance)
MQUD_ENUM_API(AnnotationSource)
MQUD_ENUM_API(Salience)
MQUD_ENUM_API(FigureUseful)
MQUD_ENUM_API(AnsweredByFigure)
MQUD_ENUM_API(AnswerCorrect)
MQUD_ENUM_API(AnswerQuality)
MQUD_ENUM_API(FigureType)
MQUD_ENUM_API(QGrammar)

#undef MQUD_ENUM_API

std::string AnnotationRecord::dimension(std::string_view name) const {
  if (name == "salience") return std::string(to_string(salience));
  if (name == "figure_useful") return std::string(to_string(figure_useful));
  if (name == "answered_by_figure") return std::string(to_string(answered_by_figure));
  if (name == "answer_correct") return std::string(to_string(answer_correct));
  if (name == "answer_quality") return std::string(to_string(answer_quality));
  if (name == "figure_type") return std::string(to_string(figure_type));
  if (name == "q_grammar") return std::string(to_string(q_grammar));
  throw Error(ErrorKind::InvariantViolation, "unknown dimension '" + std::string(name) + "'");
}

std::string make_qud_id(const std::string& paper_id, const std::string& figure_label, const std::string& question) {
  return "q_" + util::hash_parts({paper_id, figure_label, text::normalize_question(question)}).substr(0, 16);
}

void validate(const QudRecord& r) {
  auto fail = [&](const std::string& why) { throw Error(ErrorKind::InvariantViolation, r.qud_id + ": " + why); };
  if (r.qud_id.empty()) fail("empty qud_id");
  if (r.question.empty()) fail("empty question");
  if (r.abstractive_answer.empty()) fail("empty answer");
  const auto& c = r.context;
  if (c.paper_id.empty() || c.figure_label.empty() || c.title.empty() || c.abstract.empty() || c.caption.empty())
    fail("trigger context has empty fields");
  if ((r.provenance == Provenance::rephrase_variant) != r.parent_id.has_value())
    fail("provenance rephrase_variant must come with parent_id and vice versa");
  for (const auto& span : r.extractive_evidence) {
    if (span.begin > span.end) fail("evidence span with begin > end");
    auto src = std::find_if(r.anchor_sources.begin(), r.anchor_sources.end(), [&](const AnchorSource& a) {
      return a.section == span.section && a.paragraph == span.paragraph;
    });
    if (src == r.anchor_sources.end()) fail("evidence span outside the anchor paragraphs");
    if (span.end > src->length) fail("evidence span exceeds its paragraph");
    if (!span.text.empty() && r.anchor_text.find(span.text) == std::string::npos)
      fail("evidence text not found in anchor_text");
  }
}

void validate(const AnnotationRecord& r) {
  if (r.qud_id.empty()) throw Error(ErrorKind::InvariantViolation, "annotation with empty qud_id");
  if (r.annotator_id.empty()) throw Error(ErrorKind::InvariantViolation, r.qud_id + ": annotation with empty annotator_id");
}

void to_json(json& j, const TriggerContext& v) {
  j = json{{"paper_id", v.paper_id}, {"figure_label", v.figure_label}, {"title", v.title},
           {"abstract", v.abstract}, {"caption", v.caption}};
  j["image_ref"] = v.image_ref ? json(*v.image_ref) : json(nullptr);
}

void from_json(const json& j, TriggerContext& v) {
  v.paper_id = j.at("paper_id").get<std::string>();
  v.figure_label = j.at("figure_label").get<std::string>();
  v.title = j.at("title").get<std::string>();
  v.abstract = j.at("abstract").get<std::string>();
  v.caption = j.at("caption").get<std::string>();
  if (j.contains("image_ref") && !j["image_ref"].is_null())
    v.image_ref = j["image_ref"].get<std::string>();
  else
    v.image_ref.reset();
}

void to_json(json& j, const EvidenceSpan& v) {
  j = json{{"section", v.section}, {"paragraph", v.paragraph}, {"begin", v.begin}, {"end", v.end}, {"text", v.text}};
}

void from_json(const json& j, EvidenceSpan& v) {
  v.section = j.at("section").get<int>();
  v.paragraph = j.at("paragraph").get<int>();
  v.begin = j.at("begin").get<std::size_t>();
  v.end = j.at("end").get<std::size_t>();
  v.text = j.value("text", "");
}

void to_json(json& j, const QudRecord& v) {
  json sources = json::array();
  for (const auto& a : v.anchor_sources)
    sources.push_back({{"section", a.section}, {"paragraph", a.paragraph}, {"length", a.length}});
  j = json{{"schema", util::kSchema},
           {"qud_id", v.qud_id},
           {"context", v.context},
           {"question", v.question},
           {"abstractive_answer", v.abstractive_answer},
           {"extractive_evidence", v.extractive_evidence},
           {"anchor_text", v.anchor_text},
           {"anchor_sources", sources},
           {"qud_type", to_string(v.qud_type)},
           {"difficulty", to_string(v.difficulty)},
           {"provenance", to_string(v.provenance)},
           {"evidence_coverage", v.evidence_coverage},
           {"evidence_needs_review", v.evidence_needs_review}};
  j["parent_id"] = v.parent_id ? json(*v.parent_id) : json(nullptr);
  j["grounded"] = v.grounded ? json(*v.grounded) : json(nullptr);
}

void from_json(const json& j, QudRecord& v) {
  v.qud_id = j.at("qud_id").get<std::string>();
  v.context = j.at("context").get<TriggerContext>();
  v.question = j.at("question").get<std::string>();
  v.abstractive_answer = j.at("abstractive_answer").get<std::string>();
  v.extractive_evidence = j.value("extractive_evidence", std::vector<EvidenceSpan>{});
  v.anchor_text = j.value("anchor_text", "");
  v.anchor_sources.clear();
  for (const auto& a : j.value("anchor_sources", json::array()))
    v.anchor_sources.push_back({a.at("section").get<int>(), a.at("paragraph").get<int>(), a.at("length").get<std::size_t>()});
  auto type = parse_enum<QudType>(j.at("qud_type").get<std::string>());
  if (!type) throw Error(ErrorKind::TypeOutOfVocabulary, "qud_type '" + j.at("qud_type").get<std::string>() + "'");
  v.qud_type = *type;
  auto diff = parse_enum<Difficulty>(j.at("difficulty").get<std::string>());
  if (!diff) throw Error(ErrorKind::TypeOutOfVocabulary, "difficulty '" + j.at("difficulty").get<std::string>() + "'");
  v.difficulty = *diff;
  v.provenance = parse_enum<Provenance>(j.value("provenance", "generated")).value_or(Provenance::generated);
  if (j.contains("parent_id") && !j["parent_id"].is_null())
    v.parent_id = j["parent_id"].get<std::string>();
  else
    v.parent_id.reset();
  if (j.contains("grounded") && !j["grounded"].is_null())
    v.grounded = j["grounded"].get<bool>();
  else
    v.grounded.reset();
  v.evidence_coverage = j.value("evidence_coverage", 0.0);
  v.evidence_needs_review = j.value("evidence_needs_review", false);
}

void to_json(json& j, const AnnotationRecord& v) {
  j = json{{"schema", util::kSchema},
           {"qud_id", v.qud_id},
           {"annotator_id", v.annotator_id},
           {"source", to_string(v.source)},
           {"salience", to_string(v.salience)},
           {"figure_useful", to_string(v.figure_useful)},
           {"answered_by_figure", to_string(v.answered_by_figure)},
           {"answer_correct", to_string(v.answer_correct)},
           {"answer_quality", to_string(v.answer_quality)},
           {"figure_type", to_string(v.figure_type)},
           {"q_grammar", to_string(v.q_grammar)},
           {"notes", v.notes}};
}

void from_json(const json& j, AnnotationRecord& v) {
  constexpr const char* kRecord = "annotation";
  if (!j.contains("qud_id") || !j["qud_id"].is_string())
    throw Error(ErrorKind::InvariantViolation, "annotation missing qud_id");
  if (!j.contains("annotator_id") || !j["annotator_id"].is_string())
    throw Error(ErrorKind::InvariantViolation, "annotation missing annotator_id");
  v.qud_id = j["qud_id"].get<std::string>();
  v.annotator_id = j["annotator_id"].get<std::string>();
  v.source = require_enum<AnnotationSource>(j, "source", kRecord);
  v.salience = require_enum<Salience>(j, "salience", kRecord);
  v.figure_useful = require_enum<FigureUseful>(j, "figure_useful", kRecord);
  v.answered_by_figure = require_enum<AnsweredByFigure>(j, "answered_by_figure", kRecord);
  v.answer_correct = require_enum<AnswerCorrect>(j, "answer_correct", kRecord);
  v.answer_quality = require_enum<AnswerQuality>(j, "answer_quality", kRecord);
  v.figure_type = require_enum<FigureType>(j, "figure_type", kRecord);
  v.q_grammar = require_enum<QGrammar>(j, "q_grammar", kRecord);
  v.notes = j.contains("notes") && j["notes"].is_string() ? j["notes"].get<std::string>() : "";
}

void to_json(json& j, const SplitManifest& v) {
  j = json{{"schema", util::kSchema},       {"train", v.train},
           {"validation", v.validation},    {"eval_within", v.eval_within},
           {"eval_disjoint", v.eval_disjoint}, {"disjoint_paper_ids", v.disjoint_paper_ids},
           {"seed", v.seed}};
}

void from_json(const json& j, SplitManifest& v) {
  v.train = j.value("train", std::vector<std::string>{});
  v.validation = j.value("validation", std::vector<std::string>{});
  v.eval_within = j.value("eval_within", std::vector<std::string>{});
  v.eval_disjoint = j.value("eval_disjoint", std::vector<std::string>{});
  v.disjoint_paper_ids = j.value("disjoint_paper_ids", std::vector<std::string>{});
  v.seed = j.value("seed", std::uint64_t{0});
}

}  // namespace mqud::corpus
