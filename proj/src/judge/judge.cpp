#include "mqud/judge/judge.hpp"

#include <algorithm>
#include <random>
#include <set>

#include <fmt/format.h>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::judge {

using corpus::AnnotationRecord;

const std::vector<std::pair<std::string, std::vector<std::string>>>& raw_vocabulary() {
  static const std::vector<std::pair<std::string, std::vector<std::string>>> v = {
      {"q-grammar", {"perfect", "minor", "major"}},
      {"salience", {"very", "somewhat", "not"}},
      {"answer_quality", {"4", "3", "2", "1"}},
      {"answer-correct", {"yes", "partial", "no"}},
      {"figure-useful", {"essential", "helpful", "not"}},
      {"answered-by-figure", {"yes", "no"}},
      {"figure-type", {"result", "method", "data", "comparison", "other"}},
  };
  return v;
}

void to_json(json& j, const JudgeVerdict& v) {
  j = json{{"schema", util::kSchema}, {"qud_id", v.qud_id}, {"raw", v.raw}, {"mapped", v.mapped}};
}

void from_json(const json& j, JudgeVerdict& v) {
  v.qud_id = j.at("qud_id").get<std::string>();
  v.raw = j.at("raw");
  v.mapped = j.at("mapped").get<AnnotationRecord>();
}

namespace {

std::string label(const json& raw, const std::string& key) {
  if (!raw.contains(key)) throw Error(ErrorKind::UnknownLabel, "judge reply lacks '" + key + "'");
  const auto& v = raw[key];
  // answer_quality sometimes comes back as a number.
  if (v.is_number_integer()) return std::to_string(v.get<long>());
  if (!v.is_string()) throw Error(ErrorKind::UnknownLabel, "'" + key + "' is not a string");
  return v.get<std::string>();
}

template <typename E>
E pick(const json& raw, const std::string& key, std::initializer_list<std::pair<const char*, E>> table) {
  const auto value = label(raw, key);
  for (const auto& [name, e] : table)
    if (value == name) return e;
  throw Error(ErrorKind::UnknownLabel, "'" + key + "' = '" + value + "'");
}

}  // namespace

AnnotationRecord map_judge_labels(const std::string& qud_id, const json& raw, const std::string& annotator_id) {
  using namespace corpus;
  if (!raw.is_object()) throw Error(ErrorKind::UnknownLabel, "judge reply is not an object");
  AnnotationRecord a;
  a.qud_id = qud_id;
  a.annotator_id = annotator_id;
  a.source = AnnotationSource::llm_judge;
  a.q_grammar = pick<QGrammar>(raw, "q-grammar",
                               {{"perfect", QGrammar::acceptable},
                                {"minor", QGrammar::acceptable},
                                {"major", QGrammar::not_acceptable}});
  a.salience = pick<Salience>(raw, "salience",
                              {{"very", Salience::salient}, {"somewhat", Salience::salient}, {"not", Salience::not_salient}});
  a.answer_quality = pick<AnswerQuality>(raw, "answer_quality",
                                         {{"4", AnswerQuality::high},
                                          {"3", AnswerQuality::high},
                                          {"2", AnswerQuality::low},
                                          {"1", AnswerQuality::low}});
  a.answer_correct = pick<AnswerCorrect>(raw, "answer-correct",
                                         {{"yes", AnswerCorrect::acceptable},
                                          {"partial", AnswerCorrect::acceptable},
                                          {"no", AnswerCorrect::not_acceptable}});
  a.figure_useful = pick<FigureUseful>(raw, "figure-useful",
                                       {{"essential", FigureUseful::useful},
                                        {"helpful", FigureUseful::useful},
                                        {"not", FigureUseful::not_useful}});
  a.answered_by_figure =
      pick<AnsweredByFigure>(raw, "answered-by-figure", {{"yes", AnsweredByFigure::yes}, {"no", AnsweredByFigure::no}});
  a.figure_type = pick<FigureType>(raw, "figure-type",
                                   {{"result", FigureType::result},
                                    {"method", FigureType::method},
                                    {"data", FigureType::data},
                                    {"comparison", FigureType::comparison},
                                    {"other", FigureType::other}});
  if (raw.contains("notes") && raw["notes"].is_string()) a.notes = raw["notes"].get<std::string>();
  return a;
}

JudgeVerdict judge_qud(backend::ChatBackend& backend, const corpus::QudRecord& record, const JudgeOptions& options) {
  if (!record.context.image_ref)
    throw Error(ErrorKind::InvariantViolation, record.qud_id + ": judging needs the figure image");
  backend::BackendRequest req;
  req.template_id = backend::TemplateId::judge;
  req.text_slots = {{"title", record.context.title},
                    {"paper_id", record.context.paper_id},
                    {"figure_info", record.context.caption},
                    {"source_content", record.anchor_text},
                    {"question", record.question},
                    {"answer", record.abstractive_answer}};
  req.image_refs = {*record.context.image_ref};
  req.decoding = options.decoding;
  auto reply = backend::parse_json_reply(backend.complete(req));
  if (!reply || !reply->is_object()) {
    req.retry_note = "Your previous reply could not be parsed. Reply with only the JSON object described above.";
    reply = backend::parse_json_reply(backend.complete(req));
    if (!reply || !reply->is_object())
      throw Error(ErrorKind::UnparseableResponse, record.qud_id + ": judge reply after re-ask");
  }
  JudgeVerdict v;
  v.qud_id = record.qud_id;
  v.raw = *reply;
  v.mapped = map_judge_labels(record.qud_id, *reply, "llm_judge:" + options.model);
  return v;
}

std::string_view to_string(PairPolicy p) {
  return p == PairPolicy::all_annotations ? "all_annotations" : "per_qud_latest";
}

PairPolicy pair_policy_from_string(std::string_view s) {
  if (s == "all_annotations") return PairPolicy::all_annotations;
  if (s == "per_qud_latest") return PairPolicy::per_qud_latest;
  throw Error(ErrorKind::ConfigError, "unknown pair policy '" + std::string(s) + "'");
}

json to_json(const BinaryMetrics& m) {
  return {{"tp", m.tp},           {"fp", m.fp},         {"fn", m.fn}, {"tn", m.tn}, {"n", m.n},
          {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn) {
  BinaryMetrics m{tp, fp, fn, tn, tp + fp + fn + tn, 0, 0, 0};
  if (tp + fp) m.precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
  if (tp + fn) m.recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
  if (m.precision + m.recall > 0) m.f1 = 2 * m.precision * m.recall / (m.precision + m.recall);
  return m;
}

namespace {

std::map<std::string, const JudgeVerdict*> index_verdicts(const std::vector<JudgeVerdict>& judged) {
  std::map<std::string, const JudgeVerdict*> by_qud;
  for (const auto& v : judged) by_qud[v.qud_id] = &v;  // a later verdict replaces an earlier one
  return by_qud;
}

std::vector<const AnnotationRecord*> human_only(const std::vector<AnnotationRecord>& all) {
  std::vector<const AnnotationRecord*> out;
  for (const auto& a : all)
    if (a.source == corpus::AnnotationSource::human_expert) out.push_back(&a);
  return out;
}

}  // namespace

BinaryMetrics validate_judge(const std::vector<AnnotationRecord>& human, const std::vector<JudgeVerdict>& judged,
                             PairPolicy policy) {
  const auto verdicts = index_verdicts(judged);
  std::vector<const AnnotationRecord*> chosen = human_only(human);
  if (policy == PairPolicy::per_qud_latest) {
    std::map<std::string, const AnnotationRecord*> latest;
    for (const auto* a : chosen) latest[a->qud_id] = a;
    chosen.clear();
    for (const auto& [id, a] : latest) chosen.push_back(a);
  }
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto* a : chosen) {
    auto it = verdicts.find(a->qud_id);
    if (it == verdicts.end()) continue;
    const bool truth = a->answer_correct == corpus::AnswerCorrect::acceptable;
    const bool pred = it->second->mapped.answer_correct == corpus::AnswerCorrect::acceptable;
    if (pred && truth) ++tp;
    else if (pred) ++fp;
    else if (truth) ++fn;
    else ++tn;
  }
  if (tp + fp + fn + tn == 0) throw Error(ErrorKind::NoOverlap, "no human annotation has a judge verdict");
  return binary_metrics(tp, fp, fn, tn);
}

double weighted_agreement(double answer_correct, double figure_useful, double salience) {
  return 0.5 * answer_correct + 0.3 * figure_useful + 0.2 * salience;
}

json to_json(const AgreementSummary& s) {
  json reports = json::array();
  for (const auto& r : s.reports)
    reports.push_back({{"annotator_id", r.annotator_id},
                       {"n_pairs", r.n_pairs},
                       {"agree_answer_correct", r.agree_answer_correct},
                       {"agree_figure_useful", r.agree_figure_useful},
                       {"agree_salience", r.agree_salience},
                       {"weighted", r.weighted}});
  return {{"reports", reports}, {"median_weighted", s.median_weighted}, {"median_rule", "lower"}};
}

AgreementSummary annotator_agreement(const std::vector<AnnotationRecord>& human,
                                     const std::vector<JudgeVerdict>& judged) {
  const auto verdicts = index_verdicts(judged);
  struct Counts {
    std::size_t n = 0, ac = 0, fu = 0, sa = 0;
  };
  std::map<std::string, Counts> per;
  for (const auto* a : human_only(human)) {
    auto it = verdicts.find(a->qud_id);
    if (it == verdicts.end()) continue;
    const auto& j = it->second->mapped;
    auto& c = per[a->annotator_id];
    ++c.n;
    c.ac += a->answer_correct == j.answer_correct;
    c.fu += a->figure_useful == j.figure_useful;
    c.sa += a->salience == j.salience;
  }
  if (per.empty()) throw Error(ErrorKind::NoOverlap, "no human annotation has a judge verdict");
  AgreementSummary s;
  std::vector<double> weights;
  for (const auto& [id, c] : per) {
    const double n = static_cast<double>(c.n);
    AgreementReport r{id, c.n, c.ac / n, c.fu / n, c.sa / n, 0.0};
    r.weighted = weighted_agreement(r.agree_answer_correct, r.agree_figure_useful, r.agree_salience);
    weights.push_back(r.weighted);
    s.reports.push_back(r);
  }
  std::sort(weights.begin(), weights.end());
  s.median_weighted = weights[(weights.size() - 1) / 2];
  return s;
}

std::vector<AnnotationPair> dual_pairs(const std::vector<AnnotationRecord>& human) {
  std::map<std::string, std::vector<const AnnotationRecord*>> by_qud;
  std::vector<std::string> order;
  for (const auto* a : human_only(human)) {
    auto& v = by_qud[a->qud_id];
    if (v.empty()) order.push_back(a->qud_id);
    if (v.size() < 2 && (v.empty() || v.front()->annotator_id != a->annotator_id)) v.push_back(a);
  }
  std::vector<AnnotationPair> out;
  for (const auto& id : order)
    if (by_qud[id].size() == 2) out.emplace_back(*by_qud[id][0], *by_qud[id][1]);
  return out;
}

std::map<std::string, double> dual_annotator_exact_agreement(const std::vector<AnnotationPair>& pairs) {
  if (pairs.empty()) throw Error(ErrorKind::NoOverlap, "no doubly annotated QUD");
  std::map<std::string, std::size_t> agree;
  for (const auto& [a, b] : pairs) {
    if (a.qud_id != b.qud_id || a.annotator_id == b.annotator_id ||
        a.source != corpus::AnnotationSource::human_expert || b.source != corpus::AnnotationSource::human_expert)
      throw Error(ErrorKind::InvariantViolation, "dual pair must be two human annotators on one QUD");
    for (auto dim : corpus::kDimensions) agree[std::string(dim)] += a.dimension(dim) == b.dimension(dim);
  }
  std::map<std::string, double> out;
  for (const auto& [dim, n] : agree) out[dim] = static_cast<double>(n) / static_cast<double>(pairs.size());
  return out;
}

BlindExport blind_pairs(const std::vector<AnnotationRecord>& human, const std::vector<JudgeVerdict>& judged,
                        std::uint64_t seed) {
  const auto verdicts = index_verdicts(judged);
  std::map<std::string, const AnnotationRecord*> latest;
  for (const auto* a : human_only(human)) latest[a->qud_id] = a;
  auto labels = [](const AnnotationRecord& r) {
    json j = json::object();
    for (auto dim : corpus::kDimensions) j[std::string(dim)] = r.dimension(dim);
    return j;
  };
  BlindExport out;
  std::size_t item = 0;
  for (const auto& [id, a] : latest) {
    auto it = verdicts.find(id);
    if (it == verdicts.end()) continue;
    std::mt19937_64 rng(util::mix_seed(seed, util::stable_u64(id)));
    const bool human_is_a = (rng() & 1) == 0;
    const auto item_id = fmt::format("item_{:04d}", ++item);
    const auto& h = labels(*a);
    const auto& j = labels(it->second->mapped);
    out.pairs.push_back({{"item_id", item_id}, {"qud_id", id}, {"A", human_is_a ? h : j}, {"B", human_is_a ? j : h}});
    out.key.push_back({{"item_id", item_id}, {"A", human_is_a ? "human" : "judge"}, {"B", human_is_a ? "judge" : "human"}});
  }
  return out;
}

std::string format_metrics_table(const BinaryMetrics& m, const AgreementSummary* agreement) {
  std::string out = fmt::format("answer_correct (positive = acceptable), n = {}\n", m.n);
  out += fmt::format("  TP {}  FP {}  FN {}  TN {}\n", m.tp, m.fp, m.fn, m.tn);
  out += fmt::format("  precision {:.3f}  recall {:.3f}  F1 {:.3f}\n", m.precision, m.recall, m.f1);
  if (agreement) {
    out += fmt::format("\n{:<24} {:>6} {:>8} {:>8} {:>8} {:>9}\n", "annotator", "pairs", "correct", "useful",
                       "salience", "weighted");
    for (const auto& r : agreement->reports)
      out += fmt::format("{:<24} {:>6} {:>8.3f} {:>8.3f} {:>8.3f} {:>9.3f}\n", r.annotator_id, r.n_pairs,
                         r.agree_answer_correct, r.agree_figure_useful, r.agree_salience, r.weighted);
    out += fmt::format("median weighted (lower median): {:.3f}\n", agreement->median_weighted);
  }
  return out;
}

}  // namespace mqud::judge
