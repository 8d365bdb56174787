#include "mqud/genpipe/filter.hpp"

#include <map>

#include "mqud/util/error.hpp"
#include "mqud/util/parallel.hpp"
#include "mqud/util/text.hpp"

namespace mqud::genpipe {

nlohmann::json to_json(const FilterReport& r) {
  nlohmann::json j = {{"qud_id", r.qud_id},
                      {"answer_words", r.answer_words},
                      {"length_ok", r.length_ok},
                      {"grounded", r.grounded},
                      {"references_figure", r.references_figure},
                      {"kept", r.kept},
                      {"grounding_reason", r.grounding_reason}};
  j["duplicate_of"] = r.duplicate_of ? nlohmann::json(*r.duplicate_of) : nlohmann::json(nullptr);
  return j;
}

const std::set<std::string>& visual_terms() {
  static const std::set<std::string> terms = {"figure", "panel",   "axis",   "curve", "line",  "bar",
                                              "cluster", "region", "legend", "plot",  "point", "shaded"};
  return terms;
}

bool length_ok(const std::string& answer, const FilterOptions& options) {
  const auto n = text::word_count(answer);
  return n >= options.min_words && n <= options.max_words;
}

namespace {

// Plural visual terms ("bars", "curves", "lines") still count.
bool is_visual(const std::string& token) {
  const auto& v = visual_terms();
  if (v.count(token)) return true;
  if (token.size() > 3 && token.back() == 's') {
    if (v.count(token.substr(0, token.size() - 1))) return true;
    if (token.size() > 4 && token.ends_with("es") && v.count(token.substr(0, token.size() - 2))) return true;
  }
  return false;
}

}  // namespace

bool references_figure(const std::string& question, const std::string& caption) {
  const auto caption_terms = text::content_tokens(caption);
  for (const auto& t : text::alnum_tokens(question))
    if (is_visual(t) || caption_terms.count(t)) return true;
  return false;
}

std::pair<bool, std::string> grounding_check(backend::ChatBackend& backend, const std::string& caption,
                                             const std::string& source_text, const std::string& question,
                                             const std::string& answer, const backend::json& decoding) {
  backend::BackendRequest req;
  req.template_id = backend::TemplateId::grounding_check;
  req.text_slots = {{"caption", caption}, {"source_text", source_text}, {"question", question}, {"answer", answer}};
  req.decoding = decoding;
  for (int attempt = 0; attempt < 2; ++attempt) {
    auto reply = backend::parse_json_reply(backend.complete(req));
    if (reply && reply->is_object() && reply->contains("grounded") && (*reply)["grounded"].is_boolean())
      return {(*reply)["grounded"].get<bool>(), reply->value("reason", "")};
    req.retry_note = "Your previous reply could not be parsed. Reply with only the JSON object described above.";
  }
  throw Error(ErrorKind::UnparseableResponse, "grounding reply after re-ask");
}

FilterResult filter_candidates(backend::ChatBackend& backend, const std::vector<corpus::QudRecord>& records,
                               const FilterOptions& options) {
  FilterResult out;
  out.reports.resize(records.size());
  // Grounding calls are independent; run them first, by index.
  std::vector<std::pair<bool, std::string>> grounding(records.size());
  util::parallel_for(records.size(), options.workers, [&](std::size_t i) {
    const auto& r = records[i];
    grounding[i] = grounding_check(backend, r.context.caption, r.anchor_text, r.question, r.abstractive_answer,
                                   options.decoding);
  });

  std::map<std::pair<std::string, std::string>, std::vector<std::pair<std::string, std::set<std::string>>>> kept_by_fig;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto& r = records[i];
    auto& rep = out.reports[i];
    rep.qud_id = r.qud_id;
    rep.answer_words = text::word_count(r.abstractive_answer);
    rep.length_ok = length_ok(r.abstractive_answer, options);
    rep.grounded = grounding[i].first && !r.extractive_evidence.empty();
    rep.grounding_reason = r.extractive_evidence.empty() ? "no extractive evidence" : grounding[i].second;
    rep.references_figure = references_figure(r.question, r.context.caption);
    auto& earlier = kept_by_fig[{r.context.paper_id, r.context.figure_label}];
    const auto tokens = text::token_set(r.question);
    for (const auto& [id, other] : earlier) {
      if (text::jaccard(tokens, other) >= options.dedup_threshold) {
        rep.duplicate_of = id;
        break;
      }
    }
    rep.kept = rep.length_ok && rep.grounded && rep.references_figure && !rep.duplicate_of;
    if (rep.kept) {
      earlier.emplace_back(r.qud_id, tokens);
      auto k = r;
      k.grounded = true;
      out.kept.push_back(std::move(k));
    }
  }
  return out;
}

}  // namespace mqud::genpipe
