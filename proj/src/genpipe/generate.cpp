#include "mqud/genpipe/generate.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "mqud/util/error.hpp"
#include "mqud/util/text.hpp"

namespace mqud::genpipe {

using backend::BackendRequest;
using backend::TemplateId;
using corpus::QudRecord;

namespace {

constexpr const char* kRetryNote =
    "Your previous reply could not be parsed. Reply with only the JSON array described above, no other text.";

bool well_formed(const backend::json& reply) {
  if (!reply.is_array() || reply.empty()) return false;
  for (const auto& item : reply) {
    if (!item.is_object()) return false;
    for (const char* k : {"question", "answer", "answer_source", "question_type", "difficulty"})
      if (!item.contains(k) || !item[k].is_string()) return false;
  }
  return true;
}

std::string other_figures(const paperstore::PaperRecord& paper, const paperstore::FigureUnit& figure) {
  std::vector<std::string> parts;
  for (const auto& f : paper.figures) {
    if (f.label == figure.label) continue;
    auto words = text::split_words(f.caption);
    if (words.size() > 12) words.resize(12);
    parts.push_back("Figure " + std::to_string(f.number) + ": " + text::join(words, " "));
  }
  return parts.empty() ? "none" : text::join(parts, "; ");
}

}  // namespace

corpus::TriggerContext make_context(const paperstore::PaperRecord& paper, const paperstore::FigureUnit& figure,
                                    const paperstore::AssetManifest* manifest) {
  corpus::TriggerContext c;
  c.paper_id = paper.paper_id;
  c.figure_label = figure.label;
  c.title = paper.title;
  c.abstract = paper.abstract;
  c.caption = figure.caption;
  if (manifest && !figure.image_path.empty()) c.image_ref = manifest->hash_for(paper.paper_id, figure.image_path);
  return c;
}

Lcs longest_common_substring(std::string_view a, std::string_view b) {
  Lcs best;
  if (a.empty() || b.empty()) return best;
  std::vector<std::size_t> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      cur[j] = a[i - 1] == b[j - 1] ? prev[j - 1] + 1 : 0;
      if (cur[j] > best.length) best = {i - cur[j], j - cur[j], cur[j]};
    }
    std::swap(prev, cur);
  }
  return best;
}

EvidenceMatch map_evidence(const std::string& answer_source, const std::vector<paperstore::AnchorParagraph>& anchors) {
  EvidenceMatch m;
  auto pieces = text::split_sentences(answer_source);
  if (pieces.empty() && !text::trim(answer_source).empty()) pieces.emplace_back(text::trim(answer_source));
  std::size_t total = 0, matched = 0;
  for (const auto& piece : pieces) {
    total += piece.size();
    Lcs best;
    const paperstore::AnchorParagraph* where = nullptr;
    for (const auto& a : anchors) {
      auto l = longest_common_substring(piece, a.text);
      if (l.length > best.length) {
        best = l;
        where = &a;
      }
    }
    // Short incidental overlaps (shared words) are not evidence.
    if (!where || best.length < std::min<std::size_t>(12, piece.size())) continue;
    matched += best.length;
    corpus::EvidenceSpan span{where->section, where->paragraph, best.b_pos, best.b_pos + best.length,
                              where->text.substr(best.b_pos, best.length)};
    if (std::find(m.spans.begin(), m.spans.end(), span) == m.spans.end()) m.spans.push_back(std::move(span));
  }
  m.coverage = total ? static_cast<double>(matched) / static_cast<double>(total) : 0.0;
  return m;
}

std::vector<QudRecord> generate_candidates(backend::ChatBackend& backend, const paperstore::PaperRecord& paper,
                                           const paperstore::FigureUnit& figure, const corpus::TriggerContext& ctx,
                                           const std::vector<paperstore::AnchorParagraph>& anchors,
                                           const GenerateOptions& options) {
  if (options.n < 5 || options.n > 7) throw Error(ErrorKind::ConfigError, "candidates per figure must be in [5, 7]");
  if (!figure.eligible)
    throw Error(ErrorKind::InvariantViolation, paper.paper_id + "/" + figure.label + " is not an eligible figure");

  const std::string anchor_text = paperstore::join_anchor_text(anchors);
  BackendRequest req;
  req.template_id = TemplateId::qud_generate;
  req.text_slots = {{"paper_name", paper.title},
                    {"abstract", paper.abstract},
                    {"figure_number", std::to_string(figure.number)},
                    {"caption", figure.caption},
                    {"reference_count", std::to_string(figure.reference_count)},
                    {"other_figures", other_figures(paper, figure)},
                    {"paragraphs", anchor_text},
                    {"n_questions", std::to_string(options.n)}};
  if (ctx.image_ref) req.image_refs.push_back(*ctx.image_ref);
  req.decoding = options.decoding;

  auto parsed = backend::parse_json_reply(backend.complete(req));
  if (!parsed || !well_formed(*parsed)) {
    spdlog::warn("[{}/{}] malformed generation reply, re-asking once", paper.paper_id, figure.label);
    req.retry_note = kRetryNote;
    parsed = backend::parse_json_reply(backend.complete(req));
    if (!parsed || !well_formed(*parsed))
      throw Error(ErrorKind::UnparseableResponse, paper.paper_id + "/" + figure.label + ": generation reply after re-ask");
  }

  std::vector<corpus::AnchorSource> sources;
  for (const auto& a : anchors) sources.push_back({a.section, a.paragraph, a.text.size()});

  std::vector<QudRecord> out;
  for (const auto& item : *parsed) {
    const auto type_raw = text::to_lower(text::trim(item["question_type"].get<std::string>()));
    auto type = corpus::parse_enum<corpus::QudType>(type_raw);
    if (!type) throw Error(ErrorKind::TypeOutOfVocabulary, "question_type '" + type_raw + "'");
    const auto diff_raw = text::to_lower(text::trim(item["difficulty"].get<std::string>()));
    auto diff = corpus::parse_enum<corpus::Difficulty>(diff_raw);
    if (!diff) throw Error(ErrorKind::TypeOutOfVocabulary, "difficulty '" + diff_raw + "'");

    QudRecord r;
    r.question = text::collapse_whitespace(item["question"].get<std::string>());
    r.abstractive_answer = text::collapse_whitespace(item["answer"].get<std::string>());
    r.context = ctx;
    r.qud_id = corpus::make_qud_id(ctx.paper_id, ctx.figure_label, r.question);
    r.anchor_text = anchor_text;
    r.anchor_sources = sources;
    r.qud_type = *type;
    r.difficulty = *diff;
    r.provenance = corpus::Provenance::generated;
    auto ev = map_evidence(item["answer_source"].get<std::string>(), anchors);
    r.extractive_evidence = std::move(ev.spans);
    r.evidence_coverage = ev.coverage;
    r.evidence_needs_review = ev.coverage < options.review_threshold;
    if (r.evidence_needs_review)
      spdlog::info("[{}] evidence coverage {:.2f} below review threshold", r.qud_id, ev.coverage);
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace mqud::genpipe
