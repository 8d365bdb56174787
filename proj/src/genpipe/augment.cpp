#include "mqud/genpipe/augment.hpp"

#include <spdlog/spdlog.h>

#include "mqud/genpipe/filter.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/text.hpp"

namespace mqud::genpipe {

bool is_non_answer(const std::string& answer) {
  static const char* phrases[] = {"see the figure",       "looking at the figure", "refer to the figure",
                                  "can be identified by", "as shown in the figure.", "cannot be determined",
                                  "cannot determine",     "not mentioned",         "not stated in"};
  if (text::word_count(answer) < 4) return true;
  for (const char* p : phrases)
    if (text::contains_icase(answer, p)) return true;
  return false;
}

AugmentResult rephrase_augment(backend::ChatBackend& backend, const corpus::QudRecord& record, int n_variants,
                               const AugmentOptions& options) {
  AugmentResult out;
  if (n_variants <= 0) return out;
  if (record.provenance != corpus::Provenance::generated)
    throw Error(ErrorKind::InvariantViolation, record.qud_id + ": only generated QUDs are rephrased");

  backend::BackendRequest req;
  req.template_id = backend::TemplateId::rephrase;
  req.text_slots = {{"n_variants", std::to_string(n_variants)},
                    {"question_type", std::string(corpus::to_string(record.qud_type))},
                    {"caption", record.context.caption},
                    {"source_excerpt", record.anchor_text},
                    {"question", record.question},
                    {"answer", record.abstractive_answer}};
  req.decoding = options.decoding;

  auto valid = [](const std::optional<backend::json>& j) {
    if (!j || !j->is_array()) return false;
    for (const auto& v : *j)
      if (!v.is_object() || !v.contains("question") || !v["question"].is_string() || !v.contains("answer") ||
          !v["answer"].is_string())
        return false;
    return true;
  };
  auto reply = backend::parse_json_reply(backend.complete(req));
  if (!valid(reply)) {
    req.retry_note = "Your previous reply could not be parsed. Reply with only the JSON array described above.";
    reply = backend::parse_json_reply(backend.complete(req));
    if (!valid(reply)) throw Error(ErrorKind::UnparseableResponse, record.qud_id + ": rephrase reply after re-ask");
  }

  int index = 0;
  for (const auto& item : *reply) {
    if (index >= n_variants) break;
    ++index;
    corpus::QudRecord v = record;
    v.question = text::collapse_whitespace(item["question"].get<std::string>());
    v.abstractive_answer = text::collapse_whitespace(item["answer"].get<std::string>());
    v.qud_id = corpus::make_qud_id(record.context.paper_id, record.context.figure_label, v.question);
    v.provenance = corpus::Provenance::rephrase_variant;
    v.parent_id = record.qud_id;

    std::string reason;
    bool grounded = false;
    if (v.qud_id == record.qud_id) {
      reason = "variant repeats the parent question";
    } else if (is_non_answer(v.abstractive_answer)) {
      reason = "non-answer";
    } else {
      std::tie(grounded, reason) = grounding_check(backend, v.context.caption, v.anchor_text, v.question,
                                                   v.abstractive_answer, options.grounding_decoding);
    }
    v.grounded = grounded;
    if (grounded) {
      out.accepted.push_back(std::move(v));
    } else {
      const auto msg = "VariantRejected: " + record.qud_id + " variant " + std::to_string(index) + ": " + reason;
      spdlog::warn("{}", msg);
      out.log.push_back(msg);
      out.rejected.push_back(std::move(v));
    }
  }
  return out;
}

}  // namespace mqud::genpipe
