#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mqud/backend/chat.hpp"
#include "mqud/corpus/types.hpp"

namespace mqud::genpipe {

struct FilterReport {
  std::string qud_id;
  std::size_t answer_words = 0;
  bool length_ok = false;
  bool grounded = false;
  bool references_figure = false;
  std::optional<std::string> duplicate_of;
  bool kept = false;
  std::string grounding_reason;

  bool operator==(const FilterReport&) const = default;
};

nlohmann::json to_json(const FilterReport& r);

struct FilterOptions {
  std::size_t min_words = 20;  // inclusive
  std::size_t max_words = 120;  // inclusive
  double dedup_threshold = 0.7;
  int workers = 1;
  backend::json decoding = backend::default_decoding(backend::TemplateId::grounding_check);
};

struct FilterResult {
  std::vector<corpus::QudRecord> kept;  // input order, grounded = true
  std::vector<FilterReport> reports;    // one per input record, input order
};

/// Visual-element terms that count as referencing the figure.
const std::set<std::string>& visual_terms();

bool length_ok(const std::string& answer, const FilterOptions& options = {});
bool references_figure(const std::string& question, const std::string& caption);

/// Asks the grounding template whether the answer is supported by the caption
/// and anchor text. Re-asks once on an unparseable reply.
std::pair<bool, std::string> grounding_check(backend::ChatBackend& backend, const std::string& caption,
                                             const std::string& source_text, const std::string& question,
                                             const std::string& answer, const backend::json& decoding);

/// Applies the quality filter. A record is kept iff its answer length is in
/// range, the grounding check passes and the evidence is non-empty, the
/// question references figure content, and no earlier kept record of the
/// same figure has token Jaccard >= threshold with it.
FilterResult filter_candidates(backend::ChatBackend& backend, const std::vector<corpus::QudRecord>& records,
                               const FilterOptions& options = {});

}  // namespace mqud::genpipe
