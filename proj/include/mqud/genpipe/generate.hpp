#pragma once

#include <string>
#include <vector>

#include "mqud/backend/chat.hpp"
#include "mqud/corpus/types.hpp"
#include "mqud/paperstore/assets.hpp"
#include "mqud/paperstore/eligibility.hpp"
#include "mqud/paperstore/paper.hpp"

namespace mqud::genpipe {

struct GenerateOptions {
  int n = 6;  // candidates per figure, in [5, 7]
  // Evidence spans covering less than this share of answer_source are
  // flagged for review.
  double review_threshold = 0.6;
  backend::json decoding = backend::default_decoding(backend::TemplateId::qud_generate);
};

/// Title, abstract, caption and the figure's asset hash (when the manifest
/// has one).
corpus::TriggerContext make_context(const paperstore::PaperRecord& paper, const paperstore::FigureUnit& figure,
                                    const paperstore::AssetManifest* manifest);

/// Requests n candidate QUDs for one eligible figure. A reply that does not
/// parse as the expected JSON array is re-asked once, then raises
/// UnparseableResponse. Unknown question types or difficulties raise
/// TypeOutOfVocabulary.
std::vector<corpus::QudRecord> generate_candidates(backend::ChatBackend& backend,
                                                   const paperstore::PaperRecord& paper,
                                                   const paperstore::FigureUnit& figure,
                                                   const corpus::TriggerContext& ctx,
                                                   const std::vector<paperstore::AnchorParagraph>& anchors,
                                                   const GenerateOptions& options = {});

struct EvidenceMatch {
  std::vector<corpus::EvidenceSpan> spans;
  double coverage = 0.0;  // matched chars / answer_source chars
};

/// Maps free-text answer_source onto anchor paragraphs: each sentence of the
/// source is matched by longest common substring against every paragraph and
/// the best paragraph wins (ties to the earlier one).
EvidenceMatch map_evidence(const std::string& answer_source, const std::vector<paperstore::AnchorParagraph>& anchors);

/// Longest common substring of a and b: (start in a, start in b, length).
struct Lcs {
  std::size_t a_pos = 0;
  std::size_t b_pos = 0;
  std::size_t length = 0;
};
Lcs longest_common_substring(std::string_view a, std::string_view b);

}  // namespace mqud::genpipe
