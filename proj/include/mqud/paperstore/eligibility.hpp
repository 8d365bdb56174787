#pragma once

#include <string>
#include <vector>

#include "mqud/paperstore/paper.hpp"

namespace mqud::paperstore {

/// Section-title stems that open the results-onward part of a paper.
const std::vector<std::string>& default_section_lexicon();

/// Marks figures eligible iff declared in the first non-appendix section whose
/// title contains a lexicon stem (case-insensitive), or in a later non-appendix
/// section. With no matching section, results_onward_ordinal stays empty
/// (the NoResultsSection warning state) and nothing is eligible. Idempotent.
PaperRecord mark_eligibility(PaperRecord paper, const std::vector<std::string>& section_lexicon);

/// One anchor paragraph with its document position.
struct AnchorParagraph {
  int section = 0;
  int paragraph = 0;
  std::string text;

  bool operator==(const AnchorParagraph&) const = default;
};

/// Paragraphs within `window` of each paragraph citing the figure, across
/// every citing section, deduplicated by position in document order.
/// Throws UnknownFigure.
std::vector<AnchorParagraph> anchor_paragraphs(const PaperRecord& paper, const std::string& figure_label,
                                               int window);

/// Anchor texts joined by blank lines.
std::string join_anchor_text(const std::vector<AnchorParagraph>& anchors);

/// Swap partner for the diagnostics: the other eligible figure with the
/// nearest declaration ordinal; ties go to the lower ordinal, then to the
/// figure closest in document order, then the earlier one.
const FigureUnit* choose_swap_partner(const PaperRecord& paper, const std::string& figure_label);

}  // namespace mqud::paperstore
