#include "mqud/paperstore/eligibility.hpp"

#include <algorithm>
#include <cstdlib>
#include <set>
#include <tuple>

#include "mqud/util/error.hpp"
#include "mqud/util/text.hpp"

namespace mqud::paperstore {

const std::vector<std::string>& default_section_lexicon() {
  static const std::vector<std::string> lexicon = {"result",   "experiment", "evaluation",
                                                   "analysis", "discussion", "finding"};
  return lexicon;
}

PaperRecord mark_eligibility(PaperRecord paper, const std::vector<std::string>& section_lexicon) {
  if (section_lexicon.empty()) throw Error(ErrorKind::ConfigError, "section lexicon is empty");
  paper.results_onward_ordinal.reset();
  for (const auto& s : paper.sections) {
    if (s.is_appendix) continue;
    const bool match = std::any_of(section_lexicon.begin(), section_lexicon.end(),
                                   [&](const std::string& stem) { return text::contains_icase(s.title, stem); });
    if (match) {
      paper.results_onward_ordinal = s.ordinal;
      break;
    }
  }
  for (auto& f : paper.figures) {
    const SectionNode* s = paper.section(f.declared_in_section);
    f.eligible = paper.results_onward_ordinal && s && !s->is_appendix &&
                 f.declared_in_section >= *paper.results_onward_ordinal;
  }
  return paper;
}

std::vector<AnchorParagraph> anchor_paragraphs(const PaperRecord& paper, const std::string& figure_label,
                                               int window) {
  if (!paper.find_figure(figure_label))
    throw Error(ErrorKind::UnknownFigure, paper.paper_id + ": no figure '" + figure_label + "'");
  if (window < 0) throw Error(ErrorKind::ConfigError, "anchor window must be >= 0");

  std::set<std::pair<int, int>> picked;
  for (const auto& s : paper.sections) {
    const int n = static_cast<int>(s.paragraphs.size());
    for (int i = 0; i < n; ++i) {
      const auto& refs = s.paragraphs[static_cast<std::size_t>(i)].figure_refs;
      if (std::find(refs.begin(), refs.end(), figure_label) == refs.end()) continue;
      for (int k = std::max(0, i - window); k <= std::min(n - 1, i + window); ++k) picked.emplace(s.ordinal, k);
    }
  }
  std::vector<AnchorParagraph> out;
  for (const auto& [sec, para] : picked) {
    out.push_back({sec, para, paper.section(sec)->paragraphs[static_cast<std::size_t>(para)].text});
  }
  return out;
}

std::string join_anchor_text(const std::vector<AnchorParagraph>& anchors) {
  std::string out;
  for (std::size_t i = 0; i < anchors.size(); ++i) {
    if (i) out += "\n\n";
    out += anchors[i].text;
  }
  return out;
}

const FigureUnit* choose_swap_partner(const PaperRecord& paper, const std::string& figure_label) {
  const FigureUnit* own = paper.find_figure(figure_label);
  if (!own) throw Error(ErrorKind::UnknownFigure, paper.paper_id + ": no figure '" + figure_label + "'");
  const auto own_index = own - paper.figures.data();
  const FigureUnit* best = nullptr;
  std::tuple<int, int, long, long> best_key{};
  for (std::size_t i = 0; i < paper.figures.size(); ++i) {
    const auto& f = paper.figures[i];
    if (!f.eligible || f.label == figure_label) continue;
    const long idx = static_cast<long>(i);
    const std::tuple<int, int, long, long> key{std::abs(f.declared_in_section - own->declared_in_section),
                                               f.declared_in_section, std::labs(idx - own_index), idx};
    if (!best || key < best_key) {
      best = &f;
      best_key = key;
    }
  }
  return best;
}

}  // namespace mqud::paperstore
