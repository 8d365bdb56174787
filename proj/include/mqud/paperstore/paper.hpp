#pragma once

#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace mqud::paperstore {

enum class DomainTag { nlp, ml, astronomy, other };

std::string to_string(DomainTag tag);
DomainTag domain_from_string(const std::string& s);

struct Paragraph {
  std::string text;
  // Figure labels cited in this paragraph, in order of appearance.
  std::vector<std::string> figure_refs;

  bool operator==(const Paragraph&) const = default;
};

struct SectionNode {
  std::string title;
  int ordinal = 0;
  bool is_appendix = false;
  std::vector<Paragraph> paragraphs;

  /// Multiset of cited figure labels across paragraphs, document order.
  std::vector<std::string> figure_refs() const;
  bool cites(const std::string& label) const;

  bool operator==(const SectionNode&) const = default;
};

struct FigureUnit {
  std::string label;
  std::string caption;
  std::string image_path;  // relative to the paper's source directory
  int number = 0;          // 1-based display number in document order
  int declared_in_section = 0;
  bool eligible = false;
  int reference_count = 0;  // distinct sections citing the label

  bool operator==(const FigureUnit&) const = default;
};

struct PaperRecord {
  std::string paper_id;
  std::string title;
  std::string abstract;
  std::vector<SectionNode> sections;
  std::vector<FigureUnit> figures;
  DomainTag domain_tag = DomainTag::other;
  std::vector<std::string> dangling_refs;
  // Ordinal of the first results-onward section once eligibility is marked.
  std::optional<int> results_onward_ordinal;
  std::vector<std::string> warnings;

  const FigureUnit* find_figure(const std::string& label) const;
  const SectionNode* section(int ordinal) const;
  bool no_results_section() const { return !results_onward_ordinal.has_value(); }

  bool operator==(const PaperRecord&) const = default;
};

void to_json(nlohmann::json& j, const Paragraph& p);
void to_json(nlohmann::json& j, const SectionNode& s);
void from_json(const nlohmann::json& j, SectionNode& s);
void to_json(nlohmann::json& j, const FigureUnit& f);
void from_json(const nlohmann::json& j, FigureUnit& f);
void to_json(nlohmann::json& j, const PaperRecord& p);
void from_json(const nlohmann::json& j, PaperRecord& p);

/// Recomputes every FigureUnit::reference_count from section citations.
void compute_reference_counts(PaperRecord& paper);

}  // namespace mqud::paperstore
