#include "mqud/paperstore/paper.hpp"

#include <algorithm>

#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::paperstore {

using nlohmann::json;

std::string to_string(DomainTag tag) {
  switch (tag) {
    case DomainTag::nlp: return "nlp";
    case DomainTag::ml: return "ml";
    case DomainTag::astronomy: return "astronomy";
    case DomainTag::other: return "other";
  }
  return "other";
}

DomainTag domain_from_string(const std::string& s) {
  if (s == "nlp") return DomainTag::nlp;
  if (s == "ml") return DomainTag::ml;
  if (s == "astronomy") return DomainTag::astronomy;
  if (s == "other" || s.empty()) return DomainTag::other;
  throw Error(ErrorKind::InvariantViolation, "unknown domain tag '" + s + "'");
}

std::vector<std::string> SectionNode::figure_refs() const {
  std::vector<std::string> out;
  for (const auto& p : paragraphs) out.insert(out.end(), p.figure_refs.begin(), p.figure_refs.end());
  return out;
}

bool SectionNode::cites(const std::string& label) const {
  return std::any_of(paragraphs.begin(), paragraphs.end(), [&](const Paragraph& p) {
    return std::find(p.figure_refs.begin(), p.figure_refs.end(), label) != p.figure_refs.end();
  });
}

const FigureUnit* PaperRecord::find_figure(const std::string& label) const {
  for (const auto& f : figures)
    if (f.label == label) return &f;
  return nullptr;
}

const SectionNode* PaperRecord::section(int ordinal) const {
  for (const auto& s : sections)
    if (s.ordinal == ordinal) return &s;
  return nullptr;
}

void compute_reference_counts(PaperRecord& paper) {
  for (auto& f : paper.figures) {
    f.reference_count = static_cast<int>(std::count_if(
        paper.sections.begin(), paper.sections.end(),
        [&](const SectionNode& s) { return s.cites(f.label); }));
  }
}

void to_json(json& j, const Paragraph& p) { j = json{{"text", p.text}, {"figure_refs", p.figure_refs}}; }

void to_json(json& j, const SectionNode& s) {
  json paragraphs = json::array();
  json paragraph_refs = json::array();
  for (const auto& p : s.paragraphs) {
    paragraphs.push_back(p.text);
    paragraph_refs.push_back(p.figure_refs);
  }
  j = json{{"title", s.title},
           {"ordinal", s.ordinal},
           {"is_appendix", s.is_appendix},
           {"paragraphs", paragraphs},
           {"paragraph_refs", paragraph_refs},
           {"figure_refs", s.figure_refs()}};
}

void from_json(const json& j, SectionNode& s) {
  s.title = j.at("title").get<std::string>();
  s.ordinal = j.at("ordinal").get<int>();
  s.is_appendix = j.at("is_appendix").get<bool>();
  const auto& texts = j.at("paragraphs");
  const json refs = j.value("paragraph_refs", json::array());
  s.paragraphs.clear();
  for (std::size_t i = 0; i < texts.size(); ++i) {
    Paragraph p;
    p.text = texts[i].get<std::string>();
    if (i < refs.size()) p.figure_refs = refs[i].get<std::vector<std::string>>();
    s.paragraphs.push_back(std::move(p));
  }
}

void to_json(json& j, const FigureUnit& f) {
  j = json{{"label", f.label},
           {"caption", f.caption},
           {"image_path", f.image_path},
           {"number", f.number},
           {"declared_in_section", f.declared_in_section},
           {"eligible", f.eligible},
           {"reference_count", f.reference_count}};
}

void from_json(const json& j, FigureUnit& f) {
  f.label = j.at("label").get<std::string>();
  f.caption = j.at("caption").get<std::string>();
  f.image_path = j.value("image_path", "");
  f.number = j.value("number", 0);
  f.declared_in_section = j.at("declared_in_section").get<int>();
  f.eligible = j.value("eligible", false);
  f.reference_count = j.value("reference_count", 0);
}

void to_json(json& j, const PaperRecord& p) {
  j = json{{"schema", util::kSchema},
           {"paper_id", p.paper_id},
           {"title", p.title},
           {"abstract", p.abstract},
           {"sections", p.sections},
           {"figures", p.figures},
           {"domain_tag", to_string(p.domain_tag)},
           {"dangling_refs", p.dangling_refs},
           {"warnings", p.warnings}};
  j["results_onward_ordinal"] =
      p.results_onward_ordinal ? json(*p.results_onward_ordinal) : json(nullptr);
}

void from_json(const json& j, PaperRecord& p) {
  p.paper_id = j.at("paper_id").get<std::string>();
  p.title = j.at("title").get<std::string>();
  p.abstract = j.at("abstract").get<std::string>();
  p.sections = j.at("sections").get<std::vector<SectionNode>>();
  p.figures = j.at("figures").get<std::vector<FigureUnit>>();
  p.domain_tag = domain_from_string(j.value("domain_tag", "other"));
  p.dangling_refs = j.value("dangling_refs", std::vector<std::string>{});
  p.warnings = j.value("warnings", std::vector<std::string>{});
  if (j.contains("results_onward_ordinal") && !j["results_onward_ordinal"].is_null())
    p.results_onward_ordinal = j["results_onward_ordinal"].get<int>();
  else
    p.results_onward_ordinal.reset();
}

}  // namespace mqud::paperstore
