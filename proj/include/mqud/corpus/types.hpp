#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace mqud::corpus {

using nlohmann::json;

enum class QudType { cause, comparison, extent, consequence, procedural, concept_ };
enum class Difficulty { medium, hard };
enum class Provenance { generated, rephrase_variant };

enum class AnnotationSource { human_expert, llm_judge };
enum class Salience { salient, not_salient };
enum class FigureUseful { useful, not_useful };
enum class AnsweredByFigure { yes, no };
enum class AnswerCorrect { acceptable, not_acceptable };
enum class AnswerQuality { high, low };
enum class FigureType { result, data, method, comparison, other };
enum class QGrammar { acceptable, not_acceptable };

inline constexpr std::array<QudType, 6> kQudTypes = {QudType::cause,       QudType::comparison, QudType::extent,
                                                     QudType::consequence, QudType::procedural, QudType::concept_};

std::string_view to_string(QudType v);
std::string_view to_string(Difficulty v);
std::string_view to_string(Provenance v);
std::string_view to_string(AnnotationSource v);
std::string_view to_string(Salience v);
std::string_view to_string(FigureUseful v);
std::string_view to_string(AnsweredByFigure v);
std::string_view to_string(AnswerCorrect v);
std::string_view to_string(AnswerQuality v);
std::string_view to_string(FigureType v);
std::string_view to_string(QGrammar v);

/// Parses an enum by its wire name; nullopt when out of vocabulary.
template <typename E>
std::optional<E> parse_enum(std::string_view s);

/// Wire names of every value, in declaration order.
template <typename E>
std::vector<std::string> vocabulary();

/// The seven annotation dimensions by wire name, in the order of the
/// annotation scheme.
inline constexpr std::array<std::string_view, 7> kDimensions = {
    "salience", "figure_useful", "answered_by_figure", "answer_correct", "answer_quality", "figure_type", "q_grammar"};

/// Title + abstract + figure with caption.
struct TriggerContext {
  std::string paper_id;
  std::string figure_label;
  std::string title;
  std::string abstract;
  std::string caption;
  std::optional<std::string> image_ref;  // asset hash

  bool operator==(const TriggerContext&) const = default;
};

/// A character range within one paper paragraph.
struct EvidenceSpan {
  int section = 0;
  int paragraph = 0;
  std::size_t begin = 0;
  std::size_t end = 0;  // exclusive
  std::string text;

  bool operator==(const EvidenceSpan&) const = default;
};

/// Position and size of one anchor paragraph inside anchor_text.
struct AnchorSource {
  int section = 0;
  int paragraph = 0;
  std::size_t length = 0;

  bool operator==(const AnchorSource&) const = default;
};

struct QudRecord {
  std::string qud_id;
  TriggerContext context;
  std::string question;
  std::string abstractive_answer;
  std::vector<EvidenceSpan> extractive_evidence;
  std::string anchor_text;
  std::vector<AnchorSource> anchor_sources;
  QudType qud_type = QudType::cause;
  Difficulty difficulty = Difficulty::medium;
  Provenance provenance = Provenance::generated;
  std::optional<std::string> parent_id;
  // Set once the grounding check has run on this record.
  std::optional<bool> grounded;
  // Best longest-common-substring coverage of the backend's answer source.
  double evidence_coverage = 0.0;
  bool evidence_needs_review = false;

  bool operator==(const QudRecord&) const = default;
};

struct AnnotationRecord {
  std::string qud_id;
  std::string annotator_id;
  AnnotationSource source = AnnotationSource::human_expert;
  Salience salience = Salience::salient;
  FigureUseful figure_useful = FigureUseful::useful;
  AnsweredByFigure answered_by_figure = AnsweredByFigure::yes;
  AnswerCorrect answer_correct = AnswerCorrect::acceptable;
  AnswerQuality answer_quality = AnswerQuality::high;
  FigureType figure_type = FigureType::result;
  QGrammar q_grammar = QGrammar::acceptable;
  std::string notes;

  /// Wire value of a dimension by name (one of kDimensions).
  std::string dimension(std::string_view name) const;

  bool operator==(const AnnotationRecord&) const = default;
};

struct SplitManifest {
  std::vector<std::string> train;
  std::vector<std::string> validation;
  std::vector<std::string> eval_within;
  std::vector<std::string> eval_disjoint;
  std::vector<std::string> disjoint_paper_ids;
  std::uint64_t seed = 0;

  bool operator==(const SplitManifest&) const = default;
};

/// Content address: hash(paper_id, figure_label, normalized question).
std::string make_qud_id(const std::string& paper_id, const std::string& figure_label, const std::string& question);

/// Throws InvariantViolation when a record breaks its type invariants.
void validate(const QudRecord& r);
void validate(const AnnotationRecord& r);

void to_json(json& j, const TriggerContext& v);
void from_json(const json& j, TriggerContext& v);
void to_json(json& j, const EvidenceSpan& v);
void from_json(const json& j, EvidenceSpan& v);
void to_json(json& j, const QudRecord& v);
void from_json(const json& j, QudRecord& v);
void to_json(json& j, const AnnotationRecord& v);
/// Strict: every dimension must be present and in vocabulary, else
/// InvariantViolation.
void from_json(const json& j, AnnotationRecord& v);
void to_json(json& j, const SplitManifest& v);
void from_json(const json& j, SplitManifest& v);

}  // namespace mqud::corpus
