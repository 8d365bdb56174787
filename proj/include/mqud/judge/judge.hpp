#pragma once

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mqud/backend/chat.hpp"
#include "mqud/corpus/types.hpp"

namespace mqud::judge {

using nlohmann::json;

/// Raw output keys of the judge template with their allowed values.
const std::vector<std::pair<std::string, std::vector<std::string>>>& raw_vocabulary();

struct JudgeVerdict {
  std::string qud_id;
  json raw;  // the judge's keys verbatim
  corpus::AnnotationRecord mapped;

  bool operator==(const JudgeVerdict&) const = default;
};

void to_json(json& j, const JudgeVerdict& v);
void from_json(const json& j, JudgeVerdict& v);

/// Collapses the judge's three- and four-valued labels onto the annotation
/// enums. Throws UnknownLabel on a missing key or a value outside the
/// vocabulary. Notes are kept verbatim.
corpus::AnnotationRecord map_judge_labels(const std::string& qud_id, const json& raw, const std::string& annotator_id);

struct JudgeOptions {
  std::string model = "judge";
  json decoding = backend::default_decoding(backend::TemplateId::judge);
};

/// Builds the judge request (figure image attached) and maps the reply.
/// Re-asks once on an unparseable reply.
JudgeVerdict judge_qud(backend::ChatBackend& backend, const corpus::QudRecord& record, const JudgeOptions& options = {});

enum class PairPolicy {
  all_annotations,  // every human annotation against the judge verdict of its QUD
  per_qud_latest,   // the latest human annotation per QUD
};

std::string_view to_string(PairPolicy p);
PairPolicy pair_policy_from_string(std::string_view s);

struct BinaryMetrics {
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  std::size_t n = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

json to_json(const BinaryMetrics& m);

/// Precision, recall and F1 = 2PR/(P+R) from confusion counts; undefined
/// ratios are reported as 0.
BinaryMetrics binary_metrics(std::size_t tp, std::size_t fp, std::size_t fn, std::size_t tn);

/// Judge vs human on answer correctness (positive class: acceptable), the
/// human label taken as ground truth. Throws NoOverlap.
BinaryMetrics validate_judge(const std::vector<corpus::AnnotationRecord>& human,
                             const std::vector<JudgeVerdict>& judged, PairPolicy policy);

struct AgreementReport {
  std::string annotator_id;
  std::size_t n_pairs = 0;
  double agree_answer_correct = 0.0;
  double agree_figure_useful = 0.0;
  double agree_salience = 0.0;
  double weighted = 0.0;
};

struct AgreementSummary {
  std::vector<AgreementReport> reports;  // sorted by annotator_id
  double median_weighted = 0.0;          // lower median
};

json to_json(const AgreementSummary& s);

/// 0.5·answer_correct + 0.3·figure_useful + 0.2·salience.
double weighted_agreement(double answer_correct, double figure_useful, double salience);

/// Per-annotator exact agreement with the judge on the three weighted
/// dimensions. Throws NoOverlap when no annotation has a verdict.
AgreementSummary annotator_agreement(const std::vector<corpus::AnnotationRecord>& human,
                                     const std::vector<JudgeVerdict>& judged);

using AnnotationPair = std::pair<corpus::AnnotationRecord, corpus::AnnotationRecord>;

/// First two distinct human annotators of every QUD annotated twice or more.
std::vector<AnnotationPair> dual_pairs(const std::vector<corpus::AnnotationRecord>& human);

/// Per-dimension exact-match fraction. Throws NoOverlap on no pairs and
/// InvariantViolation on a malformed pair.
std::map<std::string, double> dual_annotator_exact_agreement(const std::vector<AnnotationPair>& pairs);

/// Blind paired rating files: each row shows the human and judge labels of one
/// QUD as anonymous sides A and B (seeded coin flip); `key` says which is which.
struct BlindExport {
  std::vector<json> pairs;
  std::vector<json> key;
};
BlindExport blind_pairs(const std::vector<corpus::AnnotationRecord>& human, const std::vector<JudgeVerdict>& judged,
                        std::uint64_t seed);

std::string format_metrics_table(const BinaryMetrics& m, const AgreementSummary* agreement);

}  // namespace mqud::judge
