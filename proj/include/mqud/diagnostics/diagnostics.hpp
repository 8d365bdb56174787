#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqud/backend/scoring.hpp"
#include "mqud/corpus/types.hpp"

namespace mqud::diagnostics {

using nlohmann::json;

/// Below this L_mm the relative gain is not computed.
inline constexpr double kDegenerateNll = 1e-6;

struct NllTrace {
  std::string qud_id;
  std::string paper_id;
  std::string figure_label;
  corpus::QudType qud_type = corpus::QudType::cause;
  double nll_mm = 0.0;
  double nll_to = 0.0;
  std::optional<double> nll_swap;
  std::optional<std::string> swap_figure_label;
  std::string model_tag;
  // Token counts reported by the backend per condition, for auditing.
  std::size_t tokens_mm = 0, tokens_to = 0, tokens_swap = 0;
  std::vector<std::string> flags;  // e.g. NoSwapCandidate

  bool operator==(const NllTrace&) const = default;
};

void to_json(json& j, const NllTrace& t);
void from_json(const json& j, NllTrace& t);

/// Throws InvariantViolation unless present NLLs are finite and positive and
/// the swap fields come together.
void validate(const NllTrace& t);

/// Another figure of the same paper to show in the swap condition.
struct SwapTarget {
  std::string paper_id;
  std::string figure_label;
  std::optional<std::string> image_ref;
};

struct ConditionRequest {
  std::string condition;  // mm | to | swap
  backend::ScoreRequest request;
};

struct ScoredConditions {
  NllTrace trace;
  std::vector<ConditionRequest> requests;  // as sent, for the audit
};

/// Mean per-token NLL: the token average when tokens are reported, else the
/// backend's mean.
double mean_nll(const backend::ScoreResponse& r);

/// Scores the reference question under the correct figure, no figure, and
/// (when `swap` is given) a different figure of the same paper. Title,
/// abstract and caption are the record's own in every condition; only the
/// image changes. Without a swap target the trace is flagged NoSwapCandidate.
ScoredConditions score_conditions(backend::ScoringBackend& backend, const corpus::QudRecord& record,
                                  const std::optional<SwapTarget>& swap, const std::vector<std::string>& conditions = {"mm", "to", "swap"});

/// (nll_to − nll_mm) / nll_mm. Throws DegenerateTrace when nll_mm < 1e-6.
double rig(const NllTrace& t);
/// nll_swap − nll_to. Throws MissingSwap.
double swap_gap(const NllTrace& t);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct TypeStat {
  std::size_t n = 0;
  double rig_mean = 0.0;
};

struct DiagnosticReport {
  std::string model_tag;
  std::size_t n = 0;  // items used (degenerate traces excluded)
  double delta_l_mean = 0.0;
  double rig_mean = 0.0;
  Interval rig_ci;
  std::size_t swap_n = 0;
  std::optional<double> swap_mean;
  std::optional<Interval> swap_ci;
  std::optional<double> swap_positive_rate;
  std::map<std::string, TypeStat> per_type;
  std::vector<std::pair<std::string, std::string>> excluded;  // (qud_id, reason)
  int resamples = 0;
  std::uint64_t seed = 0;
};

json to_json(const DiagnosticReport& r);

enum class Kernel { serial, parallel };

/// Item means, percentile bootstrap CIs (rIG and swap resampled on separate
/// seeded streams), swap-positive rate over items with a swap NLL, and
/// per-type rIG. Traces are put in qud_id order first, so the result does
/// not depend on input order. Throws EmptyInput.
DiagnosticReport aggregate(std::vector<NllTrace> traces, int resamples, std::uint64_t seed,
                           Kernel kernel = Kernel::parallel);

/// Mean rIG per type; types without items are omitted. Throws EmptyInput.
std::map<corpus::QudType, double> per_type_rig(const std::vector<NllTrace>& traces);

/// Human-readable summary of a report.
std::string format_report(const DiagnosticReport& r);

}  // namespace mqud::diagnostics
