#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mqud/corpus/types.hpp"
#include "mqud/paperstore/paper.hpp"

namespace mqud::analysis {

using nlohmann::json;

/// Counts and means over original (non-variant) QUDs, plus label
/// distributions over the human-annotated subset (latest human annotation
/// per QUD). Percentages are derived from the counts. Throws EmptyCorpus.
json corpus_stats(const std::vector<corpus::QudRecord>& quds, const std::vector<corpus::AnnotationRecord>& annotations);
std::string format_stats(const json& stats);

enum class Cluster { figure_driven, integration, other };
std::string_view to_string(Cluster c);

struct TypeDependencyPoint {
  corpus::QudType qud_type = corpus::QudType::cause;
  std::size_t n = 0;
  double rate_useful = 0.0;
  double rate_answerable = 0.0;
  double gap = 0.0;  // rate_useful − rate_answerable
  Cluster cluster = Cluster::other;
};

/// figure_driven iff both rates >= threshold; integration iff only
/// usefulness is; otherwise other.
Cluster cluster_for(double rate_useful, double rate_answerable, double threshold = 0.5);

/// Per-type usefulness and answerability rates over human annotations,
/// in type order. Throws EmptyInput.
std::vector<TypeDependencyPoint> dependency_clusters(const std::vector<corpus::QudRecord>& quds,
                                                     const std::vector<corpus::AnnotationRecord>& annotations,
                                                     double threshold = 0.5);
json to_json(const std::vector<TypeDependencyPoint>& points);
std::string clusters_csv(const std::vector<TypeDependencyPoint>& points);

/// Average ranks (1-based), ties share the mean of their positions.
std::vector<double> average_ranks(const std::vector<double>& x);
double pearson(const std::vector<double>& x, const std::vector<double>& y);

struct Correlation {
  double rho = 0.0;
  double p = 1.0;
  std::size_t n = 0;
};

/// Spearman rho as Pearson on average ranks; two-sided p from the t
/// approximation with n − 2 degrees of freedom. Throws EmptyInput for n < 3
/// and ConstantInput when either side is constant.
Correlation spearman(const std::vector<double>& x, const std::vector<double>& y);

enum class Granularity { per_qud, per_figure };
std::string_view to_string(Granularity g);
Granularity granularity_from_string(std::string_view s);

struct RefcountCorrelations {
  Granularity granularity = Granularity::per_qud;
  Correlation useful;
  Correlation quality;
  std::size_t human_labels = 0;
  std::size_t judge_labels = 0;
};

/// Reference count of each QUD's figure against binary usefulness and binary
/// answer quality. Labels come from the latest human annotation, falling back
/// to the judge's. Per-figure granularity averages the labels of a figure's
/// QUDs.
RefcountCorrelations refcount_correlations(const std::vector<paperstore::PaperRecord>& papers,
                                           const std::vector<corpus::QudRecord>& quds,
                                           const std::vector<corpus::AnnotationRecord>& human,
                                           const std::vector<corpus::AnnotationRecord>& judge,
                                           Granularity granularity);
json to_json(const RefcountCorrelations& c);

enum class DepthBinKind { integration_q, extraction_q, other };
std::string_view to_string(DepthBinKind b);

struct DepthRule {
  std::vector<std::string> leader;             // leading words
  DepthBinKind bin = DepthBinKind::other;
  std::vector<std::string> requires_any;       // later word that must appear, if any

  bool operator==(const DepthRule&) const = default;
};

struct DepthLexicon {
  std::string version;
  std::vector<DepthRule> rules;

  bool operator==(const DepthLexicon&) const = default;
};

/// Tab-separated: leader, bin, optional comma-separated required words.
/// Lines starting with '#' are comments; "# version<TAB>v" sets the version.
DepthLexicon parse_depth_lexicon(const std::string& tsv);
const std::string& builtin_depth_lexicon_tsv();
DepthLexicon load_depth_lexicon(const std::optional<std::filesystem::path>& path);

/// The longest matching leader wins; no match is `other`.
DepthBinKind depth_bin(const std::string& question, const DepthLexicon& lexicon);

struct DepthDistribution {
  std::map<std::string, std::size_t> counts;  // every bin present
  std::size_t total = 0;
  std::vector<std::pair<std::string, DepthBinKind>> items;
};

DepthDistribution depth_bins(const std::vector<std::string>& questions, const DepthLexicon& lexicon);
json to_json(const DepthDistribution& d);
std::string depth_csv(const DepthDistribution& d);

/// count / total as a percentage, 0 for an empty total.
double percent(std::size_t count, std::size_t total);

}  // namespace mqud::analysis
