#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mqud/corpus/types.hpp"

namespace mqud::corpus {

struct FilterPolicy {
  // Also require figure_useful = useful on the deciding annotation.
  bool require_figure_useful = false;
  std::size_t validation_size = 51;
  std::uint64_t seed = 0;
  // Originals from these papers go to eval_disjoint and never to train.
  std::vector<std::string> disjoint_paper_ids;
};

struct SftExport {
  std::vector<json> lines;  // sft_export.jsonl rows
  SplitManifest splits;
  std::size_t retained_originals = 0;
  std::size_t variants_included = 0;
  std::size_t variants_dropped = 0;
};

/// Keeps originals whose latest human annotation (file order) rates the answer
/// acceptable, splits them into validation (seeded, stratified by qud_type),
/// train and eval_disjoint, then adds grounded variants of train parents.
/// Throws EmptyExport when no original survives.
SftExport build_sft_export(const std::vector<QudRecord>& quds, const std::vector<QudRecord>& variants,
                           const std::vector<AnnotationRecord>& annotations, const FilterPolicy& policy);

/// Largest-remainder allocation of `total` slots proportional to `counts`;
/// leftover slots go to larger remainders, ties to the earlier key.
std::map<std::string, std::size_t> stratified_quota(const std::map<std::string, std::size_t>& counts,
                                                    std::size_t total);

}  // namespace mqud::corpus
