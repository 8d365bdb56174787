#include "mqud/corpus/sft_export.hpp"

#include <algorithm>
#include <random>
#include <set>

#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::corpus {

std::map<std::string, std::size_t> stratified_quota(const std::map<std::string, std::size_t>& counts,
                                                    std::size_t total) {
  std::size_t n = 0;
  for (const auto& [k, c] : counts) n += c;
  std::map<std::string, std::size_t> quota;
  if (n == 0) return quota;
  total = std::min(total, n);
  struct Rem {
    std::string key;
    std::size_t numer;  // remainder numerator, out of n
  };
  std::vector<Rem> rems;
  std::size_t given = 0;
  for (const auto& [k, c] : counts) {
    quota[k] = c * total / n;
    given += quota[k];
    rems.push_back({k, c * total % n});
  }
  std::stable_sort(rems.begin(), rems.end(), [](const Rem& a, const Rem& b) { return a.numer > b.numer; });
  for (std::size_t i = 0; given < total; i = (i + 1) % rems.size()) {
    if (quota[rems[i].key] < counts.at(rems[i].key)) {
      ++quota[rems[i].key];
      ++given;
    }
  }
  return quota;
}

namespace {

json export_line(const QudRecord& r, const std::string& split) {
  const auto& c = r.context;
  json input = {{"paper_id", c.paper_id}, {"figure_label", c.figure_label}, {"title", c.title},
                {"abstract", c.abstract}, {"caption", c.caption}};
  input["image_ref"] = c.image_ref ? json(*c.image_ref) : json(nullptr);
  json line = {{"schema", util::kSchema},
               {"qud_id", r.qud_id},
               {"split", split},
               {"input", input},
               {"target", r.question},
               {"qud_type", to_string(r.qud_type)},
               {"provenance", to_string(r.provenance)}};
  line["parent_id"] = r.parent_id ? json(*r.parent_id) : json(nullptr);
  return line;
}

}  // namespace

SftExport build_sft_export(const std::vector<QudRecord>& quds, const std::vector<QudRecord>& variants,
                           const std::vector<AnnotationRecord>& annotations, const FilterPolicy& policy) {
  std::map<std::string, const AnnotationRecord*> latest;
  for (const auto& a : annotations)
    if (a.source == AnnotationSource::human_expert) latest[a.qud_id] = &a;

  const std::set<std::string> disjoint(policy.disjoint_paper_ids.begin(), policy.disjoint_paper_ids.end());
  std::vector<const QudRecord*> retained;
  for (const auto& q : quds) {
    if (q.provenance != Provenance::generated) continue;
    auto it = latest.find(q.qud_id);
    if (it == latest.end()) continue;
    if (it->second->answer_correct != AnswerCorrect::acceptable) continue;
    if (policy.require_figure_useful && it->second->figure_useful != FigureUseful::useful) continue;
    retained.push_back(&q);
  }
  if (retained.empty()) throw Error(ErrorKind::EmptyExport, "no QUD survives the export policy");

  SftExport out;
  out.retained_originals = retained.size();
  out.splits.seed = policy.seed;
  out.splits.disjoint_paper_ids = policy.disjoint_paper_ids;
  std::sort(out.splits.disjoint_paper_ids.begin(), out.splits.disjoint_paper_ids.end());

  // Stratify the in-distribution pool by type; each stratum is shuffled from
  // its own seeded stream over id-sorted members.
  std::map<std::string, std::vector<std::string>> strata;
  for (const auto* q : retained)
    if (!disjoint.count(q->context.paper_id)) strata[std::string(to_string(q->qud_type))].push_back(q->qud_id);
  std::map<std::string, std::size_t> counts;
  for (auto& [type, ids] : strata) {
    std::sort(ids.begin(), ids.end());
    counts[type] = ids.size();
  }
  const auto quota = stratified_quota(counts, policy.validation_size);
  std::set<std::string> validation;
  for (auto& [type, ids] : strata) {
    std::mt19937_64 rng(util::mix_seed(policy.seed, util::stable_u64(type)));
    std::shuffle(ids.begin(), ids.end(), rng);
    const auto take = quota.count(type) ? quota.at(type) : 0;
    for (std::size_t i = 0; i < take; ++i) validation.insert(ids[i]);
  }

  std::set<std::string> train_parents;
  for (const auto* q : retained) {
    std::string split;
    if (disjoint.count(q->context.paper_id)) {
      split = "eval_disjoint";
      out.splits.eval_disjoint.push_back(q->qud_id);
    } else if (validation.count(q->qud_id)) {
      split = "validation";
      out.splits.validation.push_back(q->qud_id);
      out.splits.eval_within.push_back(q->qud_id);
    } else {
      split = "train";
      out.splits.train.push_back(q->qud_id);
      train_parents.insert(q->qud_id);
    }
    out.lines.push_back(export_line(*q, split));
  }
  for (const auto& v : variants) {
    if (v.provenance != Provenance::rephrase_variant || !v.parent_id) continue;
    if (!train_parents.count(*v.parent_id) || v.grounded != true) {
      ++out.variants_dropped;
      continue;
    }
    out.splits.train.push_back(v.qud_id);
    out.lines.push_back(export_line(v, "train"));
    ++out.variants_included;
  }
  return out;
}

}  // namespace mqud::corpus
