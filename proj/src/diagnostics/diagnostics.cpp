#include "mqud/diagnostics/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "mqud/diagnostics/bootstrap.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"

namespace mqud::diagnostics {

namespace {

constexpr std::uint64_t kSwapStream = 0x53574150;  // "SWAP"

json opt(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
json opt(const std::optional<std::string>& v) { return v ? json(*v) : json(nullptr); }

}  // namespace

void to_json(json& j, const NllTrace& t) {
  j = json{{"schema", util::kSchema},
           {"qud_id", t.qud_id},
           {"paper_id", t.paper_id},
           {"figure_label", t.figure_label},
           {"qud_type", corpus::to_string(t.qud_type)},
           {"nll_mm", t.nll_mm},
           {"nll_to", t.nll_to},
           {"nll_swap", opt(t.nll_swap)},
           {"swap_figure_label", opt(t.swap_figure_label)},
           {"model_tag", t.model_tag},
           {"tokens", {{"mm", t.tokens_mm}, {"to", t.tokens_to}, {"swap", t.tokens_swap}}},
           {"flags", t.flags}};
}

void from_json(const json& j, NllTrace& t) {
  t.qud_id = j.at("qud_id").get<std::string>();
  t.paper_id = j.value("paper_id", "");
  t.figure_label = j.value("figure_label", "");
  auto type = corpus::parse_enum<corpus::QudType>(j.at("qud_type").get<std::string>());
  if (!type) throw Error(ErrorKind::InvariantViolation, t.qud_id + ": trace qud_type out of vocabulary");
  t.qud_type = *type;
  t.nll_mm = j.at("nll_mm").get<double>();
  t.nll_to = j.at("nll_to").get<double>();
  t.nll_swap = j.contains("nll_swap") && !j["nll_swap"].is_null() ? std::optional<double>(j["nll_swap"].get<double>())
                                                                  : std::nullopt;
  t.swap_figure_label = j.contains("swap_figure_label") && !j["swap_figure_label"].is_null()
                            ? std::optional<std::string>(j["swap_figure_label"].get<std::string>())
                            : std::nullopt;
  t.model_tag = j.value("model_tag", "");
  if (j.contains("tokens")) {
    t.tokens_mm = j["tokens"].value("mm", std::size_t{0});
    t.tokens_to = j["tokens"].value("to", std::size_t{0});
    t.tokens_swap = j["tokens"].value("swap", std::size_t{0});
  }
  t.flags = j.value("flags", std::vector<std::string>{});
}

void validate(const NllTrace& t) {
  auto bad = [](double v) { return !std::isfinite(v) || v <= 0.0; };
  if (bad(t.nll_mm) || bad(t.nll_to) || (t.nll_swap && bad(*t.nll_swap)))
    throw Error(ErrorKind::InvariantViolation, t.qud_id + ": NLLs must be finite and positive");
  if (t.nll_swap.has_value() != t.swap_figure_label.has_value())
    throw Error(ErrorKind::InvariantViolation, t.qud_id + ": nll_swap and swap_figure_label come together");
  if (t.swap_figure_label && *t.swap_figure_label == t.figure_label)
    throw Error(ErrorKind::InvariantViolation, t.qud_id + ": swap figure equals the item's own figure");
}

double mean_nll(const backend::ScoreResponse& r) {
  if (r.token_nlls.empty()) return r.mean_nll;
  return std::accumulate(r.token_nlls.begin(), r.token_nlls.end(), 0.0) / static_cast<double>(r.token_nlls.size());
}

ScoredConditions score_conditions(backend::ScoringBackend& backend, const corpus::QudRecord& record,
                                  const std::optional<SwapTarget>& swap, const std::vector<std::string>& conditions) {
  auto wants = [&](const char* c) { return std::find(conditions.begin(), conditions.end(), c) != conditions.end(); };
  if (!wants("mm") || !wants("to"))
    throw Error(ErrorKind::ConfigError, "conditions must include mm and to");
  if (swap) {
    if (swap->paper_id != record.context.paper_id)
      throw Error(ErrorKind::InvariantViolation, record.qud_id + ": swap figure from another paper");
    if (swap->figure_label == record.context.figure_label)
      throw Error(ErrorKind::InvariantViolation, record.qud_id + ": swap figure is the item's own figure");
  }

  ScoredConditions out;
  NllTrace& t = out.trace;
  t.qud_id = record.qud_id;
  t.paper_id = record.context.paper_id;
  t.figure_label = record.context.figure_label;
  t.qud_type = record.qud_type;
  t.model_tag = backend.model_tag();

  backend::ScoreRequest base{record.context.title, record.context.abstract, record.context.caption, std::nullopt,
                             record.question};
  auto run = [&](const char* condition, std::optional<std::string> image, std::size_t& tokens) {
    auto req = base;
    req.image_ref = std::move(image);
    out.requests.push_back({condition, req});
    auto res = backend.score(req);
    tokens = res.token_nlls.size();
    return mean_nll(res);
  };
  t.nll_mm = run("mm", record.context.image_ref, t.tokens_mm);
  t.nll_to = run("to", std::nullopt, t.tokens_to);
  if (wants("swap")) {
    if (swap) {
      t.nll_swap = run("swap", swap->image_ref, t.tokens_swap);
      t.swap_figure_label = swap->figure_label;
    } else {
      t.flags.push_back("NoSwapCandidate");
    }
  }
  validate(t);
  return out;
}

double rig(const NllTrace& t) {
  if (!(t.nll_mm >= kDegenerateNll))
    throw Error(ErrorKind::DegenerateTrace, t.qud_id + ": nll_mm below " + std::to_string(kDegenerateNll));
  return (t.nll_to - t.nll_mm) / t.nll_mm;
}

double swap_gap(const NllTrace& t) {
  if (!t.nll_swap) throw Error(ErrorKind::MissingSwap, t.qud_id + ": no swap condition");
  return *t.nll_swap - t.nll_to;
}

json to_json(const DiagnosticReport& r) {
  json per_type = json::object();
  for (const auto& [type, s] : r.per_type) per_type[type] = {{"n", s.n}, {"rig_mean", s.rig_mean}};
  json excluded = json::array();
  for (const auto& [id, why] : r.excluded) excluded.push_back({{"qud_id", id}, {"reason", why}});
  json j = {{"schema", util::kSchema},
            {"model_tag", r.model_tag},
            {"n", r.n},
            {"delta_l_mean", r.delta_l_mean},
            {"rig_mean", r.rig_mean},
            {"rig_ci", {r.rig_ci.lo, r.rig_ci.hi}},
            {"swap_n", r.swap_n},
            {"swap_mean", opt(r.swap_mean)},
            {"swap_positive_rate", opt(r.swap_positive_rate)},
            {"per_type", per_type},
            {"excluded", excluded},
            {"resamples", r.resamples},
            {"seed", r.seed},
            {"ci_method", "percentile bootstrap over items, 95%"},
            {"mean_convention", "point estimates are item means"}};
  j["swap_ci"] = r.swap_ci ? json{r.swap_ci->lo, r.swap_ci->hi} : json(nullptr);
  return j;
}

DiagnosticReport aggregate(std::vector<NllTrace> traces, int resamples, std::uint64_t seed, Kernel kernel) {
  if (traces.empty()) throw Error(ErrorKind::EmptyInput, "no traces to aggregate");
  if (resamples < 1) throw Error(ErrorKind::ConfigError, "resamples must be >= 1");
  std::stable_sort(traces.begin(), traces.end(), [](const NllTrace& a, const NllTrace& b) {
    return std::tie(a.qud_id, a.model_tag) < std::tie(b.qud_id, b.model_tag);
  });
  auto boot = kernel == Kernel::parallel ? bootstrap_means_parallel : bootstrap_means_serial;

  DiagnosticReport r;
  r.model_tag = traces.front().model_tag;
  r.resamples = resamples;
  r.seed = seed;
  std::vector<double> rigs, deltas, gaps;
  std::map<std::string, std::pair<std::size_t, double>> by_type;
  std::size_t positive = 0;
  for (const auto& t : traces) {
    double g = 0.0;
    try {
      g = rig(t);
    } catch (const Error& e) {
      r.excluded.emplace_back(t.qud_id, std::string(to_string(e.kind())));
      continue;
    }
    rigs.push_back(g);
    deltas.push_back(t.nll_to - t.nll_mm);
    auto& bt = by_type[std::string(corpus::to_string(t.qud_type))];
    ++bt.first;
    bt.second += g;
    if (t.nll_swap) {
      gaps.push_back(swap_gap(t));
      positive += gaps.back() > 0.0;
    }
  }
  if (rigs.empty()) throw Error(ErrorKind::EmptyInput, "every trace is degenerate");
  r.n = rigs.size();
  r.delta_l_mean = mean(deltas);
  r.rig_mean = mean(rigs);
  auto [lo, hi] = percentile_ci(boot(rigs, resamples, seed));
  r.rig_ci = {lo, hi};
  r.swap_n = gaps.size();
  if (!gaps.empty()) {
    r.swap_mean = mean(gaps);
    auto [slo, shi] = percentile_ci(boot(gaps, resamples, util::mix_seed(seed, kSwapStream)));
    r.swap_ci = Interval{slo, shi};
    r.swap_positive_rate = static_cast<double>(positive) / static_cast<double>(gaps.size());
  }
  for (const auto& [type, s] : by_type) r.per_type[type] = {s.first, s.second / static_cast<double>(s.first)};
  return r;
}

std::map<corpus::QudType, double> per_type_rig(const std::vector<NllTrace>& traces) {
  if (traces.empty()) throw Error(ErrorKind::EmptyInput, "no traces");
  std::map<corpus::QudType, std::pair<std::size_t, double>> acc;
  for (const auto& t : traces) {
    auto& a = acc[t.qud_type];
    ++a.first;
    a.second += rig(t);
  }
  std::map<corpus::QudType, double> out;
  for (const auto& [type, a] : acc) out[type] = a.second / static_cast<double>(a.first);
  return out;
}

std::string format_report(const DiagnosticReport& r) {
  std::string out = fmt::format("model {}  n = {}  (excluded {})\n", r.model_tag, r.n, r.excluded.size());
  out += fmt::format("  delta_L mean  {:+.4f}\n", r.delta_l_mean);
  out += fmt::format("  rIG mean      {:+.4f}  95% CI [{:+.4f}, {:+.4f}]\n", r.rig_mean, r.rig_ci.lo, r.rig_ci.hi);
  if (r.swap_mean)
    out += fmt::format("  swap gap mean {:+.4f}  95% CI [{:+.4f}, {:+.4f}]  positive {:.1f}% of {}\n", *r.swap_mean,
                       r.swap_ci->lo, r.swap_ci->hi, 100.0 * *r.swap_positive_rate, r.swap_n);
  else
    out += "  swap gap      n/a (no swap condition)\n";
  for (const auto& [type, s] : r.per_type)
    out += fmt::format("  {:<12} n {:>4}  rIG {:+.4f}\n", type, s.n, s.rig_mean);
  out += fmt::format("  {} resamples, seed {}\n", r.resamples, r.seed);
  return out;
}

}  // namespace mqud::diagnostics
