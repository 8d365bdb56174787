// Acceptance checks. One PASS/FAIL/SKIP line per criterion; exit 1 on any FAIL.
//
// MQUD_UPDATE_GOLDEN=1 rewrites tests/fixtures/golden_hashes.json from the
// current end-to-end outputs. MQUD_RELEASE_DIR points at a released corpus
// (papers.jsonl, quds.jsonl, annotations.jsonl) for the corpus statistics check.

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "mqud/analysis/analysis.hpp"
#include "mqud/backend/chat.hpp"
#include "mqud/cli/cli.hpp"
#include "mqud/corpus/store.hpp"
#include "mqud/diagnostics/bootstrap.hpp"
#include "mqud/diagnostics/diagnostics.hpp"
#include "mqud/genpipe/filter.hpp"
#include "mqud/judge/judge.hpp"
#include "mqud/paperstore/eligibility.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"
#include "support.hpp"

using namespace mqud;
using testing::TempDir;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  enum Status { pass, fail, skip } status = fail;
  std::string detail;
};

Outcome ok(bool cond, std::string detail) { return {cond ? Outcome::pass : Outcome::fail, std::move(detail)}; }

int failures = 0;

void check(const std::string& name, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {Outcome::fail, std::string("threw ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const char* tag = o.status == Outcome::pass ? "PASS" : o.status == Outcome::skip ? "SKIP" : "FAIL";
  if (o.status == Outcome::fail) ++failures;
  fmt::print("{} {}: {} ({:.3f} s)\n", tag, name, o.detail, secs);
  std::fflush(stdout);
}

double elapsed_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

diagnostics::NllTrace make_trace(int i, double mm, double to, std::optional<double> swap) {
  diagnostics::NllTrace t;
  t.qud_id = fmt::format("q{:04d}", i);
  t.paper_id = "p";
  t.figure_label = "f";
  t.nll_mm = mm;
  t.nll_to = to;
  t.nll_swap = swap;
  if (swap) t.swap_figure_label = "g";
  t.model_tag = "m";
  return t;
}

// Empirical quantile with linear interpolation between order statistics,
// computed on a weighted support (value, multiplicity).
double weighted_quantile(std::vector<std::pair<double, std::size_t>> support, double q) {
  std::sort(support.begin(), support.end());
  std::size_t total = 0;
  for (const auto& s : support) total += s.second;
  const double h = q * static_cast<double>(total - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  auto nth = [&](std::size_t k) {
    for (const auto& [v, c] : support) {
      if (k < c) return v;
      k -= c;
    }
    return support.back().first;
  };
  const double a = nth(lo), b = nth(std::min(lo + 1, total - 1));
  return a + (h - static_cast<double>(lo)) * (b - a);
}

Outcome formula_oracles() {
  std::mt19937_64 rng(20240601);
  std::uniform_real_distribution<double> u(0.01, 20.0);
  const auto t0 = std::chrono::steady_clock::now();
  double worst_rig = 0, worst_gap = 0;
  for (int i = 0; i < 1000; ++i) {
    const double mm = u(rng), to = u(rng), sw = u(rng);
    const auto t = make_trace(i, mm, to, sw);
    const long double want_rig = (static_cast<long double>(to) - mm) / mm;
    const long double want_gap = static_cast<long double>(sw) - to;
    worst_rig = std::max(worst_rig, static_cast<double>(std::fabs(diagnostics::rig(t) - want_rig)));
    worst_gap = std::max(worst_gap, static_cast<double>(std::fabs(diagnostics::swap_gap(t) - want_gap)));
  }
  const double secs = elapsed_since(t0);
  return ok(worst_rig <= 1e-12 && worst_gap <= 1e-12 && secs < 1.0,
            fmt::format("1000 triples, max |rIG err| {:.2e}, max |gap err| {:.2e}, tol 1e-12, {:.3f}s < 1s", worst_rig,
                        worst_gap, secs));
}

Outcome bootstrap_oracle() {
  const std::vector<double> x = {0.30, 0.32, 0.34, 0.36};
  std::vector<diagnostics::NllTrace> traces;
  for (std::size_t i = 0; i < x.size(); ++i) traces.push_back(make_trace(static_cast<int>(i), 1.0, 1.0 + x[i], {}));
  const auto t0 = std::chrono::steady_clock::now();
  const auto rep = diagnostics::aggregate(traces, 10000, 7);
  const auto means = diagnostics::bootstrap_means_parallel(
      [&] {
        std::vector<double> r;
        for (const auto& t : traces) r.push_back(diagnostics::rig(t));
        return r;
      }(),
      10000, 7);
  const double secs = elapsed_since(t0);

  // All 4^4 ordered resamples, each with probability 1/256.
  std::map<double, std::size_t> counts;
  double exact_mean = 0;
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b)
      for (int c = 0; c < 4; ++c)
        for (int d = 0; d < 4; ++d) {
          const double m = (x[a] + x[b] + x[c] + x[d]) / 4.0;
          // Round away representation noise so equal sums share one support point.
          ++counts[std::round(m * 1e12) / 1e12];
          exact_mean += m / 256.0;
        }
  std::vector<std::pair<double, std::size_t>> support(counts.begin(), counts.end());
  // Scale the exact distribution to the resample count so both quantiles use the same interpolation grid.
  for (auto& s : support) s.second *= 10000;
  const double exact_lo = weighted_quantile(support, 0.025), exact_hi = weighted_quantile(support, 0.975);

  const double boot_mean = diagnostics::mean(means);
  const double d_mean = std::fabs(boot_mean - exact_mean);
  const double d_point = std::fabs(rep.rig_mean - diagnostics::mean(x));
  const double d_lo = std::fabs(rep.rig_ci.lo - exact_lo), d_hi = std::fabs(rep.rig_ci.hi - exact_hi);
  const bool good = d_mean <= 0.01 && d_point <= 1e-12 && d_lo <= 0.01 && d_hi <= 0.01 && secs < 5.0;
  return ok(good, fmt::format("exhaustive mean {:.4f} CI [{:.4f}, {:.4f}]; bootstrap mean {:.4f} CI [{:.4f}, {:.4f}]; "
                              "tol 0.01, {:.3f}s < 5s",
                              exact_mean, exact_lo, exact_hi, boot_mean, rep.rig_ci.lo, rep.rig_ci.hi, secs));
}

const std::vector<std::string> kGoldenFiles = {"papers.jsonl",         "assets.manifest",     "candidates.jsonl",
                                               "filter_reports.jsonl", "quds.jsonl",          "judge_verdicts.jsonl",
                                               "annotations.jsonl",    "traces_mock.jsonl",   "diagnostics_mock.json",
                                               "score_requests_mock.jsonl"};

int pipeline(const fs::path& dir) {
  const std::string w = dir.string();
  const std::string cache = testing::fixture("score_cache.jsonl").string();
  const std::vector<std::vector<std::string>> steps = {
      {"ingest", testing::fixture("papers").string()},
      {"generate", "--backend", "mock"},
      {"filter", "--backend", "mock"},
      {"judge", "--backend", "mock"},
      {"diagnose", "--backend", "replay", "--cache", cache},
  };
  for (const auto& s : steps) {
    std::vector<std::string> args = {"mqud", "--workdir", w, "--log-level", "error"};
    args.insert(args.end(), s.begin(), s.end());
    if (const int rc = cli::run(args); rc != 0) return rc;
  }
  return 0;
}

std::map<std::string, std::string> output_hashes(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& f : kGoldenFiles) out[f] = fs::exists(dir / f) ? util::file_hash(dir / f) : "missing";
  return out;
}

// Kept between the end-to-end and swap checks.
TempDir* run_a = nullptr;
TempDir* run_b = nullptr;

Outcome end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const int rc_a = pipeline(run_a->path());
  const int rc_b = pipeline(run_b->path());
  const double secs = elapsed_since(t0);
  if (rc_a != 0 || rc_b != 0) return ok(false, fmt::format("pipeline exit status {} / {}", rc_a, rc_b));
  const auto ha = output_hashes(run_a->path()), hb = output_hashes(run_b->path());
  std::size_t differ = 0;
  for (const auto& [f, h] : ha) differ += hb.at(f) != h;

  const auto golden_path = testing::fixture("golden_hashes.json");
  if (const char* u = std::getenv("MQUD_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    util::write_text_file(golden_path, json(ha).dump(2) + "\n");
  }
  if (!fs::exists(golden_path)) return ok(false, "no golden hashes; rerun with MQUD_UPDATE_GOLDEN=1");
  const auto golden = json::parse(util::read_text_file(golden_path)).get<std::map<std::string, std::string>>();
  std::vector<std::string> mismatched;
  for (const auto& [f, h] : ha)
    if (!golden.count(f) || golden.at(f) != h) mismatched.push_back(f);
  const bool good = differ == 0 && mismatched.empty() && secs < 30.0;
  return ok(good, fmt::format("{} files, {} differ between runs, {} differ from golden{}, {:.3f}s < 30s",
                              ha.size(), differ, mismatched.size(),
                              mismatched.empty() ? "" : " (" + fmt::format("{}", fmt::join(mismatched, ",")) + ")",
                              secs));
}

const std::string kQuestion = "Why does the curve in the panel rise after the threshold?";

corpus::QudRecord filter_record(std::size_t index, const std::string& answer) {
  auto r = testing::make_qud("p", "f", corpus::QudType::cause, kQuestion + " #" + std::to_string(index));
  r.abstractive_answer = answer;
  return r;
}

genpipe::FilterResult filter_all_grounded(const std::vector<corpus::QudRecord>& records) {
  backend::ScriptedBackend b;
  for (std::size_t i = 0; i < records.size(); ++i) b.push(R"({"grounded": true, "reason": "supported"})");
  genpipe::FilterOptions opt;
  opt.dedup_threshold = 1.1;  // isolate the length rule
  return genpipe::filter_candidates(b, records, opt);
}

Outcome filter_boundaries() {
  const std::vector<std::size_t> lengths = {19, 20, 120, 121};
  const std::vector<bool> want = {false, true, true, false};
  std::vector<corpus::QudRecord> records;
  for (std::size_t i = 0; i < lengths.size(); ++i) records.push_back(filter_record(i, testing::words(lengths[i])));
  const auto res = filter_all_grounded(records);
  std::vector<bool> got;
  for (const auto& r : res.reports) got.push_back(r.kept);

  std::vector<corpus::QudRecord> outside;
  for (const auto& row : util::read_jsonl(testing::fixture("filter_out_of_range.jsonl")))
    outside.push_back(filter_record(outside.size(), row.at("answer").get<std::string>()));
  const auto res2 = filter_all_grounded(outside);
  std::size_t rejected = 0;
  for (const auto& r : res2.reports) rejected += !r.kept;

  auto show = [](const std::vector<bool>& v) {
    std::string s;
    for (bool b : v) s += b ? "T" : "F";
    return s;
  };
  return ok(got == want && outside.size() == 50 && rejected == outside.size(),
            fmt::format("19/20/120/121 words kept {} (want FTTF); out-of-range rejected {}/{}", show(got), rejected,
                        outside.size()));
}

judge::JudgeVerdict verdict(const corpus::AnnotationRecord& a) {
  judge::JudgeVerdict v;
  v.qud_id = a.qud_id;
  v.mapped = a;
  v.mapped.annotator_id = "judge";
  v.mapped.source = corpus::AnnotationSource::llm_judge;
  return v;
}

Outcome judge_metrics() {
  using corpus::AnswerCorrect;
  std::vector<corpus::AnnotationRecord> human;
  std::vector<judge::JudgeVerdict> judged;
  for (int i = 0; i < 10; ++i) {
    const auto id = fmt::format("q{}", i);
    human.push_back(testing::make_ann(id, "h", i < 8 ? AnswerCorrect::acceptable : AnswerCorrect::not_acceptable));
    judged.push_back(verdict(testing::make_ann(id, "judge", AnswerCorrect::acceptable)));
  }
  const auto m = judge::validate_judge(human, judged, judge::PairPolicy::all_annotations);
  const bool counts_ok = m.tp == 8 && m.fp == 2 && m.fn == 0;
  const bool prf_ok = std::fabs(m.precision - 0.800) <= 0.001 && std::fabs(m.recall - 1.000) <= 0.001 &&
                      std::fabs(m.f1 - 0.889) <= 0.001;

  // All three dimensions agree.
  std::vector<corpus::AnnotationRecord> h1;
  std::vector<judge::JudgeVerdict> j1;
  for (int i = 0; i < 6; ++i) {
    auto a = testing::make_ann(fmt::format("a{}", i), "h");
    a.figure_useful = i % 2 ? corpus::FigureUseful::useful : corpus::FigureUseful::not_useful;
    h1.push_back(a);
    j1.push_back(verdict(a));
  }
  const double all_agree = judge::annotator_agreement(h1, j1).reports.at(0).weighted;

  // Only answer-correct agrees.
  std::vector<corpus::AnnotationRecord> h2;
  std::vector<judge::JudgeVerdict> j2;
  for (int i = 0; i < 6; ++i) {
    auto a = testing::make_ann(fmt::format("b{}", i), "h");
    auto j = a;
    j.figure_useful = corpus::FigureUseful::not_useful;
    j.salience = corpus::Salience::not_salient;
    h2.push_back(a);
    j2.push_back(verdict(j));
  }
  const double ac_only = judge::annotator_agreement(h2, j2).reports.at(0).weighted;

  return ok(counts_ok && prf_ok && all_agree == 1.0 && ac_only == 0.5,
            fmt::format("TP={} FP={} FN={} P={:.3f} R={:.3f} F1={:.3f} (tol 0.001); weighted all-agree {} "
                        "answer-only {} (exact 1.0 / 0.5)",
                        m.tp, m.fp, m.fn, m.precision, m.recall, m.f1, all_agree, ac_only));
}

// Brute-force average ranks: rank = 1 + #smaller + (#equal − 1)/2.
std::vector<double> oracle_ranks(const std::vector<double>& x) {
  std::vector<double> r(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    double less = 0, equal = 0;
    for (double v : x) {
      less += v < x[i];
      equal += v == x[i];
    }
    r[i] = 1.0 + less + (equal - 1.0) / 2.0;
  }
  return r;
}

Outcome spearman_oracle() {
  std::vector<double> up, down;
  for (int i = 0; i < 10; ++i) {
    up.push_back(i * 1.5 + 2);
    down.push_back(100.0 - i * i);
  }
  const double rho_up = analysis::spearman(up, up).rho;
  const double rho_down = analysis::spearman(up, down).rho;

  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int> d(0, 4);
  std::size_t rank_mismatch = 0;
  double worst_rho = 0;
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> x, y;
    for (int i = 0; i < 12; ++i) {
      x.push_back(d(rng));
      y.push_back(d(rng));
    }
    auto distinct = [](std::vector<double> v) {
      std::sort(v.begin(), v.end());
      return std::unique(v.begin(), v.end()) - v.begin();
    };
    if (distinct(x) < 2 || distinct(y) < 2) continue;
    const auto rx = oracle_ranks(x), ry = oracle_ranks(y);
    rank_mismatch += analysis::average_ranks(x) != rx;
    rank_mismatch += analysis::average_ranks(y) != ry;
    // Pearson on the oracle ranks, written out independently.
    const double n = static_cast<double>(rx.size());
    double mx = 0, my = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) mx += rx[i] / n, my += ry[i] / n;
    double sxy = 0, sxx = 0, syy = 0;
    for (std::size_t i = 0; i < rx.size(); ++i) {
      sxy += (rx[i] - mx) * (ry[i] - my);
      sxx += (rx[i] - mx) * (rx[i] - mx);
      syy += (ry[i] - my) * (ry[i] - my);
    }
    const double want = sxy / std::sqrt(sxx * syy);
    worst_rho = std::max(worst_rho, std::fabs(analysis::spearman(x, y).rho - want));
  }
  const bool good = std::fabs(rho_up - 1.0) <= 1e-12 && std::fabs(rho_down + 1.0) <= 1e-12 && rank_mismatch == 0 &&
                    worst_rho <= 1e-12;
  return ok(good, fmt::format("monotone rho {:.12f}, reversed {:.12f}; tied ranks mismatching brute force {}; "
                              "max |rho err| {:.2e} (tol 1e-12)",
                              rho_up, rho_down, rank_mismatch, worst_rho));
}

Outcome release_stats() {
  const char* dir_env = std::getenv("MQUD_RELEASE_DIR");
  if (!dir_env || !*dir_env) return {Outcome::skip, "MQUD_RELEASE_DIR not set; the released corpus is not bundled"};
  const fs::path dir(dir_env);
  const auto quds = corpus::load_quds(dir / "quds.jsonl");
  const auto anns = corpus::load_annotations(dir / "annotations.jsonl");
  std::vector<corpus::AnnotationRecord> human, judged;
  for (const auto& a : anns) (a.source == corpus::AnnotationSource::human_expert ? human : judged).push_back(a);
  std::vector<paperstore::PaperRecord> papers;
  for (const auto& row : util::read_jsonl(dir / "papers.jsonl")) papers.push_back(row.get<paperstore::PaperRecord>());

  const auto s = analysis::corpus_stats(quds, anns);
  std::vector<std::string> bad;
  if (s["quds"].get<std::size_t>() != 1250) bad.push_back(fmt::format("quds {}", s["quds"].dump()));
  if (s["figures"].get<std::size_t>() != 245) bad.push_back(fmt::format("figures {}", s["figures"].dump()));
  if (std::fabs(s["quds_per_figure_mean"].get<double>() - 5.1) > 0.05)
    bad.push_back(fmt::format("per-figure {}", s["quds_per_figure_mean"].dump()));
  const std::vector<std::pair<std::string, double>> types = {{"cause", 24},     {"comparison", 19}, {"extent", 18},
                                                              {"consequence", 15}, {"concept", 13},    {"procedural", 11}};
  for (const auto& [t, pct] : types) {
    const double got = s["types"].contains(t) ? s["types"][t]["percent"].get<double>() : -100.0;
    if (std::fabs(got - pct) > 1.0) bad.push_back(fmt::format("{} {:.1f}%", t, got));
  }
  double cause_gap = -1;
  for (const auto& p : analysis::dependency_clusters(quds, anns))
    if (p.qud_type == corpus::QudType::cause) cause_gap = p.gap * 100.0;
  if (std::fabs(cause_gap - 56.0) > 2.0) bad.push_back(fmt::format("cause gap {:.1f}pp", cause_gap));
  const auto rc = analysis::refcount_correlations(papers, quds, human, judged, analysis::Granularity::per_qud);
  if (std::fabs(rc.useful.rho + 0.24) > 0.02) bad.push_back(fmt::format("useful rho {:.3f}", rc.useful.rho));
  if (std::fabs(rc.quality.rho - 0.16) > 0.02) bad.push_back(fmt::format("quality rho {:.3f}", rc.quality.rho));
  return ok(bad.empty(), bad.empty() ? "counts, type shares, cause gap and refcount rho within tolerance"
                                     : fmt::format("{}", fmt::join(bad, "; ")));
}

Outcome swap_partners() {
  const auto ta = util::read_jsonl(run_a->path() / "traces_mock.jsonl");
  const auto tb = util::read_jsonl(run_b->path() / "traces_mock.jsonl");
  if (ta.empty() || ta.size() != tb.size()) return ok(false, "trace files missing or of different size");
  std::map<std::string, std::size_t> eligible;
  std::vector<paperstore::PaperRecord> papers;
  for (const auto& row : util::read_jsonl(run_a->path() / "papers.jsonl")) {
    papers.push_back(row.get<paperstore::PaperRecord>());
    for (const auto& f : papers.back().figures) eligible[papers.back().paper_id] += f.eligible;
  }
  std::size_t differ = 0, self = 0, multi = 0, flagged = 0, single = 0, unflagged = 0;
  for (std::size_t i = 0; i < ta.size(); ++i) {
    const auto a = ta[i].get<diagnostics::NllTrace>(), b = tb[i].get<diagnostics::NllTrace>();
    differ += a.swap_figure_label != b.swap_figure_label;
    if (eligible[a.paper_id] >= 2) {
      ++multi;
      self += !a.swap_figure_label || *a.swap_figure_label == a.figure_label;
    } else {
      ++single;
      const bool f = std::find(a.flags.begin(), a.flags.end(), "NoSwapCandidate") != a.flags.end();
      (f ? flagged : unflagged)++;
    }
  }
  // Direct calls agree with themselves and with the traces.
  std::size_t direct_bad = 0;
  for (const auto& p : papers)
    for (const auto& f : p.figures) {
      if (!f.eligible) continue;
      const auto* x = paperstore::choose_swap_partner(p, f.label);
      const auto* y = paperstore::choose_swap_partner(p, f.label);
      direct_bad += x != y || (x && x->label == f.label);
    }
  const bool good = differ == 0 && self == 0 && multi > 0 && single > 0 && unflagged == 0 && direct_bad == 0;
  return ok(good, fmt::format("{} multi-figure traces, {} partner differ across runs, {} partner == F; "
                              "{} single-figure traces flagged NoSwapCandidate ({} not)",
                              multi, differ, self, flagged, unflagged));
}

}  // namespace

int main() {
  TempDir a("accept_a"), b("accept_b");
  run_a = &a;
  run_b = &b;
  check("formula_oracles", formula_oracles);
  check("bootstrap_exhaustive", bootstrap_oracle);
  check("end_to_end_determinism", end_to_end);
  check("filter_length_boundaries", filter_boundaries);
  check("judge_metrics_and_agreement", judge_metrics);
  check("spearman_oracle", spearman_oracle);
  check("release_corpus_stats", release_stats);
  check("swap_partner_determinism", swap_partners);
  fmt::print("{} failure(s)\n", failures);
  return failures ? 1 : 0;
}
