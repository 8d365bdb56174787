#include "mqud/analysis/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <fmt/format.h>

#include "mqud/util/error.hpp"
#include "mqud/util/jsonl.hpp"
#include "mqud/util/text.hpp"

namespace mqud::analysis {

using corpus::AnnotationRecord;
using corpus::QudRecord;

double percent(std::size_t count, std::size_t total) {
  return total ? 100.0 * static_cast<double>(count) / static_cast<double>(total) : 0.0;
}

namespace {

json count_entry(std::size_t count, std::size_t total) { return {{"count", count}, {"percent", percent(count, total)}}; }

std::vector<const QudRecord*> originals(const std::vector<QudRecord>& quds) {
  std::vector<const QudRecord*> out;
  for (const auto& q : quds)
    if (q.provenance == corpus::Provenance::generated) out.push_back(&q);
  return out;
}

std::map<std::string, const AnnotationRecord*> latest_human(const std::vector<AnnotationRecord>& annotations) {
  std::map<std::string, const AnnotationRecord*> out;
  for (const auto& a : annotations)
    if (a.source == corpus::AnnotationSource::human_expert) out[a.qud_id] = &a;
  return out;
}

}  // namespace

json corpus_stats(const std::vector<QudRecord>& quds, const std::vector<AnnotationRecord>& annotations) {
  const auto orig = originals(quds);
  if (orig.empty()) throw Error(ErrorKind::EmptyCorpus, "no QUDs");
  std::set<std::string> papers;
  std::map<std::pair<std::string, std::string>, std::size_t> per_figure;
  std::map<std::string, std::size_t> types, difficulty;
  for (auto t : corpus::kQudTypes) types[std::string(corpus::to_string(t))] = 0;
  double answer_words = 0, source_words = 0;
  for (const auto* q : orig) {
    papers.insert(q->context.paper_id);
    ++per_figure[{q->context.paper_id, q->context.figure_label}];
    ++types[std::string(corpus::to_string(q->qud_type))];
    ++difficulty[std::string(corpus::to_string(q->difficulty))];
    answer_words += static_cast<double>(text::word_count(q->abstractive_answer));
    source_words += static_cast<double>(text::word_count(q->anchor_text));
  }
  const auto n = orig.size();
  json s;
  s["schema"] = util::kSchema;
  s["quds"] = n;
  s["papers"] = papers.size();
  s["figures"] = per_figure.size();
  s["quds_per_figure_mean"] = static_cast<double>(n) / static_cast<double>(per_figure.size());
  std::map<std::string, std::size_t> hist;
  for (const auto& [fig, c] : per_figure) ++hist[std::to_string(c)];
  s["figures_by_qud_count"] = hist;
  s["answer_words_mean"] = answer_words / static_cast<double>(n);
  s["source_words_mean"] = source_words / static_cast<double>(n);
  json jt = json::object();
  for (const auto& [t, c] : types) jt[t] = count_entry(c, n);
  s["types"] = jt;
  json jd = json::object();
  for (const auto& [d, c] : difficulty) jd[d] = count_entry(c, n);
  s["difficulty"] = jd;

  std::set<std::string> known;
  for (const auto* q : orig) known.insert(q->qud_id);
  auto latest = latest_human(annotations);
  for (auto it = latest.begin(); it != latest.end();) it = known.count(it->first) ? std::next(it) : latest.erase(it);
  if (latest.empty()) {
    s["annotations"] = {{"status", "no annotations"}, {"n", 0}};
    return s;
  }
  json ja = {{"status", "ok"}, {"n", latest.size()}};
  std::set<std::string> annotators;
  for (const auto& a : annotations)
    if (a.source == corpus::AnnotationSource::human_expert) annotators.insert(a.annotator_id);
  ja["annotators"] = annotators.size();
  for (auto dim : corpus::kDimensions) {
    std::map<std::string, std::size_t> counts;
    for (const auto& [id, a] : latest) ++counts[a->dimension(dim)];
    json jdim = json::object();
    for (const auto& [value, c] : counts) jdim[value] = count_entry(c, latest.size());
    ja[std::string(dim)] = jdim;
  }
  s["annotations"] = ja;
  return s;
}

std::string format_stats(const json& s) {
  std::string out;
  out += fmt::format("QUDs {}  papers {}  figures {}  QUDs/figure {:.1f}\n", s["quds"].get<std::size_t>(),
                     s["papers"].get<std::size_t>(), s["figures"].get<std::size_t>(),
                     s["quds_per_figure_mean"].get<double>());
  out += fmt::format("answer length {:.1f} words  source text {:.1f} words\n", s["answer_words_mean"].get<double>(),
                     s["source_words_mean"].get<double>());
  out += "type distribution\n";
  for (const auto& [t, e] : s["types"].items())
    out += fmt::format("  {:<12} {:>6}  {:>5.1f}%\n", t, e["count"].get<std::size_t>(), e["percent"].get<double>());
  const auto& a = s["annotations"];
  if (a["status"] != "ok") {
    out += "annotations: none\n";
    return out;
  }
  out += fmt::format("human-annotated subset N = {} ({} annotators)\n", a["n"].get<std::size_t>(),
                     a["annotators"].get<std::size_t>());
  for (auto dim : corpus::kDimensions) {
    out += fmt::format("  {}:", dim);
    for (const auto& [v, e] : a[std::string(dim)].items())
      out += fmt::format("  {} {} ({:.0f}%)", v, e["count"].get<std::size_t>(), e["percent"].get<double>());
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string_view to_string(Cluster c) {
  switch (c) {
    case Cluster::figure_driven: return "figure_driven";
    case Cluster::integration: return "integration";
    case Cluster::other: return "other";
  }
  return "?";
}

Cluster cluster_for(double rate_useful, double rate_answerable, double threshold) {
  if (rate_useful >= threshold && rate_answerable >= threshold) return Cluster::figure_driven;
  if (rate_useful >= threshold) return Cluster::integration;
  return Cluster::other;
}

std::vector<TypeDependencyPoint> dependency_clusters(const std::vector<QudRecord>& quds,
                                                     const std::vector<AnnotationRecord>& annotations,
                                                     double threshold) {
  std::map<std::string, corpus::QudType> type_of;
  for (const auto& q : quds) type_of[q.qud_id] = q.qud_type;
  std::map<corpus::QudType, std::array<std::size_t, 3>> acc;  // n, useful, answerable
  for (const auto& a : annotations) {
    if (a.source != corpus::AnnotationSource::human_expert) continue;
    auto it = type_of.find(a.qud_id);
    if (it == type_of.end()) continue;
    auto& c = acc[it->second];
    ++c[0];
    c[1] += a.figure_useful == corpus::FigureUseful::useful;
    c[2] += a.answered_by_figure == corpus::AnsweredByFigure::yes;
  }
  if (acc.empty()) throw Error(ErrorKind::EmptyInput, "no human annotations on known QUDs");
  std::vector<TypeDependencyPoint> out;
  for (auto t : corpus::kQudTypes) {
    auto it = acc.find(t);
    if (it == acc.end()) continue;
    const auto& c = it->second;
    TypeDependencyPoint p;
    p.qud_type = t;
    p.n = c[0];
    p.rate_useful = static_cast<double>(c[1]) / static_cast<double>(c[0]);
    p.rate_answerable = static_cast<double>(c[2]) / static_cast<double>(c[0]);
    p.gap = p.rate_useful - p.rate_answerable;
    p.cluster = cluster_for(p.rate_useful, p.rate_answerable, threshold);
    out.push_back(p);
  }
  return out;
}

json to_json(const std::vector<TypeDependencyPoint>& points) {
  json arr = json::array();
  const TypeDependencyPoint* max_gap = nullptr;
  for (const auto& p : points) {
    arr.push_back({{"qud_type", corpus::to_string(p.qud_type)},
                   {"n", p.n},
                   {"rate_useful", p.rate_useful},
                   {"rate_answerable", p.rate_answerable},
                   {"gap", p.gap},
                   {"cluster", to_string(p.cluster)}});
    if (!max_gap || p.gap > max_gap->gap) max_gap = &p;
  }
  json j = {{"schema", util::kSchema}, {"points", arr}};
  j["max_gap"] = max_gap ? json{{"qud_type", corpus::to_string(max_gap->qud_type)}, {"gap", max_gap->gap}} : json(nullptr);
  return j;
}

std::string clusters_csv(const std::vector<TypeDependencyPoint>& points) {
  std::string out = "qud_type,n,rate_useful,rate_answerable,gap,cluster\n";
  for (const auto& p : points)
    out += fmt::format("{},{},{:.6f},{:.6f},{:.6f},{}\n", corpus::to_string(p.qud_type), p.n, p.rate_useful,
                       p.rate_answerable, p.gap, to_string(p.cluster));
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> average_ranks(const std::vector<double>& x) {
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
  std::vector<double> ranks(x.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && x[idx[j + 1]] == x[idx[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[idx[k]] = r;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (sxx == 0 || syy == 0) throw Error(ErrorKind::ConstantInput, "correlation of a constant vector");
  return sxy / std::sqrt(sxx * syy);
}

Correlation spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw Error(ErrorKind::InvariantViolation, "correlation inputs differ in length");
  if (x.size() < 3) throw Error(ErrorKind::EmptyInput, "correlation needs at least 3 points");
  Correlation c;
  c.n = x.size();
  c.rho = std::clamp(pearson(average_ranks(x), average_ranks(y)), -1.0, 1.0);
  const double df = static_cast<double>(c.n) - 2.0;
  if (std::abs(c.rho) >= 1.0) {
    c.p = 0.0;
  } else {
    const double t = c.rho * std::sqrt(df / (1.0 - c.rho * c.rho));
    boost::math::students_t dist(df);
    c.p = 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t)));
  }
  return c;
}

std::string_view to_string(Granularity g) { return g == Granularity::per_qud ? "per_qud" : "per_figure"; }

Granularity granularity_from_string(std::string_view s) {
  if (s == "per_qud" || s == "qud") return Granularity::per_qud;
  if (s == "per_figure" || s == "figure") return Granularity::per_figure;
  throw Error(ErrorKind::ConfigError, "unknown granularity '" + std::string(s) + "'");
}

RefcountCorrelations refcount_correlations(const std::vector<paperstore::PaperRecord>& papers,
                                           const std::vector<QudRecord>& quds,
                                           const std::vector<AnnotationRecord>& human,
                                           const std::vector<AnnotationRecord>& judge, Granularity granularity) {
  std::map<std::pair<std::string, std::string>, int> refcount;
  for (const auto& p : papers)
    for (const auto& f : p.figures) refcount[{p.paper_id, f.label}] = f.reference_count;
  const auto h = latest_human(human);
  std::map<std::string, const AnnotationRecord*> j;
  for (const auto& a : judge) j[a.qud_id] = &a;

  RefcountCorrelations out;
  out.granularity = granularity;
  struct Acc {
    double x = 0, useful = 0, quality = 0;
    std::size_t n = 0;
  };
  std::map<std::pair<std::string, std::string>, Acc> figures;
  std::vector<double> xs, useful, quality;
  for (const auto* q : originals(quds)) {
    const auto key = std::make_pair(q->context.paper_id, q->context.figure_label);
    auto rc = refcount.find(key);
    if (rc == refcount.end()) continue;
    const AnnotationRecord* a = nullptr;
    if (auto it = h.find(q->qud_id); it != h.end()) {
      a = it->second;
      ++out.human_labels;
    } else if (auto jt = j.find(q->qud_id); jt != j.end()) {
      a = jt->second;
      ++out.judge_labels;
    }
    if (!a) continue;
    const double u = a->figure_useful == corpus::FigureUseful::useful ? 1.0 : 0.0;
    const double qv = a->answer_quality == corpus::AnswerQuality::high ? 1.0 : 0.0;
    if (granularity == Granularity::per_qud) {
      xs.push_back(rc->second);
      useful.push_back(u);
      quality.push_back(qv);
    } else {
      auto& f = figures[key];
      f.x = rc->second;
      f.useful += u;
      f.quality += qv;
      ++f.n;
    }
  }
  for (const auto& [key, f] : figures) {
    xs.push_back(f.x);
    useful.push_back(f.useful / static_cast<double>(f.n));
    quality.push_back(f.quality / static_cast<double>(f.n));
  }
  out.useful = spearman(xs, useful);
  out.quality = spearman(xs, quality);
  return out;
}

json to_json(const RefcountCorrelations& c) {
  return {{"schema", util::kSchema},
          {"granularity", to_string(c.granularity)},
          {"rho_useful", c.useful.rho},
          {"p_useful", c.useful.p},
          {"n_useful", c.useful.n},
          {"rho_quality", c.quality.rho},
          {"p_quality", c.quality.p},
          {"n_quality", c.quality.n},
          {"human_labels", c.human_labels},
          {"judge_labels", c.judge_labels}};
}

// ---------------------------------------------------------------------------

std::string_view to_string(DepthBinKind b) {
  switch (b) {
    case DepthBinKind::integration_q: return "integration_q";
    case DepthBinKind::extraction_q: return "extraction_q";
    case DepthBinKind::other: return "other";
  }
  return "?";
}

DepthLexicon parse_depth_lexicon(const std::string& tsv) {
  DepthLexicon lex;
  std::istringstream in(tsv);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line[0] == '#') {
      if (line.rfind("# version\t", 0) == 0) lex.version = line.substr(10);
      continue;
    }
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, '\t');) cols.push_back(c);
    if (cols.size() < 2) throw Error(ErrorKind::ConfigError, fmt::format("depth lexicon line {}: need 2 columns", lineno));
    DepthRule r;
    r.leader = text::alnum_tokens(cols[0]);
    if (cols[1] == "integration_q") r.bin = DepthBinKind::integration_q;
    else if (cols[1] == "extraction_q") r.bin = DepthBinKind::extraction_q;
    else throw Error(ErrorKind::ConfigError, fmt::format("depth lexicon line {}: bin '{}'", lineno, cols[1]));
    if (cols.size() > 2) {
      std::stringstream ws(cols[2]);
      for (std::string w; std::getline(ws, w, ',');)
        if (!w.empty()) r.requires_any.push_back(text::to_lower(w));
    }
    if (r.leader.empty()) throw Error(ErrorKind::ConfigError, fmt::format("depth lexicon line {}: empty leader", lineno));
    lex.rules.push_back(std::move(r));
  }
  return lex;
}

const std::string& builtin_depth_lexicon_tsv() {
  static const std::string tsv =
      "# Leading-word lexicon for question depth binning.\n"
      "# leader<TAB>bin<TAB>words that must appear later (optional, comma-separated)\n"
      "# version\t1\n"
      "why\tintegration_q\n"
      "how does\tintegration_q\n"
      "how do\tintegration_q\n"
      "how is\tintegration_q\n"
      "to what extent\tintegration_q\n"
      "what happens\tintegration_q\n"
      "what are the implications\tintegration_q\n"
      "how\tintegration_q\tdiffer,differs,different,difference,compare,compared,comparison\n"
      "how many\textraction_q\n"
      "how much\textraction_q\n"
      "what is\textraction_q\n"
      "which\textraction_q\n"
      "is\textraction_q\n"
      "are\textraction_q\n"
      "does\textraction_q\n"
      "do\textraction_q\n"
      "can\textraction_q\n";
  return tsv;
}

DepthLexicon load_depth_lexicon(const std::optional<std::filesystem::path>& path) {
  if (path) return parse_depth_lexicon(util::read_text_file(*path));
  return parse_depth_lexicon(builtin_depth_lexicon_tsv());
}

DepthBinKind depth_bin(const std::string& question, const DepthLexicon& lexicon) {
  const auto tokens = text::alnum_tokens(question);
  const DepthRule* best = nullptr;
  for (const auto& r : lexicon.rules) {
    if (r.leader.size() > tokens.size()) continue;
    if (!std::equal(r.leader.begin(), r.leader.end(), tokens.begin())) continue;
    if (!r.requires_any.empty()) {
      bool found = false;
      for (std::size_t k = r.leader.size(); k < tokens.size() && !found; ++k)
        found = std::find(r.requires_any.begin(), r.requires_any.end(), tokens[k]) != r.requires_any.end();
      if (!found) continue;
    }
    if (!best || r.leader.size() > best->leader.size()) best = &r;
  }
  return best ? best->bin : DepthBinKind::other;
}

DepthDistribution depth_bins(const std::vector<std::string>& questions, const DepthLexicon& lexicon) {
  DepthDistribution d;
  for (auto b : {DepthBinKind::integration_q, DepthBinKind::extraction_q, DepthBinKind::other})
    d.counts[std::string(to_string(b))] = 0;
  for (const auto& q : questions) {
    const auto b = depth_bin(q, lexicon);
    ++d.counts[std::string(to_string(b))];
    d.items.emplace_back(q, b);
  }
  d.total = questions.size();
  return d;
}

json to_json(const DepthDistribution& d) {
  json bins = json::object();
  for (const auto& [b, c] : d.counts) bins[b] = {{"count", c}, {"percent", percent(c, d.total)}};
  return {{"schema", util::kSchema}, {"total", d.total}, {"bins", bins}};
}

std::string depth_csv(const DepthDistribution& d) {
  std::string out = "bin,count,percent\n";
  for (const auto& [b, c] : d.counts) out += fmt::format("{},{},{:.4f}\n", b, c, percent(c, d.total));
  return out;
}

}  // namespace mqud::analysis
