#include "mqud/cli/cli.hpp"

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <ctime>
#include <functional>
#include <iostream>
#include <algorithm>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mqud/analysis/analysis.hpp"
#include "mqud/annosvc/http.hpp"
#include "mqud/annosvc/service.hpp"
#include "mqud/backend/chat.hpp"
#include "mqud/backend/scoring.hpp"
#include "mqud/corpus/sft_export.hpp"
#include "mqud/corpus/store.hpp"
#include "mqud/diagnostics/diagnostics.hpp"
#include "mqud/genpipe/augment.hpp"
#include "mqud/genpipe/filter.hpp"
#include "mqud/genpipe/generate.hpp"
#include "mqud/judge/judge.hpp"
#include "mqud/paperstore/assets.hpp"
#include "mqud/paperstore/eligibility.hpp"
#include "mqud/util/error.hpp"
#include "mqud/util/hash.hpp"
#include "mqud/util/jsonl.hpp"
#include "mqud/util/parallel.hpp"
#include "mqud/util/text.hpp"

namespace mqud::cli {

namespace fs = std::filesystem;
using util::json;

namespace {

std::string now_iso() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Resolved settings: flag > config file section for the command > config
// file top level > built-in default.
class Settings {
 public:
  std::map<std::string, std::string> flags;
  json file = json::object();
  std::string command;
  mutable json resolved = json::object();

  std::optional<json> lookup(const std::string& key) const {
    if (auto it = flags.find(key); it != flags.end()) return json(it->second);
    if (file.contains(command) && file[command].is_object() && file[command].contains(key))
      return std::optional<json>(std::in_place, file[command][key]);
    if (file.contains(key) && !file[key].is_object()) return std::optional<json>(std::in_place, file[key]);
    return std::nullopt;
  }

  std::string str_raw(const std::string& key, const std::string& def = "") const {
    auto v = lookup(key);
    if (!v) return def;
    return v->is_string() ? v->get<std::string>() : v->dump();
  }

  long integer_raw(const std::string& key, long def) const {
    auto v = lookup(key);
    if (!v) return def;
    if (v->is_number_integer()) return v->get<long>();
    try {
      std::size_t used = 0;
      const auto s = v->get<std::string>();
      long out = std::stol(s, &used);
      if (used != s.size()) throw std::invalid_argument(s);
      return out;
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "'" + key + "' must be an integer");
    }
  }

  std::uint64_t seed_raw(const std::string& key, std::uint64_t def) const {
    const long v = integer_raw(key, static_cast<long>(def));
    if (v < 0) throw Error(ErrorKind::ConfigError, "'" + key + "' must be >= 0");
    return static_cast<std::uint64_t>(v);
  }

  double real_raw(const std::string& key, double def) const {
    auto v = lookup(key);
    if (!v) return def;
    if (v->is_number()) return v->get<double>();
    try {
      return std::stod(v->get<std::string>());
    } catch (const std::exception&) {
      throw Error(ErrorKind::ConfigError, "'" + key + "' must be a number");
    }
  }

  bool boolean_raw(const std::string& key, bool def) const {
    auto v = lookup(key);
    if (!v) return def;
    if (v->is_boolean()) return v->get<bool>();
    const auto s = text::to_lower(v->is_string() ? v->get<std::string>() : v->dump());
    if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
    if (s == "false" || s == "0" || s == "no" || s == "off") return false;
    throw Error(ErrorKind::ConfigError, "'" + key + "' must be a boolean");
  }

  std::vector<std::string> list_raw(const std::string& key, const std::vector<std::string>& def) const {
    auto v = lookup(key);
    if (!v) return def;
    if (v->is_array()) return v->get<std::vector<std::string>>();
    std::vector<std::string> out;
    std::stringstream ss(v->get<std::string>());
    for (std::string item; std::getline(ss, item, ',');)
      if (auto t = text::trim(item); !t.empty()) out.emplace_back(t);
    return out;
  }

  // Every value a command reads, defaults included, lands in the run manifest.
  template <typename T>
  T note(const std::string& key, T value) const {
    static std::mutex mu;
    std::lock_guard lock(mu);
    resolved[key] = value;
    return value;
  }
  std::string str(const std::string& key, const std::string& def = "") const { return note(key, str_raw(key, def)); }
  long integer(const std::string& key, long def) const { return note(key, integer_raw(key, def)); }
  std::uint64_t seed(const std::string& key, std::uint64_t def) const { return note(key, seed_raw(key, def)); }
  double real(const std::string& key, double def) const { return note(key, real_raw(key, def)); }
  bool boolean(const std::string& key, bool def) const { return note(key, boolean_raw(key, def)); }
  std::vector<std::string> list(const std::string& key, const std::vector<std::string>& def = {}) const {
    return note(key, list_raw(key, def));
  }

  json snapshot() const {
    json j = file;
    for (const auto& [k, v] : flags) j["flags"][k] = v;
    return j;
  }
};

// One command execution. Collects inputs and outputs for the run manifest
// and the first error for the exit status.
struct Run {
  Settings settings;
  fs::path workdir;
  std::vector<fs::path> inputs;
  std::vector<fs::path> outputs;
  std::optional<ErrorKind> first_error;
  std::size_t item_errors = 0;

  fs::path path(const std::string& name) const { return workdir / name; }
  fs::path in(const std::string& name) {
    inputs.push_back(path(name));
    return path(name);
  }
  fs::path out(const std::string& name) {
    outputs.push_back(path(name));
    return path(name);
  }
  void item_failed(const std::string& what, const Error& e) {
    spdlog::error("{}: {}", what, e.what());
    ++item_errors;
    if (!first_error) first_error = e.kind();
  }
  int workers() const { return static_cast<int>(settings.integer("workers", 1)); }
  std::string backend_mode() const { return settings.str("backend", "mock"); }
};

std::vector<paperstore::PaperRecord> load_papers(Run& run) {
  const auto p = run.in("papers.jsonl");
  if (!fs::exists(p)) throw Error(ErrorKind::ConfigError, p.string() + " not found; run `mqud ingest` first");
  std::vector<paperstore::PaperRecord> out;
  for (const auto& row : util::read_jsonl(p)) out.push_back(row.get<paperstore::PaperRecord>());
  return out;
}

paperstore::AssetManifest load_manifest(Run& run) { return paperstore::AssetManifest::load(run.in("assets.manifest")); }

std::vector<std::string> split_ids(Run& run, const std::string& split, const std::vector<corpus::QudRecord>& quds) {
  std::vector<std::string> ids;
  if (split == "all") {
    for (const auto& q : quds)
      if (q.provenance == corpus::Provenance::generated) ids.push_back(q.qud_id);
    return ids;
  }
  const auto p = run.in("splits.json");
  if (!fs::exists(p)) throw Error(ErrorKind::ConfigError, "split '" + split + "' needs splits.json; run export-sft");
  const auto m = json::parse(util::read_text_file(p)).get<corpus::SplitManifest>();
  if (split == "train") return m.train;
  if (split == "validation") return m.validation;
  if (split == "eval_within") return m.eval_within;
  if (split == "eval_disjoint") return m.eval_disjoint;
  throw Error(ErrorKind::ConfigError, "unknown split '" + split + "'");
}

// Stored QUDs plus any rephrase variants; training splits name both.
std::vector<corpus::QudRecord> split_pool(Run& run) {
  auto quds = corpus::load_quds(run.in("quds.jsonl"));
  if (fs::exists(run.path("variants.jsonl")))
    for (auto& v : corpus::load_quds(run.in("variants.jsonl"))) quds.push_back(std::move(v));
  return quds;
}

std::vector<corpus::QudRecord> select_quds(const std::vector<corpus::QudRecord>& quds, const std::vector<std::string>& ids) {
  std::map<std::string, const corpus::QudRecord*> by_id;
  for (const auto& q : quds) by_id[q.qud_id] = &q;
  std::vector<corpus::QudRecord> out;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw Error(ErrorKind::InvariantViolation, "split names unknown QUD " + id);
    out.push_back(*it->second);
  }
  return out;
}

// Chat backend for the run's mode. Mock and live calls are recorded to the
// cache; replay only reads it.
struct ChatSetup {
  std::unique_ptr<backend::ResponseCache> cache;
  std::unique_ptr<backend::ChatBackend> base;
  std::unique_ptr<backend::ChatBackend> recorder;
  std::unique_ptr<backend::Throttle> throttle;
  std::unique_ptr<backend::ChatBackend> throttled;
  std::unique_ptr<paperstore::AssetStore> assets;
  fs::path cache_path;
  bool recording = false;

  backend::ChatBackend& get() { return *throttled; }
  void finish(Run& run) {
    if (recording) {
      cache->save();
      run.outputs.push_back(cache_path);
    }
  }
};

backend::LiveConfig live_config(const Run& run) {
  backend::LiveConfig c;
  c.base_url = run.settings.str("backend_url", std::getenv("MQUD_BACKEND_URL") ? std::getenv("MQUD_BACKEND_URL") : c.base_url);
  c.api_key_env = run.settings.str("api_key_env", c.api_key_env);
  c.model = run.settings.str("model", c.model);
  c.timeout_seconds = static_cast<int>(run.settings.integer("timeout", c.timeout_seconds));
  return c;
}

ChatSetup make_chat(Run& run) {
  ChatSetup s;
  const auto mode = run.backend_mode();
  s.cache_path = run.settings.str("cache", run.path("backend_cache.jsonl").string());
  s.assets = std::make_unique<paperstore::AssetStore>(run.path("assets"));
  s.cache = std::make_unique<backend::ResponseCache>(s.cache_path);
  if (mode == "mock") {
    s.base = std::make_unique<backend::MockBackend>();
  } else if (mode == "replay") {
    if (!fs::exists(s.cache_path)) throw Error(ErrorKind::ConfigError, "replay cache " + s.cache_path.string() + " not found");
    run.inputs.push_back(s.cache_path);
    s.base = std::make_unique<backend::ReplayBackend>(*s.cache);
  } else if (mode == "live") {
    auto* assets = s.assets.get();
    s.base = std::make_unique<backend::LiveBackend>(live_config(run),
                                                    [assets](const std::string& h) { return assets->read(h); });
  } else {
    throw Error(ErrorKind::ConfigError, "--backend must be mock, replay or live");
  }
  s.recording = mode != "replay" && run.settings.boolean("record", true);
  backend::ChatBackend* inner = s.base.get();
  if (s.recording) {
    s.recorder = std::make_unique<backend::RecordingBackend>(*s.base, *s.cache);
    inner = s.recorder.get();
  }
  s.throttle = std::make_unique<backend::Throttle>(static_cast<int>(run.settings.integer("max_in_flight", 4)),
                                                   run.settings.real("rate_limit", 0.0),
                                                   run.settings.real("burst", 4.0));
  s.throttled = std::make_unique<backend::ThrottledBackend>(*inner, *s.throttle);
  return s;
}

void write_json_file(const fs::path& p, const json& j) { util::write_text_file(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Commands

void cmd_ingest(Run& run, const std::string& papers_dir) {
  if (papers_dir.empty()) throw Error(ErrorKind::ConfigError, "ingest needs the papers directory");
  auto lexicon = run.settings.list("lexicon", paperstore::default_section_lexicon());
  paperstore::AssetStore store(run.path("assets"));
  auto result = paperstore::ingest_corpus(papers_dir, lexicon, &store);
  std::vector<json> rows;
  std::size_t eligible = 0, figures = 0;
  for (const auto& p : result.papers) {
    rows.push_back(json(p));
    figures += p.figures.size();
    for (const auto& f : p.figures) eligible += f.eligible;
  }
  util::write_jsonl(run.out("papers.jsonl"), rows);
  result.manifest.save(run.out("assets.manifest"));
  for (const auto& f : result.failures) {
    spdlog::error("ingest {}: {}", f.source, f.error);
    ++run.item_errors;
    if (!run.first_error) run.first_error = ErrorKind::UnreadableSource;
  }
  std::cout << fmt::format("ingested {} papers, {} figures, {} eligible ({} failures)\n", result.papers.size(), figures,
                           eligible, result.failures.size());
}

void cmd_generate(Run& run) {
  const auto papers = load_papers(run);
  const auto manifest = load_manifest(run);
  auto chat = make_chat(run);
  genpipe::GenerateOptions opts;
  opts.n = static_cast<int>(run.settings.integer("n", 6));
  opts.review_threshold = run.settings.real("review_threshold", 0.6);
  opts.decoding["temperature"] = run.settings.real("temperature", opts.decoding["temperature"].get<double>());
  const int window = static_cast<int>(run.settings.integer("window", 1));

  struct Job {
    const paperstore::PaperRecord* paper;
    const paperstore::FigureUnit* figure;
  };
  std::vector<Job> jobs;
  for (const auto& p : papers)
    for (const auto& f : p.figures)
      if (f.eligible) jobs.push_back({&p, &f});

  std::vector<std::vector<corpus::QudRecord>> results(jobs.size());
  std::vector<std::optional<Error>> errors(jobs.size());
  util::parallel_for(jobs.size(), run.workers(), [&](std::size_t i) {
    const auto& [paper, figure] = jobs[i];
    try {
      auto anchors = paperstore::anchor_paragraphs(*paper, figure->label, window);
      if (anchors.empty()) {
        spdlog::warn("[{}/{}] no paragraph cites the figure; skipped", paper->paper_id, figure->label);
        return;
      }
      auto ctx = genpipe::make_context(*paper, *figure, &manifest);
      results[i] = genpipe::generate_candidates(chat.get(), *paper, *figure, ctx, anchors, opts);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });
  std::vector<json> rows;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (errors[i]) run.item_failed(jobs[i].paper->paper_id + "/" + jobs[i].figure->label, *errors[i]);
    for (const auto& r : results[i]) rows.push_back(json(r));
  }
  util::write_jsonl(run.out("candidates.jsonl"), rows);
  chat.finish(run);
  std::cout << fmt::format("generated {} candidates for {} figures (window {})\n", rows.size(), jobs.size(), window);
}

void cmd_filter(Run& run) {
  const auto candidates = corpus::load_quds(run.in("candidates.jsonl"));
  auto chat = make_chat(run);
  genpipe::FilterOptions opts;
  opts.min_words = static_cast<std::size_t>(run.settings.integer("min_words", 20));
  opts.max_words = static_cast<std::size_t>(run.settings.integer("max_words", 120));
  opts.dedup_threshold = run.settings.real("dedup_threshold", 0.7);
  opts.workers = run.workers();
  auto result = genpipe::filter_candidates(chat.get(), candidates, opts);

  corpus::CorpusStore store(run.workdir);
  std::size_t added = 0;
  for (const auto& r : result.kept) {
    if (store.find_qud(r.qud_id)) {
      spdlog::warn("[{}] already in the corpus; not appended again", r.qud_id);
      continue;
    }
    store.append(r);
    ++added;
  }
  run.outputs.push_back(store.quds_path());
  std::vector<json> rows;
  for (const auto& rep : result.reports) rows.push_back(genpipe::to_json(rep));
  util::write_jsonl(run.out("filter_reports.jsonl"), rows);
  chat.finish(run);
  std::size_t len = 0, grounded = 0, fig = 0, dup = 0;
  for (const auto& rep : result.reports) {
    len += !rep.length_ok;
    grounded += !rep.grounded;
    fig += !rep.references_figure;
    dup += rep.duplicate_of.has_value();
  }
  std::cout << fmt::format(
      "kept {} of {} (length {}, ungrounded {}, no figure reference {}, duplicates {}); {} appended\n",
      result.kept.size(), candidates.size(), len, grounded, fig, dup, added);
}

std::map<std::string, const corpus::AnnotationRecord*> latest_human(const std::vector<corpus::AnnotationRecord>& anns) {
  std::map<std::string, const corpus::AnnotationRecord*> out;
  for (const auto& a : anns)
    if (a.source == corpus::AnnotationSource::human_expert) out[a.qud_id] = &a;
  return out;
}

void cmd_augment(Run& run) {
  corpus::CorpusStore store(run.workdir);
  run.inputs.push_back(store.quds_path());
  run.inputs.push_back(store.annotations_path());
  const auto quds = store.quds();
  const auto anns = store.annotations();
  const auto latest = latest_human(anns);
  std::vector<const corpus::QudRecord*> parents;
  for (const auto& q : quds) {
    if (q.provenance != corpus::Provenance::generated) continue;
    auto it = latest.find(q.qud_id);
    if (it != latest.end() && it->second->answer_correct == corpus::AnswerCorrect::acceptable) parents.push_back(&q);
  }
  auto chat = make_chat(run);
  const int n = static_cast<int>(run.settings.integer("n_variants", 2));
  std::vector<genpipe::AugmentResult> results(parents.size());
  std::vector<std::optional<Error>> errors(parents.size());
  util::parallel_for(parents.size(), run.workers(), [&](std::size_t i) {
    try {
      results[i] = genpipe::rephrase_augment(chat.get(), *parents[i], n);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });
  std::vector<json> rows, log;
  std::size_t accepted = 0, rejected = 0;
  for (std::size_t i = 0; i < parents.size(); ++i) {
    if (errors[i]) run.item_failed(parents[i]->qud_id, *errors[i]);
    for (const auto& v : results[i].accepted) rows.push_back(json(v));
    for (const auto& v : results[i].rejected) rows.push_back(json(v));
    for (const auto& m : results[i].log) log.push_back({{"schema", util::kSchema}, {"message", m}});
    accepted += results[i].accepted.size();
    rejected += results[i].rejected.size();
  }
  util::write_jsonl(run.out("variants.jsonl"), rows);
  util::write_jsonl(run.out("augment_log.jsonl"), log);
  chat.finish(run);
  std::cout << fmt::format("{} parents, {} variants accepted, {} rejected\n", parents.size(), accepted, rejected);
}

void cmd_judge(Run& run) {
  const auto quds = split_pool(run);
  const auto selected = select_quds(quds, split_ids(run, run.settings.str("split", "all"), quds));
  auto chat = make_chat(run);
  judge::JudgeOptions opts;
  opts.model = run.settings.str("model", run.backend_mode());
  std::vector<std::optional<judge::JudgeVerdict>> verdicts(selected.size());
  std::vector<std::optional<Error>> errors(selected.size());
  util::parallel_for(selected.size(), run.workers(), [&](std::size_t i) {
    try {
      verdicts[i] = judge::judge_qud(chat.get(), selected[i], opts);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });
  std::vector<json> rows;
  std::vector<judge::JudgeVerdict> ok;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (errors[i]) run.item_failed(selected[i].qud_id, *errors[i]);
    if (verdicts[i]) {
      rows.push_back(json(*verdicts[i]));
      ok.push_back(*verdicts[i]);
    }
  }
  util::write_jsonl(run.out("judge_verdicts.jsonl"), rows);
  if (run.settings.boolean("blind_pairs", false)) {
    const auto human = corpus::load_annotations(run.in("annotations.jsonl"));
    auto blind = judge::blind_pairs(human, ok, run.settings.seed("seed", 0));
    util::write_jsonl(run.out("blind_pairs.jsonl"), blind.pairs);
    util::write_jsonl(run.out("blind_key.jsonl"), blind.key);
  }
  chat.finish(run);
  std::cout << fmt::format("judged {} of {} QUDs\n", rows.size(), selected.size());
}

void cmd_validate_judge(Run& run) {
  const auto human = corpus::load_annotations(run.in("annotations.jsonl"));
  std::vector<judge::JudgeVerdict> judged;
  for (const auto& row : util::read_jsonl(run.in("judge_verdicts.jsonl"))) judged.push_back(row.get<judge::JudgeVerdict>());
  const auto policy = judge::pair_policy_from_string(run.settings.str("pair_policy", "all_annotations"));
  const auto metrics = judge::validate_judge(human, judged, policy);
  json out = {{"schema", util::kSchema}, {"pair_policy", std::string(judge::to_string(policy))}, {"answer_correct", judge::to_json(metrics)}};
  std::optional<judge::AgreementSummary> agreement;
  try {
    agreement = judge::annotator_agreement(human, judged);
    out["agreement"] = judge::to_json(*agreement);
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::NoOverlap) throw;
  }
  const auto pairs = judge::dual_pairs(human);
  if (!pairs.empty()) {
    out["dual_exact_agreement"] = judge::dual_annotator_exact_agreement(pairs);
    out["dual_pairs"] = pairs.size();
  }
  write_json_file(run.out("judge_validation.json"), out);
  std::cout << judge::format_metrics_table(metrics, agreement ? &*agreement : nullptr);
}

void cmd_export_sft(Run& run) {
  const auto quds = corpus::load_quds(run.in("quds.jsonl"));
  const auto variants = corpus::load_quds(run.in("variants.jsonl"));
  const auto anns = corpus::load_annotations(run.in("annotations.jsonl"));
  corpus::FilterPolicy policy;
  policy.require_figure_useful = run.settings.boolean("require_figure_useful", false);
  policy.validation_size = static_cast<std::size_t>(run.settings.integer("validation_size", 51));
  policy.seed = run.settings.seed("seed", 0);
  policy.disjoint_paper_ids = run.settings.list("disjoint_papers");
  auto exp = corpus::build_sft_export(quds, variants, anns, policy);
  util::write_jsonl(run.out("sft_export.jsonl"), exp.lines);
  write_json_file(run.out("splits.json"), json(exp.splits));
  std::cout << fmt::format("retained {} originals; {} variants added, {} dropped; train {} validation {} eval_disjoint {}\n",
                           exp.retained_originals, exp.variants_included, exp.variants_dropped, exp.splits.train.size(),
                           exp.splits.validation.size(), exp.splits.eval_disjoint.size());
}

void cmd_diagnose(Run& run) {
  const auto papers = load_papers(run);
  const auto manifest = load_manifest(run);
  const auto quds = split_pool(run);
  const auto selected = select_quds(quds, split_ids(run, run.settings.str("split", "all"), quds));
  const auto tag = run.settings.str("model_tag", "mock");
  const auto conditions = run.settings.list("conditions", {"mm", "to", "swap"});
  for (const auto& c : conditions)
    if (c != "mm" && c != "to" && c != "swap") throw Error(ErrorKind::ConfigError, "unknown condition '" + c + "'");
  if (std::find(conditions.begin(), conditions.end(), "mm") == conditions.end() ||
      std::find(conditions.begin(), conditions.end(), "to") == conditions.end())
    throw Error(ErrorKind::ConfigError, "conditions must include mm and to");
  const int resamples = static_cast<int>(run.settings.integer("resamples", 10000));
  const auto seed = run.settings.seed("seed", 0);

  std::map<std::string, const paperstore::PaperRecord*> by_id;
  for (const auto& p : papers) by_id[p.paper_id] = &p;

  const auto mode = run.backend_mode();
  const fs::path cache_path = run.settings.str("cache", run.path("backend_cache.jsonl").string());
  backend::ResponseCache cache(cache_path);
  paperstore::AssetStore assets(run.path("assets"));
  std::unique_ptr<backend::ScoringBackend> base, recorder;
  if (mode == "mock") {
    std::map<std::string, std::string> owners;
    for (const auto& p : papers)
      for (const auto& f : p.figures)
        if (auto h = manifest.hash_for(p.paper_id, f.image_path)) owners[*h] = f.caption;
    base = std::make_unique<backend::MockScoringBackend>(tag, owners);
  } else if (mode == "replay") {
    if (!fs::exists(cache_path)) throw Error(ErrorKind::ConfigError, "replay cache " + cache_path.string() + " not found");
    run.inputs.push_back(cache_path);
    base = std::make_unique<backend::ReplayScoringBackend>(cache, tag);
  } else if (mode == "live") {
    auto cfg = live_config(run);
    cfg.model = tag;
    base = std::make_unique<backend::LiveScoringBackend>(cfg, [&assets](const std::string& h) { return assets.read(h); });
  } else {
    throw Error(ErrorKind::ConfigError, "--backend must be mock, replay or live");
  }
  const bool recording = mode != "replay" && run.settings.boolean("record", true);
  backend::ScoringBackend* scorer = base.get();
  if (recording) {
    recorder = std::make_unique<backend::RecordingScoringBackend>(*base, cache);
    scorer = recorder.get();
  }

  std::vector<std::optional<diagnostics::ScoredConditions>> scored(selected.size());
  std::vector<std::optional<Error>> errors(selected.size());
  util::parallel_for(selected.size(), run.workers(), [&](std::size_t i) {
    const auto& q = selected[i];
    try {
      auto it = by_id.find(q.context.paper_id);
      if (it == by_id.end()) throw Error(ErrorKind::InvariantViolation, "paper " + q.context.paper_id + " not ingested");
      std::optional<diagnostics::SwapTarget> swap;
      if (const auto* partner = paperstore::choose_swap_partner(*it->second, q.context.figure_label))
        swap = diagnostics::SwapTarget{q.context.paper_id, partner->label,
                                       manifest.hash_for(q.context.paper_id, partner->image_path)};
      scored[i] = diagnostics::score_conditions(*scorer, q, swap, conditions);
    } catch (const Error& e) {
      errors[i] = e;
    }
  });
  std::vector<json> rows, requests;
  std::vector<diagnostics::NllTrace> traces;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    if (errors[i]) run.item_failed(selected[i].qud_id, *errors[i]);
    if (!scored[i]) continue;
    traces.push_back(scored[i]->trace);
    rows.push_back(json(scored[i]->trace));
    for (const auto& r : scored[i]->requests)
      requests.push_back({{"qud_id", selected[i].qud_id}, {"condition", r.condition}, {"request", backend::canonical(r.request)}});
  }
  util::write_jsonl(run.out("traces_" + tag + ".jsonl"), rows);
  util::write_jsonl(run.out("score_requests_" + tag + ".jsonl"), requests);
  if (recording) {
    cache.save();
    run.outputs.push_back(cache_path);
  }
  const auto report = diagnostics::aggregate(traces, resamples, seed);
  write_json_file(run.out("diagnostics_" + tag + ".json"), diagnostics::to_json(report));
  std::cout << diagnostics::format_report(report);
}

void cmd_stats(Run& run) {
  const auto quds = corpus::load_quds(run.in("quds.jsonl"));
  const auto anns = corpus::load_annotations(run.in("annotations.jsonl"));
  const auto stats = analysis::corpus_stats(quds, anns);
  write_json_file(run.out("stats.json"), stats);
  std::cout << analysis::format_stats(stats);
}

void cmd_clusters(Run& run) {
  const auto quds = corpus::load_quds(run.in("quds.jsonl"));
  const auto anns = corpus::load_annotations(run.in("annotations.jsonl"));
  const auto points = analysis::dependency_clusters(quds, anns, run.settings.real("threshold", 0.5));
  const auto j = analysis::to_json(points);
  write_json_file(run.out("clusters.json"), j);
  util::write_text_file(run.out("clusters.csv"), analysis::clusters_csv(points));
  for (const auto& p : points)
    std::cout << fmt::format("{:<12} n {:>4}  useful {:>5.1f}%  answerable {:>5.1f}%  gap {:>+6.1f} pts  {}\n",
                             corpus::to_string(p.qud_type), p.n, 100 * p.rate_useful, 100 * p.rate_answerable,
                             100 * p.gap, analysis::to_string(p.cluster));
  if (!j["max_gap"].is_null())
    std::cout << fmt::format("largest gap: {} ({:+.1f} pts)\n", j["max_gap"]["qud_type"].get<std::string>(),
                             100 * j["max_gap"]["gap"].get<double>());
}

void cmd_correlate(Run& run) {
  const auto papers = load_papers(run);
  const auto quds = corpus::load_quds(run.in("quds.jsonl"));
  const auto human = corpus::load_annotations(run.in("annotations.jsonl"));
  std::vector<corpus::AnnotationRecord> judge_labels;
  for (const auto& row : util::read_jsonl(run.in("judge_verdicts.jsonl")))
    judge_labels.push_back(row.get<judge::JudgeVerdict>().mapped);
  const auto g = analysis::granularity_from_string(run.settings.str("granularity", "per_qud"));
  const auto c = analysis::refcount_correlations(papers, quds, human, judge_labels, g);
  write_json_file(run.out("correlations_" + std::string(analysis::to_string(g)) + ".json"), analysis::to_json(c));
  std::cout << fmt::format("{}: rho(useful) {:+.3f} (p {:.3g}, n {})  rho(quality) {:+.3f} (p {:.3g}, n {})\n",
                           analysis::to_string(g), c.useful.rho, c.useful.p, c.useful.n, c.quality.rho, c.quality.p,
                           c.quality.n);
}

void cmd_depth(Run& run) {
  std::optional<fs::path> lex_path;
  if (auto s = run.settings.str("lexicon"); !s.empty()) lex_path = s;
  const auto lexicon = analysis::load_depth_lexicon(lex_path);
  std::vector<std::string> questions;
  if (auto qfile = run.settings.str("questions"); !qfile.empty()) {
    std::stringstream ss(util::read_text_file(qfile));
    for (std::string line; std::getline(ss, line);)
      if (!text::trim(line).empty()) questions.emplace_back(text::trim(line));
  } else {
    for (const auto& q : corpus::load_quds(run.in("quds.jsonl")))
      if (q.provenance == corpus::Provenance::generated) questions.push_back(q.question);
  }
  const auto d = analysis::depth_bins(questions, lexicon);
  auto j = analysis::to_json(d);
  j["lexicon_version"] = lexicon.version;
  write_json_file(run.out("depth.json"), j);
  util::write_text_file(run.out("depth.csv"), analysis::depth_csv(d));
  for (const auto& [b, c] : d.counts) std::cout << fmt::format("{:<14} {:>6}  {:>5.1f}%\n", b, c, analysis::percent(c, d.total));
}

void cmd_serve(Run& run) {
  corpus::CorpusStore store(run.workdir);
  const auto roster_path = run.settings.str("roster");
  if (roster_path.empty()) throw Error(ErrorKind::ConfigError, "serve needs --roster");
  annosvc::ServiceConfig cfg;
  cfg.author_matching = !run.settings.boolean("no_author_matching", false);
  cfg.dual_size = static_cast<std::size_t>(run.settings.integer("dual_size", 60));
  cfg.seed = run.settings.seed("seed", 0);
  cfg.blinding = run.settings.str("blinding", cfg.blinding);
  annosvc::AnnotationService service(store, annosvc::Roster::load(roster_path), cfg, run.workdir);
  paperstore::AssetStore assets(run.path("assets"));
  annosvc::HttpOptions http;
  http.assets = &assets;
  if (auto ui = run.settings.str("ui_dir"); !ui.empty()) http.ui_dir = ui;
  auto server = annosvc::make_server(service, http);
  const auto host = run.settings.str("host", "127.0.0.1");
  const int port = static_cast<int>(run.settings.integer("port", 8080));
  spdlog::info("serving on http://{}:{}", host, port);
  if (!server->listen(host, port)) throw Error(ErrorKind::ConfigError, fmt::format("cannot listen on {}:{}", host, port));
}

// ---------------------------------------------------------------------------

json hashes(const std::vector<fs::path>& paths) {
  json j = json::object();
  for (const auto& p : paths)
    if (fs::is_regular_file(p)) j[p.filename().string()] = util::file_hash(p);
  return j;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"mqud: multimodal QUD corpus toolchain"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all");

  Settings settings;
  std::string workdir = ".";
  std::string config_path;
  std::string log_level = "info";
  app.add_option("--workdir", workdir, "Directory holding the pipeline's files");
  app.add_option("--config", config_path, "JSON config (comments allowed); flags override it");
  app.add_option("--log-level", log_level, "trace|debug|info|warn|error|off");

  auto value = [&](CLI::App* sub, const std::string& flag, const std::string& key, const std::string& help) {
    sub->add_option_function<std::string>(flag, [&settings, key](const std::string& v) { settings.flags[key] = v; }, help);
  };
  auto flag = [&](CLI::App* sub, const std::string& name, const std::string& key, const std::string& help) {
    sub->add_flag_callback(name, [&settings, key] { settings.flags[key] = "true"; }, help);
  };
  auto backend_opts = [&](CLI::App* sub) {
    value(sub, "--backend", "backend", "mock|replay|live");
    value(sub, "--cache", "cache", "Replay cache file (default <workdir>/backend_cache.jsonl)");
    value(sub, "--workers", "workers", "Concurrent work units");
    value(sub, "--max-in-flight", "max_in_flight", "Concurrent backend requests");
    value(sub, "--rate-limit", "rate_limit", "Backend requests per second (0 = unlimited)");
    value(sub, "--backend-url", "backend_url", "Live backend base URL");
    value(sub, "--model", "model", "Model name recorded with live output");
    value(sub, "--record", "record", "Record calls into the cache (true|false)");
  };

  std::string papers_dir;
  auto* ingest = app.add_subcommand("ingest", "Parse LaTeX sources into papers.jsonl");
  ingest->add_option("papers", papers_dir, "Directory with one subdirectory per paper")->required();
  value(ingest, "--lexicon", "lexicon", "Comma-separated results-section stems");

  auto* generate = app.add_subcommand("generate", "Generate candidate QUDs for eligible figures");
  backend_opts(generate);
  value(generate, "--n", "n", "Candidates per figure, 5-7");
  value(generate, "--window", "window", "Anchor paragraph window");
  value(generate, "--temperature", "temperature", "Generation temperature");

  auto* filter = app.add_subcommand("filter", "Apply the quality filter and store kept QUDs");
  backend_opts(filter);
  value(filter, "--dedup-threshold", "dedup_threshold", "Jaccard threshold for duplicates");

  auto* augment = app.add_subcommand("augment", "Rephrase accepted QUDs into grounded variants");
  backend_opts(augment);
  value(augment, "--n-variants", "n_variants", "Variants per QUD");

  auto* judge_cmd = app.add_subcommand("judge", "Run the seven-dimension LLM judge");
  backend_opts(judge_cmd);
  value(judge_cmd, "--split", "split", "all|train|validation|eval_within|eval_disjoint");
  flag(judge_cmd, "--blind-pairs", "blind_pairs", "Also write blind human/judge rating pairs");
  value(judge_cmd, "--seed", "seed", "Seed for blind side assignment");

  auto* serve = app.add_subcommand("serve", "Run the annotation service");
  value(serve, "--roster", "roster", "Roster JSON with annotator tokens");
  value(serve, "--port", "port", "Port");
  value(serve, "--host", "host", "Bind address");
  value(serve, "--ui-dir", "ui_dir", "Built UI bundle to serve at /");
  value(serve, "--dual-size", "dual_size", "Doubly annotated subset size");
  value(serve, "--seed", "seed", "Assignment seed");
  value(serve, "--blinding", "blinding", "Blinding value recorded for this deployment");
  flag(serve, "--no-author-matching", "no_author_matching", "Let any annotator take any paper");

  auto* export_sft = app.add_subcommand("export-sft", "Write training JSONL and splits");
  value(export_sft, "--validation-size", "validation_size", "Validation items");
  value(export_sft, "--seed", "seed", "Split seed");
  value(export_sft, "--disjoint-papers", "disjoint_papers", "Comma-separated paper ids held out");
  flag(export_sft, "--require-figure-useful", "require_figure_useful", "Also require figure_useful = useful");

  auto* diagnose = app.add_subcommand("diagnose", "Score conditions and aggregate grounding diagnostics");
  backend_opts(diagnose);
  value(diagnose, "--model-tag", "model_tag", "Tag of the scored model");
  value(diagnose, "--conditions", "conditions", "Comma-separated subset of mm,to,swap");
  value(diagnose, "--resamples", "resamples", "Bootstrap resamples");
  value(diagnose, "--seed", "seed", "Bootstrap seed");
  value(diagnose, "--split", "split", "all|train|validation|eval_within|eval_disjoint");

  app.add_subcommand("stats", "Corpus statistics");
  auto* clusters = app.add_subcommand("clusters", "Per-type figure dependency clusters");
  value(clusters, "--threshold", "threshold", "Rate threshold for the cluster rule");
  auto* correlate = app.add_subcommand("correlate", "Reference-count correlations");
  value(correlate, "--granularity", "granularity", "per_qud|per_figure");
  auto* depth = app.add_subcommand("depth", "Leading-word question depth bins");
  value(depth, "--lexicon", "lexicon", "Depth lexicon TSV (default: built-in v1)");
  value(depth, "--questions", "questions", "Text file, one question per line (default: quds.jsonl)");
  auto* validate = app.add_subcommand("validate-judge", "Judge precision/F1 and annotator agreement");
  value(validate, "--pair-policy", "pair_policy", "all_annotations|per_qud_latest");

  // CLI11 reports an unknown subcommand as stray extras; name it instead.
  for (std::size_t i = 1; i < args.size(); ++i) {
    const auto& a = args[i];
    if (a == "--workdir" || a == "--config" || a == "--log-level") {
      ++i;
      continue;
    }
    if (a.rfind("-", 0) == 0) continue;
    bool known = false;
    for (const auto* sub : app.get_subcommands([](CLI::App*) { return true; })) known |= sub->get_name() == a;
    if (!known) {
      std::cerr << "UnknownCommand: '" << a << "' (see --help)\n";
      return exit_code(ErrorKind::UnknownCommand);
    }
    break;
  }

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  if (!argv_rev.empty()) argv_rev.pop_back();  // program name
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "ConfigError: " << e.what() << "\n";
    return exit_code(ErrorKind::ConfigError);
  }
  spdlog::set_level(spdlog::level::from_str(log_level));

  Run r;
  r.workdir = workdir;
  const std::string command = app.get_subcommands().front()->get_name();
  settings.command = command;
  const auto started = now_iso();
  int status = 0;
  std::string failure;
  try {
    if (!config_path.empty()) {
      settings.file = json::parse(util::read_text_file(config_path), nullptr, false, true);
      if (settings.file.is_discarded() || !settings.file.is_object())
        throw Error(ErrorKind::ConfigError, config_path + " is not a JSON object");
      r.inputs.push_back(config_path);
    }
    r.settings = settings;
    fs::create_directories(r.workdir);
    if (command == "ingest") cmd_ingest(r, papers_dir);
    else if (command == "generate") cmd_generate(r);
    else if (command == "filter") cmd_filter(r);
    else if (command == "augment") cmd_augment(r);
    else if (command == "judge") cmd_judge(r);
    else if (command == "serve") cmd_serve(r);
    else if (command == "export-sft") cmd_export_sft(r);
    else if (command == "diagnose") cmd_diagnose(r);
    else if (command == "stats") cmd_stats(r);
    else if (command == "clusters") cmd_clusters(r);
    else if (command == "correlate") cmd_correlate(r);
    else if (command == "depth") cmd_depth(r);
    else if (command == "validate-judge") cmd_validate_judge(r);
    else throw Error(ErrorKind::UnknownCommand, command);
    if (r.first_error) {
      status = exit_code(*r.first_error);
      failure = fmt::format("{} item(s) failed, first: {}", r.item_errors, to_string(*r.first_error));
    }
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    status = exit_code(e.kind());
    failure = e.what();
  } catch (const std::exception& e) {
    std::cerr << "InvariantViolation: " << e.what() << "\n";
    status = exit_code(ErrorKind::InvariantViolation);
    failure = e.what();
  }

  try {
    util::JsonlAppender manifest(r.workdir / "run_manifest.jsonl");
    json entry = {{"schema", util::kSchema},
                  {"command", command},
                  {"argv", json(std::vector<std::string>(args.empty() ? args.end() : args.begin() + 1, args.end()))},
                  {"config", settings.snapshot()},
                  {"resolved", r.settings.resolved},
                  {"backend", settings.str("backend", "mock")},
                  {"seed", settings.str("seed", "0")},
                  {"input_hashes", hashes(r.inputs)},
                  {"output_hashes", hashes(r.outputs)},
                  {"started_at", started},
                  {"finished_at", now_iso()},
                  {"exit_status", status}};
    if (!failure.empty()) entry["failure"] = failure;
    manifest.append(entry);
  } catch (const std::exception& e) {
    std::cerr << "could not append run manifest: " << e.what() << "\n";
  }
  return status;
}

int run(int argc, char** argv) { return run(std::vector<std::string>(argv, argv + argc)); }

}  // namespace mqud::cli
