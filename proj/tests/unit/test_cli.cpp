#include <doctest.h>

#include "mqud/cli/cli.hpp"
#include "mqud/corpus/store.hpp"
#include "mqud/util/jsonl.hpp"
#include "support.hpp"

using namespace mqud;
using util::json;
namespace fs = std::filesystem;

namespace {

int mqud_run(std::vector<std::string> args) {
  args.insert(args.begin(), "mqud");
  return cli::run(args);
}

json last_manifest(const testing::TempDir& dir) { return util::read_jsonl(dir.path() / "run_manifest.jsonl").back(); }

}  // namespace

TEST_CASE("unknown commands and bad flags exit 2") {
  testing::TempDir dir("cli0");
  CHECK(mqud_run({"--workdir", dir.str(), "frobnicate"}) == 2);
  CHECK(mqud_run({"--workdir", dir.str(), "generate", "--no-such-flag"}) == 2);
  CHECK(mqud_run({}) == 2);
}

TEST_CASE("failures still append a run manifest entry") {
  testing::TempDir dir("cli1");
  CHECK(mqud_run({"--workdir", dir.str(), "generate"}) == 2);
  const auto m = last_manifest(dir);
  CHECK(m["command"] == "generate");
  CHECK(m["exit_status"] == 2);
  CHECK(m["failure"].get<std::string>().find("ConfigError") != std::string::npos);
}

TEST_CASE("replay without a cache is a config error") {
  testing::TempDir dir("cli2");
  REQUIRE(mqud_run({"--workdir", dir.str(), "ingest", testing::fixture("papers").string()}) == 0);
  CHECK(mqud_run({"--workdir", dir.str(), "generate", "--backend", "replay"}) == 2);
  CHECK(mqud_run({"--workdir", dir.str(), "generate", "--backend", "bogus"}) == 2);
}

TEST_CASE("flags override the config file, which overrides defaults") {
  testing::TempDir dir("cli3");
  REQUIRE(mqud_run({"--workdir", dir.str(), "ingest", testing::fixture("papers").string()}) == 0);
  util::write_text_file(dir.path() / "cfg.jsonc", R"({
    // top level applies to every command
    "n": 9,
    "generate": {"n": 8}
  })");
  const auto cfg = (dir.path() / "cfg.jsonc").string();
  CHECK(mqud_run({"--workdir", dir.str(), "--config", cfg, "generate"}) == 2);  // 8 is out of range
  CHECK(mqud_run({"--workdir", dir.str(), "--config", cfg, "generate", "--n", "5"}) == 0);
  CHECK(util::read_jsonl(dir.path() / "candidates.jsonl").size() == 20);
  util::write_text_file(dir.path() / "bad.json", "[1, 2]");
  CHECK(mqud_run({"--workdir", dir.str(), "--config", (dir.path() / "bad.json").string(), "stats"}) == 2);
}

TEST_CASE("full offline pipeline through every analysis command") {
  testing::TempDir dir("cli4");
  const std::vector<std::string> w = {"--workdir", dir.str()};
  auto run = [&](std::vector<std::string> rest) {
    rest.insert(rest.begin(), w.begin(), w.end());
    return mqud_run(rest);
  };
  REQUIRE(run({"ingest", testing::fixture("papers").string()}) == 0);
  REQUIRE(run({"generate", "--workers", "2"}) == 0);
  REQUIRE(run({"filter", "--workers", "2"}) == 0);
  // Running filter again skips QUDs already stored.
  REQUIRE(run({"filter"}) == 0);
  CHECK(run({"stats"}) == 0);
  CHECK(json::parse(util::read_text_file(dir.path() / "stats.json"))["annotations"]["status"] == "no annotations");
  CHECK(run({"export-sft"}) == 4);  // EmptyExport without annotations

  // Annotate every QUD; every fourth is not acceptable.
  {
    corpus::CorpusStore store(dir.path());
    int i = 0;
    for (const auto& q : store.quds()) {
      auto a = testing::make_ann(q.qud_id, i % 2 ? "ann1" : "ann2",
                                 i % 4 == 3 ? corpus::AnswerCorrect::not_acceptable : corpus::AnswerCorrect::acceptable);
      a.figure_useful = i % 3 ? corpus::FigureUseful::useful : corpus::FigureUseful::not_useful;
      a.answered_by_figure = i % 2 ? corpus::AnsweredByFigure::yes : corpus::AnsweredByFigure::no;
      a.answer_quality = i % 5 == 1 ? corpus::AnswerQuality::low : corpus::AnswerQuality::high;
      store.append(a);
      ++i;
    }
  }
  CHECK(run({"augment"}) == 0);
  CHECK(fs::exists(dir.path() / "variants.jsonl"));
  REQUIRE(run({"export-sft", "--validation-size", "3", "--disjoint-papers", "paper_b"}) == 0);
  const auto splits = json::parse(util::read_text_file(dir.path() / "splits.json"));
  CHECK(splits["validation"].size() == 3);
  CHECK(run({"judge", "--split", "train", "--blind-pairs"}) == 0);
  CHECK(fs::exists(dir.path() / "blind_pairs.jsonl"));
  CHECK(run({"judge"}) == 0);
  CHECK(run({"validate-judge"}) == 0);
  CHECK(json::parse(util::read_text_file(dir.path() / "judge_validation.json")).contains("answer_correct"));
  CHECK(run({"stats"}) == 0);
  CHECK(run({"clusters"}) == 0);
  CHECK(fs::exists(dir.path() / "clusters.csv"));
  CHECK(run({"correlate", "--granularity", "per_figure"}) == 0);
  CHECK(fs::exists(dir.path() / "correlations_per_figure.json"));
  CHECK(run({"depth"}) == 0);
  CHECK(json::parse(util::read_text_file(dir.path() / "depth.json"))["lexicon_version"] == "1");
  CHECK(run({"diagnose", "--resamples", "200", "--split", "validation", "--model-tag", "m2"}) == 0);
  CHECK(util::read_jsonl(dir.path() / "traces_m2.jsonl").size() == 3);
  CHECK(run({"diagnose", "--resamples", "200", "--conditions", "mm"}) == 2);

  const auto manifest = util::read_jsonl(dir.path() / "run_manifest.jsonl");
  CHECK(manifest.size() == 17);  // one row per run above, failures included
  for (const auto& m : manifest) {
    CHECK(m.contains("input_hashes"));
    CHECK(m.contains("output_hashes"));
    CHECK(m["schema"] == util::kSchema);
  }
}

TEST_CASE("the example config is accepted") {
  testing::TempDir dir("cli5");
  const std::string cfg = std::string(MQUD_DATA_DIR) + "/mqud.example.jsonc";
  REQUIRE(mqud_run({"--workdir", dir.str(), "ingest", testing::fixture("papers").string()}) == 0);
  CHECK(mqud_run({"--workdir", dir.str(), "--config", cfg, "generate"}) == 0);
  const auto rows = util::read_jsonl(dir.path() / "run_manifest.jsonl");
  CHECK(rows.back()["resolved"]["window"] == 1);
  CHECK(rows.back()["resolved"]["temperature"] == 0.7);
  CHECK(mqud_run({"--workdir", dir.str(), "--config", cfg, "filter"}) == 0);
}
