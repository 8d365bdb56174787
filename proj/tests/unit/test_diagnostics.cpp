#include <doctest.h>

#include <random>

#include "mqud/backend/scoring.hpp"
#include "mqud/diagnostics/bootstrap.hpp"
#include "mqud/diagnostics/diagnostics.hpp"
#include "mqud/util/error.hpp"
#include "support.hpp"

using namespace mqud;
using namespace mqud::diagnostics;
using mqud::testing::make_qud;

namespace {

NllTrace trace(const std::string& id, double mm, double to, std::optional<double> swap = std::nullopt,
               corpus::QudType type = corpus::QudType::cause) {
  NllTrace t;
  t.qud_id = id;
  t.paper_id = "p";
  t.figure_label = "f";
  t.qud_type = type;
  t.nll_mm = mm;
  t.nll_to = to;
  t.nll_swap = swap;
  if (swap) t.swap_figure_label = "g";
  t.model_tag = "m";
  return t;
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("no error thrown");
  return ErrorKind::ConfigError;
}

}  // namespace

TEST_CASE("rig and swap gap definitions") {
  CHECK(rig(trace("a", 2.0, 3.0)) == 0.5);
  CHECK(rig(trace("a", 2.0, 1.0)) == -0.5);
  CHECK(swap_gap(trace("a", 2.0, 3.0, 3.5)) == 0.5);
  CHECK(kind_of([] { rig(trace("a", 1e-7, 3.0)); }) == ErrorKind::DegenerateTrace);
  CHECK(kind_of([] { swap_gap(trace("a", 1.0, 2.0)); }) == ErrorKind::MissingSwap);
}

TEST_CASE("trace validation") {
  CHECK_NOTHROW(validate(trace("a", 1, 2, 3)));
  CHECK_THROWS_AS(validate(trace("a", -1, 2)), Error);
  auto t = trace("a", 1, 2, 3);
  t.swap_figure_label = "f";
  CHECK_THROWS_AS(validate(t), Error);
  t = trace("a", 1, 2);
  t.swap_figure_label = "g";
  CHECK_THROWS_AS(validate(t), Error);
  t = trace("a", 1, 2, 3);
  t.flags = {"x"};
  CHECK(json(t).get<NllTrace>() == t);
}

TEST_CASE("percentiles interpolate linearly") {
  const std::vector<double> v = {1, 2, 3, 4, 5};
  CHECK(percentile_sorted(v, 0.0) == 1);
  CHECK(percentile_sorted(v, 1.0) == 5);
  CHECK(percentile_sorted(v, 0.5) == 3);
  CHECK(percentile_sorted(v, 0.1) == doctest::Approx(1.4));
  CHECK(percentile_sorted({7}, 0.3) == 7);
  auto [lo, hi] = percentile_ci({5, 1, 4, 2, 3}, 0.25, 0.75);
  CHECK(lo == 2);
  CHECK(hi == 4);
}

TEST_CASE("serial and parallel bootstrap are bit-identical") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> x(257);
  for (auto& v : x) v = u(rng);
  for (std::uint64_t seed : {0ull, 1ull, 99ull}) {
    const auto a = bootstrap_means_serial(x, 2000, seed);
    const auto b = bootstrap_means_parallel(x, 2000, seed);
    CHECK(a == b);
  }
  CHECK(bootstrap_means_serial(x, 10, 1) != bootstrap_means_serial(x, 10, 2));
  CHECK_THROWS_AS(bootstrap_means_serial({}, 10, 1), Error);
  CHECK_THROWS_AS(bootstrap_means_serial(x, 0, 1), Error);
}

TEST_CASE("bootstrap of a constant is that constant") {
  const auto m = bootstrap_means_parallel(std::vector<double>(9, 0.25), 100, 3);
  for (double v : m) CHECK(v == doctest::Approx(0.25));
}

TEST_CASE("aggregate excludes degenerate traces and reports swap stats") {
  std::vector<NllTrace> ts = {trace("a", 1.0, 2.0, 2.5), trace("b", 2.0, 2.0, 2.0), trace("c", 1e-9, 1.0),
                              trace("d", 4.0, 5.0, std::nullopt, corpus::QudType::extent)};
  const auto r = aggregate(ts, 500, 7);
  CHECK(r.n == 3);
  REQUIRE(r.excluded.size() == 1);
  CHECK(r.excluded[0] == std::make_pair(std::string("c"), std::string("DegenerateTrace")));
  CHECK(r.rig_mean == doctest::Approx((1.0 + 0.0 + 0.25) / 3));
  CHECK(r.delta_l_mean == doctest::Approx((1.0 + 0.0 + 1.0) / 3));
  CHECK(r.swap_n == 2);
  CHECK(r.swap_mean == doctest::Approx(0.25));
  CHECK(r.swap_positive_rate == doctest::Approx(0.5));  // a zero gap is not positive
  CHECK(r.per_type.at("extent").n == 1);
  CHECK(r.rig_ci.lo <= r.rig_mean);
  CHECK(r.rig_ci.hi >= r.rig_mean);
  CHECK(to_json(r)["n"] == 3);
  CHECK(format_report(r).find("rIG") != std::string::npos);
  CHECK(kind_of([] { aggregate({}, 10, 0); }) == ErrorKind::EmptyInput);
}

TEST_CASE("aggregate ignores input order and kernel choice") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.5, 3.0);
  std::vector<NllTrace> ts;
  for (int i = 0; i < 40; ++i) ts.push_back(trace("q" + std::to_string(i), u(rng), u(rng), u(rng)));
  const auto a = to_json(aggregate(ts, 1000, 3, Kernel::serial));
  std::shuffle(ts.begin(), ts.end(), rng);
  const auto b = to_json(aggregate(ts, 1000, 3, Kernel::parallel));
  CHECK(a == b);
}

TEST_CASE("per-type rig means") {
  const auto m = per_type_rig({trace("a", 1, 2), trace("b", 1, 3), trace("c", 2, 3, std::nullopt, corpus::QudType::concept_)});
  CHECK(m.at(corpus::QudType::cause) == doctest::Approx(1.5));
  CHECK(m.at(corpus::QudType::concept_) == doctest::Approx(0.5));
}

TEST_CASE("score_conditions sends three requests and flags a missing swap") {
  const auto q = make_qud("p", "f", corpus::QudType::cause, "Why does the curve bend?");
  backend::MockScoringBackend m("m", {{*q.context.image_ref, q.context.caption}});
  SwapTarget swap{"p", "g", std::string("sha256:") + std::string(64, 'b')};
  const auto s = score_conditions(m, q, swap);
  REQUIRE(s.requests.size() == 3);
  CHECK(s.requests[0].request.image_ref == q.context.image_ref);
  CHECK_FALSE(s.requests[1].request.image_ref.has_value());
  CHECK(s.requests[2].request.image_ref == swap.image_ref);
  for (const auto& r : s.requests) CHECK(r.request.question == q.question);
  CHECK(s.trace.swap_figure_label == "g");
  CHECK(s.trace.tokens_mm == s.trace.tokens_to);

  const auto none = score_conditions(m, q, std::nullopt);
  CHECK(none.requests.size() == 2);
  CHECK(none.trace.flags == std::vector<std::string>{"NoSwapCandidate"});
  CHECK_FALSE(none.trace.nll_swap.has_value());
  CHECK(score_conditions(m, q, swap, {"mm", "to"}).requests.size() == 2);

  CHECK_THROWS_AS(score_conditions(m, q, SwapTarget{"p", "f", std::nullopt}), Error);
  CHECK_THROWS_AS(score_conditions(m, q, SwapTarget{"other", "g", std::nullopt}), Error);
  CHECK_THROWS_AS(score_conditions(m, q, swap, {"mm"}), Error);
}
