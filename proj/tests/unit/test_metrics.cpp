#include "doctest.h"
#include "strata/bundle.hpp"
#include "strata/compositor.hpp"
#include "strata/engine.hpp"
#include "strata/error.hpp"
#include "strata/metrics.hpp"
#include "strata/occlusion.hpp"
#include "strata/png_io.hpp"
#include "support.hpp"

using namespace strata;
using namespace strata::testing;
using nlohmann::json;

namespace {

errc code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  FAIL("no error thrown");
  return errc::io_failure;
}

raster lp(const std::string& name) { return read_png(fixture("lpips") / (name + ".png")); }

void check_levels(const std::vector<double>& got, const std::vector<double>& want) {
  REQUIRE(got.size() == want.size());
  for (std::size_t i = 0; i < got.size(); ++i) {
    CAPTURE(i);
    CHECK(std::abs(got[i] - want[i]) <= 1e-9);
  }
}

detection det(const std::string& label, rect b, double conf = 1) { return {label, b, conf}; }

}  // namespace

TEST_CASE("LPIPS-U against the independent oracle") {
  raster original = lp("original");
  mask edit = read_mask_png(fixture("lpips") / "edit_mask.png");
  pyramid_extractor fx;

  SUBCASE("edit confined to the mask") {
    raster edited = lp("inside_only");
    check_levels(lpips_u_levels(original, edited, edit, fx),
                 {0.0, 0.015491989143013106, 0.01478456892071504});
    check_levels(lpips_u_levels(original, edited, edit, fx, true),
                 {0.0, 0.4087067437841419, 0.19835580674849718});
    CHECK(std::abs(lpips_u(original, edited, edit) - 0.010092186021242715) <= 1e-9);
  }
  SUBCASE("noise everywhere") {
    raster edited = lp("noisy");
    check_levels(lpips_u_levels(original, edited, edit, fx),
                 {0.027437293345605924, 0.008330803917796498, 0.0046344871085454735});
    check_levels(lpips_u_levels(original, edited, edit, fx, true),
                 {1.4476910250857404, 0.21978170207293043, 0.06217816929332475});
    CHECK(std::abs(lpips_u(original, edited, edit) - 0.013467528123982631) <= 1e-9);
  }
  SUBCASE("edge cases") {
    raster edited = lp("noisy");
    CHECK(lpips_u(original, original, edit) == 0.0);
    CHECK(lpips_u(original, original, mask(32, 32)) == 0.0);
    CHECK(lpips_u(original, edited, mask(32, 32, true)) == 0.0);
    CHECK(code_of([&] { lpips_u(original, raster(8, 8), edit); }) == errc::size_mismatch);
    CHECK(code_of([&] { lpips_u(original, edited, mask(8, 8)); }) == errc::size_mismatch);
  }
  SUBCASE("pyramid shapes") {
    auto levels = fx.extract(original);
    REQUIRE(levels.size() == 3);
    CHECK(levels[1].width == 16);
    CHECK(levels[2].width == 8);
    CHECK(levels[2].scale == 4);
    CHECK(levels[0].weight + levels[1].weight + levels[2].weight == doctest::Approx(1.0));
    CHECK(pyramid_extractor(2).extract(raster(5, 3)).at(1).width == 3);
  }
  SUBCASE("keep mask needs half coverage") {
    mask keep(4, 2, true);
    keep.set(0, 0, false);
    keep.set(1, 0, false);
    keep.set(2, 0, false);
    keep.set(0, 1, false);
    mask half = downsample_keep_mask(keep, 2, 1, 2);
    CHECK_FALSE(half.at(0, 0));  // 1 of 4 kept
    CHECK(half.at(1, 0));        // 3 of 4 kept
    keep.set(3, 1, false);
    CHECK(downsample_keep_mask(keep, 2, 1, 2).at(1, 0));  // 2 of 4
  }
}

TEST_CASE("constraints and detections") {
  SUBCASE("parsing") {
    auto cs = parse_constraints(json::parse(R"([
      {"target": "pumpkin", "operation": "Remove"},
      {"target": "crow", "operation": "move", "relation": {"kind": "below", "reference": "moon"}},
      {"target": "lamp", "operation": "Insert", "relation": {"kind": "center"}}
    ])"));
    REQUIRE(cs.size() == 3);
    CHECK(cs[1].relation->kind == relation_kind::below);
    CHECK(cs[1].relation->reference == "moon");
    CHECK(cs[2].relation->kind == relation_kind::center);
    CHECK(parse_constraints(json{{"constraints", json::array()}}).empty());
    CHECK(code_of([] { parse_constraint(json{{"target", "a"}, {"operation", "Move"}}); }) ==
          errc::invalid_parameter);
    CHECK(code_of([] {
            parse_constraint(json::parse(
                R"({"target":"a","operation":"Remove","relation":{"kind":"above","reference":"b"}})"));
          }) == errc::invalid_parameter);
    for (const auto& c : cs) CHECK(to_json(parse_constraint(to_json(c))) == to_json(c));
  }
  SUBCASE("ground-truth detections") {
    environment env = load_bundle(fixture("crow"));
    auto d = ground_truth_detections(env);
    REQUIRE(d.size() == 3);
    CHECK(d[0].label == "crow");
    CHECK(d[0].bbox == env.find("crow")->bbox());
    env.find("moon")->offset = {500, 500};
    CHECK(ground_truth_detections(env).size() == 2);
    auto round_trip = parse_detections(json{to_json(d[0])});
    CHECK(round_trip.at(0).bbox == d[0].bbox);
  }
}

TEST_CASE("grading") {
  const int W = 90, H = 90;
  std::vector<detection> before{det("pumpkin", {0, 0, 10, 10}, 0.9), det("moon", {40, 0, 50, 10}),
                                det("crow", {0, 40, 10, 50})};
  constraint_spec remove{"pumpkin", constraint_op::remove, std::nullopt};
  constraint_spec left{"crow", constraint_op::move, spatial_relation{relation_kind::left_of, "moon"}};
  constraint_spec centre{"crow", constraint_op::insert, spatial_relation{relation_kind::center, ""}};
  constraint_spec edit{"moon", constraint_op::edit, std::nullopt};

  CHECK(grade_constraint(remove, before, {}, W, H) == 1.0);
  CHECK(grade_constraint(remove, before, {det("pumpkin", {0, 0, 10, 10}, 0.4)}, W, H) == 0.5);
  CHECK(grade_constraint(remove, before, {det("pumpkin", {0, 0, 10, 10}, 0.5)}, W, H) == 0.0);
  CHECK(grade_constraint(left, before, before, W, H) == 1.0);
  CHECK(grade_constraint(left, before, {det("crow", {60, 0, 70, 10}), det("moon", {40, 0, 50, 10})},
                         W, H) == 0.5);
  CHECK(grade_constraint(left, before, {det("moon", {40, 0, 50, 10})}, W, H) == 0.0);
  CHECK(grade_constraint(centre, before, {det("crow", {40, 40, 50, 50})}, W, H) == 1.0);
  CHECK(grade_constraint(centre, before, {det("crow", {0, 40, 10, 50})}, W, H) == 0.5);
  CHECK(grade_constraint(edit, before, before, W, H) == 1.0);
  CHECK(grade_constraint(edit, before, {}, W, H) == 0.0);
}

TEST_CASE("SA and CSR") {
  std::vector<double> g{1, 0.5, 1};
  CHECK(spatial_accuracy(g) == doctest::Approx(0.8333).epsilon(1e-4));
  CHECK(spatial_accuracy(g) == 2.5 / 3);
  CHECK(constraint_satisfaction_rate(g, 0.7) == 2.0 / 3);
  CHECK(constraint_satisfaction_rate(g, 0.0) == 1.0);
  CHECK(constraint_satisfaction_rate({0.5, 0.5}, 0.7) == 0.0);
  CHECK(code_of([] { spatial_accuracy({}); }) == errc::empty_constraint_set);
  CHECK(code_of([] { constraint_satisfaction_rate({}); }) == errc::empty_constraint_set);
  CHECK(code_of([&] { constraint_satisfaction_rate(g, 1.5); }) == errc::invalid_parameter);
}

TEST_CASE("judge scores") {
  auto f = parse_findings(json::parse(R"({
    "physical_issues": [{"description": "floating cup", "severity": "moderate"},
                        {"description": "crow inside wall", "severity": "severe"}],
    "fulfillments": [1, {"score": 0.5}],
    "step_successes": [1, 1, 0]
  })"));
  CHECK(pc_score(f) == 5.0);
  CHECK(ic_score(f) == 7.5);
  CHECK(ms_score(f) == doctest::Approx(6.667).epsilon(1e-4));
  CHECK(ms_score(f) == 20.0 / 3);

  judge_findings clean;
  CHECK(pc_score(clean) == 10.0);
  clean.physical_issues = {{"", 4}, {"", 4}, {"", 4}};
  CHECK(pc_score(clean) == 1.0);
  CHECK(code_of([&] { ic_score(clean); }) == errc::empty_request_set);
  CHECK(code_of([&] { ms_score(clean); }) == errc::empty_request_set);

  judge_findings damage;
  damage.fulfillments = {1, 1};
  damage.unwanted_changes = {{"", 2}};
  damage.preservation_damage = {{"", 1}};
  CHECK(ic_score(damage) == 7.0);
  CHECK(penalty(severity_from("minor")) == 1);
  CHECK(code_of([] { severity_from("catastrophic"); }) == errc::invalid_parameter);
  CHECK(code_of([] { parse_findings(json::parse(R"({"fulfillments": [2]})")); }) ==
        errc::invalid_parameter);
}

TEST_CASE("drift") {
  environment env = load_bundle(fixture("crow"));
  order_environment(env);
  session s(env, nullptr);
  for (int r = 0; r < 4; ++r) {
    rect b = s.state().find("moon")->bbox();
    s.run_round(parse_script("MOVE moon " + std::to_string(b.center_x() - 10) + " " +
                             std::to_string(b.center_y() + 3)));
  }
  auto series = drift_series(s, {"moon"});
  REQUIRE(series.size() == 4);
  for (int r = 0; r < 4; ++r) {
    CHECK(series[r].round == r + 1);
    CHECK(series[r].pixdiff == 0.0);
  }
  mask region = drift_region(s, {"moon"});
  CHECK(region.popcount() > 0);
  CHECK(region.popcount() < static_cast<std::size_t>(128 * 96));

  auto noise = noise_baseline_series(composite(s.state_at_round(0)), region, 4);
  REQUIRE(noise.size() == 4);
  for (int r = 1; r < 4; ++r) CHECK(noise[r].pixdiff > noise[r - 1].pixdiff);
  CHECK(noise[0].pixdiff > 0);
  // deterministic for a seed
  auto again = noise_baseline_series(composite(s.state_at_round(0)), region, 4);
  CHECK(again[3].pixdiff == noise[3].pixdiff);

  auto j = to_json(series);
  CHECK(j["rounds"] == json::array({1, 2, 3, 4}));
  CHECK(j["pixdiff"] == json::array({0.0, 0.0, 0.0, 0.0}));

  CHECK(mean_abs_difference(raster(2, 1, {0, 0, 0, 255}), raster(2, 1, {255, 0, 0, 255}),
                            mask(2, 1, true)) == doctest::Approx(1.0 / 3));
  CHECK(mean_saturation(raster(1, 1, {255, 0, 0, 255}), mask(1, 1, true)) == 1.0);
  CHECK(mean_saturation(raster(1, 1, {90, 90, 90, 255}), mask(1, 1, true)) == 0.0);
}
