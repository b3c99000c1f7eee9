// One PASS/FAIL line per acceptance criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>

#include "ordering_oracle.hpp"
#include "strata/bundle.hpp"
#include "strata/cli.hpp"
#include "strata/compositor.hpp"
#include "strata/engine.hpp"
#include "strata/metrics.hpp"
#include "strata/png_io.hpp"
#include "support.hpp"

using namespace strata;
using namespace strata::testing;
using nlohmann::json;

namespace {

// Collects the first failed expectation of a criterion.
struct verdict {
  std::string failure;
  void expect(bool ok, const std::string& what) {
    if (!ok && failure.empty()) failure = what;
  }
};

int failures = 0;

void criterion(const std::string& name, const std::function<void(verdict&)>& body) {
  verdict v;
  auto start = std::chrono::steady_clock::now();
  try {
    body(v);
  } catch (const std::exception& e) {
    v.expect(false, std::string("exception: ") + e.what());
  }
  double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
  if (v.failure.empty()) {
    std::cout << "PASS  " << name << "  (" << static_cast<long>(ms) << " ms)\n";
  } else {
    ++failures;
    std::cout << "FAIL  " << name << "  " << v.failure << "\n";
  }
}

environment ordered(const std::string& name) {
  environment env = load_bundle(fixture(name));
  order_environment(env);
  return env;
}

std::optional<errc> code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const error& e) {
    return e.code();
  }
  return std::nullopt;
}

int cli(std::vector<std::string> args, std::string* out = nullptr) {
  args.insert(args.begin(), "strata");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream o, e;
  int rc = run_cli(static_cast<int>(argv.size()), argv.data(), o, e);
  if (out) *out = o.str();
  return rc;
}

bool_matrix rows(const std::vector<std::vector<int>>& r) {
  bool_matrix m(r.size());
  for (std::size_t i = 0; i < r.size(); ++i)
    for (std::size_t j = 0; j < r.size(); ++j) m.set(i, j, r[i][j] != 0);
  return m;
}

std::string random_action(std::mt19937_64& rng, const environment& env) {
  static const std::vector<std::string> ids{"crow", "pumpkin", "moon", "ghost"};
  auto pick = [&] { return ids[rng() % ids.size()]; };
  std::uniform_int_distribution<int> x(-10, env.canvas_width + 10), y(-10, env.canvas_height + 10);
  std::uniform_real_distribution<double> unit(0.5, 1.5);
  switch (rng() % 8) {
    case 0: return "REMOVE " + pick();
    case 1: return "MOVE " + pick() + " " + std::to_string(x(rng)) + " " + std::to_string(y(rng));
    case 2: return "KEEP " + pick();
    case 3: return "FALL " + pick() + " " + std::to_string(rng() % 12);
    case 4: return "RESIZE " + pick() + " " + std::to_string(unit(rng));
    case 5:
      return "RETOUCH " + pick() + " " + std::to_string(unit(rng)) + " 1 " + std::to_string(unit(rng)) +
             " 1";
    case 6: return "EDIT " + pick() + " \"tint " + std::to_string(rng() % 100) + "\" recolor";
    default: {
      static const std::vector<std::string> rel{"frontmost", "backmost", "front_of:crow", "behind:moon"};
      return "INSERT \"lantern\" " + std::to_string(x(rng)) + " " + std::to_string(y(rng)) + " 9 12 " +
             rel[rng() % rel.size()];
    }
  }
}

}  // namespace

int main() {
  criterion("ordering oracle: 1000 random instances match brute-force reachability", [](verdict& v) {
    std::mt19937_64 rng(1234);
    auto start = std::chrono::steady_clock::now();
    for (int trial = 0; trial < 1000 && v.failure.empty(); ++trial) {
      std::string mismatch = check_instance(make_instance(rng));
      v.expect(mismatch.empty(), "instance " + std::to_string(trial) + ": " + mismatch);
    }
    double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    v.expect(s < 5.0, "took " + std::to_string(s) + " s");
  });

  criterion("occlusion derivation: two-square and three-chain matrices", [](verdict& v) {
    auto two = derive_hard_constraints(load_bundle(fixture("two_squares")));
    v.expect(two.matrix == rows({{0, 1}, {0, 0}}), "two_squares O");
    auto chain = derive_hard_constraints(load_bundle(fixture("chain3")));
    v.expect(chain.matrix == rows({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}), "chain3 O");
    environment env = ordered("chain3");
    v.expect(env.stacking == std::vector<std::string>{"A", "B", "C"}, "chain3 stacking");
  });

  criterion("gravity: removing the pumpkin grounds the crow; settling is idempotent", [](verdict& v) {
    auto dir = scratch("accept_gravity");
    std::ofstream(dir / "remove.json")
        << R"({"action_sequence":[{"action":"REMOVE","object_id":"pumpkin"}]})";
    v.expect(cli({"exec", fixture("crow").string(), "--script", (dir / "remove.json").string(), "--out",
                  (dir / "out").string()}) == 0,
             "exec failed");
    environment after = load_bundle(dir / "out");
    int lowest = after.find("crow")->placed_amodal().tight_bounds().y1 - 1;
    int gap = after.ground_y - lowest;
    v.expect(gap >= 0 && gap <= 2, "crow gap to ground " + std::to_string(gap));
    std::string out;
    v.expect(cli({"--json", "simulate-gravity", (dir / "out").string()}, &out) == 0, "simulate-gravity");
    v.expect(json::parse(out)["generated_actions"].empty(), "second pass generated actions");
    std::filesystem::remove_all(dir);
  });

  criterion("zero drift over 4 rounds; noise baseline strictly increasing", [](verdict& v) {
    session s(ordered("crow"), std::make_shared<stub_synthesizer>());
    for (int r = 0; r < 4; ++r) {
      rect b = s.state().find("moon")->bbox();
      s.run_round(parse_script("MOVE moon " + std::to_string(b.center_x() - 12) + " " +
                               std::to_string(b.center_y() + 2) + "\nRETOUCH moon 1.1 1 0.9 1"));
    }
    auto series = drift_series(s, {"moon"});
    v.expect(series.size() == 4, "series length");
    for (const auto& p : series)
      v.expect(p.pixdiff == 0.0, "round " + std::to_string(p.round) + " pixdiff " + std::to_string(p.pixdiff));
    auto noise = noise_baseline_series(composite(s.state_at_round(0)), drift_region(s, {"moon"}), 4);
    for (std::size_t i = 1; i < noise.size(); ++i)
      v.expect(noise[i].pixdiff > noise[i - 1].pixdiff, "noise not increasing at round " + std::to_string(i + 1));
  });

  criterion("compositor: cut-outs recomposite to the source; empty scene is the background", [](verdict& v) {
    v.expect(composite(ordered("cutout")) == read_png(fixture("cutout") / "source.png"), "cutout mismatch");
    environment empty = load_bundle(fixture("empty"));
    v.expect(composite(empty) == empty.background, "empty scene mismatch");
  });

  criterion("metrics arithmetic: LPIPS-U, SA/CSR, PC/IC/MS", [](verdict& v) {
    raster original = read_png(fixture("lpips") / "original.png");
    raster noisy = read_png(fixture("lpips") / "noisy.png");
    mask edit = read_mask_png(fixture("lpips") / "edit_mask.png");
    v.expect(lpips_u(original, original, edit) == 0.0, "identical images");
    v.expect(lpips_u(original, noisy, mask(32, 32, true)) == 0.0, "full edit mask");
    auto levels = lpips_u_levels(original, noisy, edit, pyramid_extractor());
    v.expect(std::abs(levels[0] - 0.027437293345605924) <= 1e-9, "level 0 vs oracle");
    std::vector<double> grades{1, 0.5, 1};
    v.expect(std::round(spatial_accuracy(grades) * 1e4) / 1e4 == 0.8333, "SA");
    v.expect(constraint_satisfaction_rate(grades, 0.7) == 2.0 / 3, "CSR");
    judge_findings f;
    f.physical_issues = {{"", static_cast<double>(penalty(severity::moderate))},
                         {"", static_cast<double>(penalty(severity::severe))}};
    f.fulfillments = {1, 0.5};
    f.step_successes = {1, 1, 0};
    v.expect(pc_score(f) == 5.0, "PC");
    v.expect(ic_score(f) == 7.5, "IC");
    v.expect(std::round(ms_score(f) * 1e3) / 1e3 == 6.667, "MS");
  });

  criterion("action wire format: parse, round-trip, execute; malformed input leaves state", [](verdict& v) {
    const std::string example =
        R"({"action_sequence":[{"action":"REMOVE","object_id":"pumpkin","reason":"user asked"}]})";
    auto actions = parse_script(example);
    v.expect(actions.size() == 1 && verb_name(actions[0]) == "REMOVE", "parse");
    v.expect(serialize_actions(actions) == json::parse(example), "serialize");
    v.expect(parse_script(serialize_actions(actions).dump()) == actions, "round trip");

    session s(ordered("crow"), nullptr);
    const std::string before = s.digest();
    const std::vector<std::pair<std::string, errc>> malformed{
        {"{\"action_sequence\": [", errc::parse_error},
        {R"({"action_sequence": 3})", errc::parse_error},
        {"LEAP crow 3", errc::unknown_verb},
        {"MOVE crow 3", errc::arity_mismatch},
        {"MOVE crow three 4", errc::non_numeric_param},
        {"RESIZE moon 0", errc::invalid_parameter},
        {"EDIT crow \"open", errc::parse_error},
    };
    for (const auto& [input, want] : malformed) {
      auto got = code_of([&] { s.run_round(parse_script(input)); });
      v.expect(got == want, "'" + input + "' gave " + (got ? std::string(to_string(*got)) : "no error"));
      v.expect(s.digest() == before, "digest changed by '" + input + "'");
    }
    auto rejected = s.run_round(parse_script("MOVE ghost 1 1\nINSERT \"x\" 1 1 4 4 behind:ghost"));
    for (const auto& r : rejected.records) v.expect(!r.applied, "rejection applied");
    v.expect(s.digest() == before, "digest changed by rejections");
    auto applied = s.run_round(actions);
    v.expect(applied.records.size() == 2 && applied.records[0].applied, "execute example");
  });

  criterion("replay determinism: 100 random 20-action sessions", [](verdict& v) {
    std::mt19937_64 rng(77);
    auto dir = scratch("accept_replay");
    for (int trial = 0; trial < 100 && v.failure.empty(); ++trial) {
      execute_options opts;
      opts.auto_gravity = trial % 3 != 0;
      session live(ordered("crow"), std::make_shared<stub_synthesizer>(trial), opts);
      std::vector<atomic_action> round;
      for (int k = 0; k < 20; ++k) {
        round.push_back(parse_script(random_action(rng, live.state())).at(0));
        if (rng() % 4 == 0 || k == 19) {
          live.run_round(round);
          round.clear();
        }
        if (rng() % 15 == 0 && !live.log().empty()) {
          try {
            live.undo(1);
          } catch (const error&) {
          }
        }
      }
      auto path = dir / ("trial" + std::to_string(trial) + ".ndjson");
      {
        std::ofstream out(path);
        for (const auto& line : live.journal()) out << line.dump() << '\n';
      }
      std::vector<json> lines;
      std::ifstream in(path);
      for (std::string line; std::getline(in, line);) lines.push_back(json::parse(line));
      session rebuilt = session::replay(ordered("crow"), lines, std::make_shared<stub_synthesizer>(trial));
      v.expect(rebuilt.digest() == live.digest(), "trial " + std::to_string(trial) + " digest differs");
      v.expect(rebuilt.round() == live.round(), "trial " + std::to_string(trial) + " round differs");
    }
    std::filesystem::remove_all(dir);
  });

  std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed")
            << "\n";
  return failures == 0 ? 0 : 1;
}
