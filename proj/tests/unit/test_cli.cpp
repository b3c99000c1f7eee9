#include "doctest.h"
#include "strata/bundle.hpp"
#include "strata/cli.hpp"
#include "strata/png_io.hpp"
#include "support.hpp"

#include <fstream>
#include <sstream>

using namespace strata;
using namespace strata::testing;
using nlohmann::json;

namespace {

struct result {
  int code = 0;
  std::string out;
  std::string err;
};

result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "strata");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string fx(const std::string& name) { return fixture(name).string(); }

void write(const std::filesystem::path& p, const std::string& text) { std::ofstream(p) << text; }

}  // namespace

TEST_CASE("order") {
  auto r = cli({"order", fx("chain3")});
  CHECK(r.code == 0);
  CHECK(r.out == "D = {A:2, B:1, C:0}\nπ = A,B,C\n");

  auto j = cli({"--json", "order", fx("two_squares")});
  REQUIRE(j.code == 0);
  json doc = json::parse(j.out);
  CHECK(doc["stacking"] == json::array({"B", "A"}));
  CHECK(doc["scores"] == json{{"A", 0}, {"B", 1}});
  // stable across runs
  CHECK(cli({"--json", "order", fx("two_squares")}).out == j.out);

  auto cyc = cli({"--json", "order", fx("cycle")});
  CHECK(cyc.code == 1);
  CHECK(json::parse(cyc.err)["error"]["code"] == "hard_constraint_cycle");
  auto plain = cli({"order", fx("cycle")});
  CHECK(plain.err.rfind("error: hard_constraint_cycle", 0) == 0);
}

TEST_CASE("usage errors exit 2") {
  CHECK(cli({}).code == 2);
  CHECK(cli({"frobnicate"}).code == 2);
  CHECK(cli({"order"}).code == 2);
  CHECK(cli({"exec", fx("crow")}).code == 2);
  CHECK(cli({"metrics", fx("crow"), "--tau", "3"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
}

TEST_CASE("validate") {
  CHECK(cli({"validate", fx("crow")}).code == 0);
  auto dir = scratch("cli_validate");
  std::filesystem::copy(fixture("two_squares"), dir, std::filesystem::copy_options::recursive);
  write(dir / "manifest.json", "{\"version\": 1, \"canvas\": ");
  auto r = cli({"--json", "validate", dir.string()});
  CHECK(r.code == 1);
  json v = json::parse(r.out);
  REQUIRE(v["violations"].size() >= 1);
  CHECK(v["violations"][0]["rule"] == "malformed_manifest");
  std::filesystem::remove_all(dir);
}

TEST_CASE("exec, render, replay, metrics") {
  auto dir = scratch("cli_exec");
  write(dir / "remove.json",
        R"({"action_sequence":[{"action":"REMOVE","object_id":"pumpkin","reason":"user asked"}]})");
  write(dir / "move.txt", "MOVE moon 30 20\nMOVE ghost 1 1\n");

  auto r = cli({"exec", fx("crow"), "--script", (dir / "remove.json").string(), "--script",
                (dir / "move.txt").string(), "--out", (dir / "out").string(), "--log",
                (dir / "log.ndjson").string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("round 1 user REMOVE pumpkin\nround 1 physics FALL crow 40") != std::string::npos);
  CHECK(r.out.find("round 2 user MOVE ghost") != std::string::npos);
  CHECK(r.err.find("unknown object") != std::string::npos);

  environment out = load_bundle(dir / "out");
  CHECK_FALSE(out.find("pumpkin")->visible);
  const object_layer& crow = *out.find("crow");
  int gap = out.ground_y - (crow.placed_amodal().tight_bounds().y1 - 1);
  CHECK(gap >= 0);
  CHECK(gap <= 2);

  auto gravity = cli({"--json", "simulate-gravity", (dir / "out").string()});
  REQUIRE(gravity.code == 0);
  CHECK(json::parse(gravity.out)["generated_actions"].empty());

  REQUIRE(cli({"render", (dir / "out").string(), "--out", (dir / "now.png").string()}).code == 0);
  REQUIRE(cli({"render", fx("crow"), "--log", (dir / "log.ndjson").string(), "--round", "2", "--out",
               (dir / "replayed.png").string()})
              .code == 0);
  CHECK(read_png(dir / "now.png") == read_png(dir / "replayed.png"));
  CHECK(cli({"render", fx("crow"), "--log", (dir / "log.ndjson").string(), "--round", "3", "--out",
             (dir / "x.png").string()})
            .code == 1);

  auto rep = cli({"--json", "replay", fx("crow"), "--log", (dir / "log.ndjson").string()});
  REQUIRE(rep.code == 0);
  auto last_digest = [&] {
    std::ifstream in(dir / "log.ndjson");
    std::string line, digest;
    while (std::getline(in, line)) {
      json j = json::parse(line);
      if (j["type"] == "record") digest = j["record"]["post_digest"];
    }
    return digest;
  };
  CHECK(json::parse(rep.out)["digest"] == last_digest());

  auto m = cli({"metrics", fx("crow"), "--edited", (dir / "out").string()});
  REQUIRE(m.code == 0);
  json report = json::parse(m.out);
  CHECK(report["sa"] == 1.0);
  CHECK(report["csr"] == 1.0);
  CHECK(report["lpips_u"].get<double>() >= 0);

  write(dir / "findings.json", R"({"physical_issues":[{"severity":"moderate"},{"severity":"severe"}],
                                   "fulfillments":[1,0.5],"step_successes":[1,1,0]})");
  auto judged = cli({"metrics", fx("crow"), "--edited", (dir / "out").string(), "--findings",
                     (dir / "findings.json").string()});
  REQUIRE(judged.code == 0);
  json js = json::parse(judged.out);
  CHECK(js["pc"]["raw"] == 5.0);
  CHECK(js["ic"]["raw"] == 7.5);
  CHECK(js["ms"]["raw"] == 20.0 / 3);

  auto bad = cli({"--json", "exec", fx("crow"), "--script", (dir / "findings.json").string()});
  CHECK(bad.code == 1);
  CHECK(json::parse(bad.err)["error"]["code"] == "parse_error");
  std::filesystem::remove_all(dir);
}
