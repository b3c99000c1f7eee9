#include "strata/cli.hpp"

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "strata/bundle.hpp"
#include "strata/compositor.hpp"
#include "strata/digest.hpp"
#include "strata/engine.hpp"
#include "strata/metrics.hpp"
#include "strata/occlusion.hpp"
#include "strata/png_io.hpp"
#include "strata/service.hpp"

namespace strata {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw error(errc::missing_asset, "cannot read " + p.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) {
  try {
    return json::parse(read_text(p));
  } catch (const json::parse_error& e) {
    throw error(errc::parse_error, p.string() + ": " + e.what());
  }
}

std::vector<json> read_journal(const fs::path& p) {
  std::istringstream in(read_text(p));
  std::vector<json> lines;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      lines.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw error(errc::parse_error, p.string() + ":" + std::to_string(n) + ": " + e.what(), n, 0);
    }
  }
  return lines;
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw error(errc::io_failure, "cannot write " + p.string());
  out << text;
}

// Bundle paths may be given relative to $STRATA_BUNDLE_ROOT.
fs::path bundle_path(const std::string& arg) {
  fs::path p(arg);
  if (p.is_relative() && !fs::exists(p))
    if (const char* root = std::getenv("STRATA_BUNDLE_ROOT"); root && *root)
      return fs::path(root) / p;
  return p;
}

environment load_ordered(const std::string& arg) {
  environment env = load_bundle(bundle_path(arg));
  order_environment(env);
  return env;
}

bool same_layer(const object_layer& a, const object_layer& b) {
  return a.visible == b.visible && a.offset == b.offset && a.scale == b.scale &&
         a.attributes.brightness == b.attributes.brightness &&
         a.attributes.contrast == b.attributes.contrast && a.attributes.color == b.attributes.color &&
         a.attributes.sharpness == b.attributes.sharpness && a.amodal == b.amodal;
}

struct physics_flags {
  int contact_tolerance = 2;
  double overlap_fraction = 0.1;
  double balance_margin = 0.05;

  void add(CLI::App* app) {
    app->add_option("--contact-tolerance", contact_tolerance, "Contact tolerance in px")
        ->check(CLI::NonNegativeNumber);
    app->add_option("--overlap", overlap_fraction, "Minimum horizontal overlap fraction")
        ->check(CLI::Range(0.0, 1.0));
    app->add_option("--balance-margin", balance_margin, "Balance margin as a width fraction")
        ->check(CLI::NonNegativeNumber);
  }
  physics_config config() const { return {contact_tolerance, overlap_fraction, balance_margin}; }
};

// ------------------------------------------------------------ subcommands

int cmd_validate(const std::string& bundle, bool as_json, std::ostream& out) {
  std::vector<violation> found;
  try {
    environment env = load_bundle(bundle_path(bundle));
    found = validate(env);
    if (found.empty()) {
      try {
        order_environment(env);
      } catch (const error& e) {
        found.push_back({"environment", std::string(to_string(e.code())), e.what()});
      }
    }
  } catch (const error& e) {
    found.push_back({"manifest", std::string(to_string(e.code())), e.what()});
  }
  if (as_json) {
    json list = json::array();
    for (const auto& v : found) list.push_back(to_json(v));
    out << json{{"valid", found.empty()}, {"violations", list}}.dump(2) << "\n";
  } else if (found.empty()) {
    out << "ok\n";
  } else {
    for (const auto& v : found) out << v.subject << ": " << v.rule << ": " << v.message << "\n";
  }
  return found.empty() ? 0 : 1;
}

int cmd_order(const std::string& bundle, std::optional<double> margin, bool as_json,
              std::ostream& out) {
  environment env = load_bundle(bundle_path(bundle));
  if (margin) env.soft_margin = *margin;
  occlusion_graph g = order_environment(env);
  if (as_json) {
    out << to_json(g, env.stacking).dump(2) << "\n";
    return 0;
  }
  out << "D = {";
  for (std::size_t i = 0; i < env.stacking.size(); ++i)
    out << (i ? ", " : "") << env.stacking[i] << ":" << env.find(env.stacking[i])->depth_score;
  out << "}\n";
  out << "\xcf\x80 = ";
  for (std::size_t i = 0; i < env.stacking.size(); ++i) out << (i ? "," : "") << env.stacking[i];
  out << "\n";
  for (const auto& [i, j] : g.dropped_soft_edges)
    out << "dropped soft edge " << g.ids[i] << " -> " << g.ids[j] << "\n";
  return 0;
}

int cmd_gravity(const std::string& bundle, const physics_flags& pf, const std::string& out_dir,
                bool as_json, std::ostream& out) {
  environment env = load_ordered(bundle);
  physics_config cfg = pf.config();
  physics_report report = apply_gravity(env, infer_support(env, cfg), cfg);
  if (as_json) {
    out << to_json(report).dump(2) << "\n";
  } else {
    for (const auto& e : report.support.edges) out << e.supported << " rests on " << e.supporter << "\n";
    for (const auto& id : report.support.ground_supported) out << id << " rests on the ground\n";
    for (const auto& f : report.generated) out << "FALL " << f.layer_id << " " << f.delta_y << "\n";
    for (const auto& v : report.violations)
      out << to_string(v.rule) << ": " << v.layer_id << ": " << v.message << "\n";
    if (report.generated.empty()) out << "no actions generated\n";
  }
  if (!out_dir.empty()) {
    for (const auto& f : report.generated) env.find(f.layer_id)->offset.y += f.delta_y;
    save_bundle(env, out_dir);
  }
  return 0;
}

struct exec_flags {
  std::string bundle;
  std::vector<std::string> scripts;
  bool no_gravity = false;
  std::string out_dir;
  std::string log;
  std::uint64_t seed = 0;
  physics_flags physics;
};

int cmd_exec(const exec_flags& f, bool as_json, std::ostream& out, std::ostream& err) {
  environment env = load_ordered(f.bundle);
  execute_options opts;
  opts.auto_gravity = !f.no_gravity;
  opts.physics = f.physics.config();
  session s(std::move(env), std::make_shared<stub_synthesizer>(f.seed), opts);

  std::vector<std::vector<atomic_action>> rounds;
  for (const auto& script : f.scripts) rounds.push_back(parse_script(read_text(script)));

  json reports = json::array();
  for (const auto& actions : rounds) {
    round_report r = s.run_round(actions);
    for (const auto& rec : r.records) {
      if (!as_json)
        out << "round " << rec.round << " " << to_string(rec.origin) << " " << to_dsl(rec.action)
            << (rec.applied ? "" : "  [rejected: " + rec.reason + "]") << "\n";
      if (!rec.applied) err << "warning: rejected " << verb_name(rec.action) << ": " << rec.reason << "\n";
      for (const auto& note : rec.notes) err << "note: " << note << "\n";
    }
    reports.push_back(to_json(r));
  }
  if (as_json)
    out << json{{"rounds", reports}, {"digest", s.digest()}}.dump(2) << "\n";
  else
    out << "digest " << s.digest() << "\n";

  if (!f.log.empty()) {
    std::string text = json{{"type", "session"},
                            {"bundle", f.bundle},
                            {"auto_gravity", opts.auto_gravity},
                            {"seed", f.seed}}
                           .dump() +
                       "\n";
    for (const auto& line : s.journal()) text += line.dump() + "\n";
    write_text(f.log, text);
  }
  if (!f.out_dir.empty()) save_bundle(s.state(), f.out_dir);
  return 0;
}

session replay_from(const std::string& bundle, const std::string& log, std::optional<std::uint64_t> seed,
                    const physics_flags& pf) {
  auto lines = read_journal(log);
  execute_options opts;
  opts.physics = pf.config();
  std::uint64_t s = 0;
  if (!lines.empty() && lines.front().value("type", "") == "session") {
    opts.auto_gravity = lines.front().value("auto_gravity", true);
    s = lines.front().value("seed", std::uint64_t{0});
  }
  if (seed) s = *seed;
  return session::replay(load_ordered(bundle), lines, std::make_shared<stub_synthesizer>(s), opts);
}

int cmd_render(const std::string& bundle, const std::string& out_png, std::optional<int> round,
               const std::string& log, const std::vector<std::string>& highlight,
               std::optional<std::uint64_t> seed, std::ostream& out) {
  environment env;
  if (!log.empty()) {
    session s = replay_from(bundle, log, seed, {});
    env = round ? s.state_at_round(*round) : s.state();
  } else {
    if (round && *round != 0)
      throw error(errc::round_out_of_range, "--round needs --log unless it is 0");
    env = load_ordered(bundle);
  }
  render_options opts;
  opts.highlight.insert(highlight.begin(), highlight.end());
  write_png(out_png, composite(env, opts));
  out << "wrote " << out_png << " (" << env.canvas_width << "x" << env.canvas_height << ")\n";
  return 0;
}

int cmd_replay(const std::string& bundle, const std::string& log, const std::string& out_dir,
               std::optional<std::uint64_t> seed, bool as_json, std::ostream& out) {
  session s = replay_from(bundle, log, seed, {});
  if (as_json)
    out << json{{"round", s.round()}, {"records", s.log().size()}, {"digest", s.digest()}}.dump(2)
        << "\n";
  else
    out << "round " << s.round() << ", " << s.log().size() << " records\ndigest " << s.digest() << "\n";
  if (!out_dir.empty()) save_bundle(s.state(), out_dir);
  return 0;
}

struct metrics_flags {
  std::string bundle;
  std::string edited;
  std::string constraints;
  std::string detections;
  std::string findings;
  std::string edit_mask;
  std::string report;
  double tau = default_tau;
  bool raw_norm = false;
};

int cmd_metrics(const metrics_flags& f, std::ostream& out) {
  environment before = load_ordered(f.bundle);
  json report = json::object();

  std::optional<environment> after_env;
  std::optional<raster> edited;
  if (!f.edited.empty()) {
    fs::path p = bundle_path(f.edited);
    if (fs::is_directory(p)) {
      after_env = load_ordered(f.edited);
      edited = composite(*after_env);
    } else {
      edited = read_png(p);
    }
  }

  std::vector<constraint_spec> constraints;
  if (!f.constraints.empty())
    constraints = parse_constraints(read_json(f.constraints));
  else if (!before.constraints.is_null() && !before.constraints.empty())
    constraints = parse_constraints(before.constraints);

  if (edited) {
    raster original = composite(before);
    mask edit_mask(before.canvas_width, before.canvas_height);
    std::string mask_source = "none";
    if (!f.edit_mask.empty()) {
      edit_mask = read_mask_png(f.edit_mask);
      mask_source = "file";
    } else if (after_env) {
      std::set<std::string> changed_before, changed_after;
      for (const auto& l : after_env->layers) {
        const object_layer* old = before.find(l.id);
        if (!old) {
          changed_after.insert(l.id);
        } else if (!same_layer(*old, l)) {
          changed_before.insert(l.id);
          changed_after.insert(l.id);
        }
      }
      mask a = composite_mask(before, changed_before), b = composite_mask(*after_env, changed_after);
      for (int y = 0; y < edit_mask.height(); ++y)
        for (int x = 0; x < edit_mask.width(); ++x) edit_mask.set(x, y, a.at(x, y) || b.at(x, y));
      mask_source = "changed layers";
    } else if (!constraints.empty()) {
      std::set<std::string> ids;
      for (const auto& c : constraints)
        if (before.find(c.target)) ids.insert(c.target);
      edit_mask = composite_mask(before, ids);
      mask_source = "constraint targets";
    }
    auto levels = lpips_u_levels(original, *edited, edit_mask, pyramid_extractor{}, f.raw_norm);
    report["lpips_u"] = lpips_u(original, *edited, edit_mask, pyramid_extractor{}, f.raw_norm);
    report["lpips_u_levels"] = levels;
    report["lpips_u_raw_norm"] = f.raw_norm;
    report["edit_mask"] = {{"source", mask_source}, {"pixels", edit_mask.popcount()}};
  }

  if (!constraints.empty()) {
    std::vector<detection> det_before = ground_truth_detections(before), det_after;
    if (!f.detections.empty())
      det_after = parse_detections(read_json(f.detections));
    else if (after_env)
      det_after = ground_truth_detections(*after_env);
    else
      throw error(errc::invalid_parameter,
                  "SA/CSR need detections of the edited image: pass --detections or an edited bundle");
    auto grades = grade_constraints(constraints, det_before, det_after, before.canvas_width,
                                    before.canvas_height);
    json cs = json::array();
    for (std::size_t i = 0; i < constraints.size(); ++i) {
      json c = to_json(constraints[i]);
      c["a"] = grades[i];
      cs.push_back(c);
    }
    report["constraints"] = cs;
    report["sa"] = spatial_accuracy(grades);
    report["csr"] = constraint_satisfaction_rate(grades, f.tau);
    report["tau"] = f.tau;
  }

  if (!f.findings.empty()) {
    judge_findings jf = parse_findings(read_json(f.findings));
    auto score = [](double raw) { return json{{"raw", raw}, {"score", raw / 10.0}}; };
    report["pc"] = score(pc_score(jf));
    if (!jf.fulfillments.empty()) report["ic"] = score(ic_score(jf));
    if (!jf.step_successes.empty()) report["ms"] = score(ms_score(jf));
  }

  std::string text = report.dump(2);
  if (!f.report.empty()) write_text(f.report, text + "\n");
  out << text << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Layered image environment: ordering, physics, actions, rendering and metrics",
               "strata"};
  app.require_subcommand(1);
  bool as_json = false;
  app.add_flag("--json", as_json, "Machine-readable output and errors");

  std::string bundle;
  auto add_bundle = [&](CLI::App* sub) {
    sub->add_option("bundle", bundle, "Scene bundle directory")->required();
  };

  auto* validate_cmd = app.add_subcommand("validate", "Check a bundle against the scene invariants");
  add_bundle(validate_cmd);

  auto* order_cmd = app.add_subcommand("order", "Print depth scores and the stacking order");
  add_bundle(order_cmd);
  std::optional<double> soft_margin;
  order_cmd->add_option("--soft-margin", soft_margin, "Depth-hint margin for soft edges");

  auto* gravity_cmd = app.add_subcommand("simulate-gravity", "Run the gravity fixpoint once");
  add_bundle(gravity_cmd);
  physics_flags gravity_flags;
  gravity_flags.add(gravity_cmd);
  std::string gravity_out;
  gravity_cmd->add_option("--out", gravity_out, "Write the settled bundle here");

  auto* exec_cmd = app.add_subcommand("exec", "Execute action scripts, one round per script");
  exec_flags ef;
  exec_cmd->add_option("bundle", ef.bundle, "Scene bundle directory")->required();
  exec_cmd->add_option("--script", ef.scripts, "Action script (JSON or DSL); repeat for more rounds")
      ->required()
      ->check(CLI::ExistingFile);
  exec_cmd->add_flag("--no-gravity", ef.no_gravity, "Do not run auto-gravity");
  exec_cmd->add_option("--out", ef.out_dir, "Write the resulting bundle here");
  exec_cmd->add_option("--log", ef.log, "Write the session journal (NDJSON) here");
  exec_cmd->add_option("--seed", ef.seed, "Stub synthesizer seed");
  ef.physics.add(exec_cmd);

  auto* render_cmd = app.add_subcommand("render", "Composite a bundle to PNG");
  add_bundle(render_cmd);
  std::string render_out, render_log;
  std::optional<int> render_round;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> highlight;
  render_cmd->add_option("--out", render_out, "Output PNG")->required();
  render_cmd->add_option("--round", render_round, "Historical round (needs --log)")
      ->check(CLI::NonNegativeNumber);
  render_cmd->add_option("--log", render_log, "Session journal to replay")->check(CLI::ExistingFile);
  render_cmd->add_option("--highlight", highlight, "Outline these layers")->delimiter(',');
  render_cmd->add_option("--seed", seed, "Override the journal's synthesizer seed");

  auto* metrics_cmd = app.add_subcommand("metrics", "Score an edit against its source bundle");
  metrics_flags mf;
  metrics_cmd->add_option("bundle", mf.bundle, "Source scene bundle")->required();
  metrics_cmd->add_option("--edited", mf.edited, "Edited PNG or edited bundle directory");
  metrics_cmd->add_option("--constraints", mf.constraints, "Constraint list (JSON)");
  metrics_cmd->add_option("--detections", mf.detections, "Detections on the edited image (JSON)");
  metrics_cmd->add_option("--findings", mf.findings, "Judge findings (JSON)");
  metrics_cmd->add_option("--edit-mask", mf.edit_mask, "Edited-region mask PNG");
  metrics_cmd->add_option("--report", mf.report, "Write the report JSON here");
  metrics_cmd->add_option("--tau", mf.tau, "CSR threshold")->check(CLI::Range(0.0, 1.0));
  metrics_cmd->add_flag("--raw-norm", mf.raw_norm, "Unnormalized per-level L2 in LPIPS-U");

  auto* replay_cmd = app.add_subcommand("replay", "Rebuild a session from its journal");
  add_bundle(replay_cmd);
  std::string replay_log, replay_out;
  replay_cmd->add_option("--log", replay_log, "Session journal")->required()->check(CLI::ExistingFile);
  replay_cmd->add_option("--out", replay_out, "Write the reconstructed bundle here");
  replay_cmd->add_option("--seed", seed, "Override the journal's synthesizer seed");

  auto* serve_cmd = app.add_subcommand("serve", "Run the HTTP session service");
  service_config sc;
  if (const char* root = std::getenv("STRATA_BUNDLE_ROOT")) sc.bundle_root = root;
  if (const char* planner = std::getenv("STRATA_PLANNER")) sc.planner_endpoint = planner;
  bool serve_no_gravity = false;
  std::string bundle_root = sc.bundle_root.string(), journal_dir;
  physics_flags serve_physics;
  serve_cmd->add_option("--host", sc.host, "Listen address");
  serve_cmd->add_option("--port", sc.port, "Listen port")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--bundle-root", bundle_root, "Directory bundle references resolve under");
  serve_cmd->add_option("--planner", sc.planner_endpoint, "Planner endpoint URL, or 'offline'");
  serve_cmd->add_option("--journal-dir", journal_dir, "Persist session journals here");
  serve_cmd->add_option("--seed", sc.seed, "Stub synthesizer seed");
  serve_cmd->add_flag("--no-gravity", serve_no_gravity, "Disable auto-gravity by default");
  serve_physics.add(serve_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*validate_cmd) return cmd_validate(bundle, as_json, out);
    if (*order_cmd) return cmd_order(bundle, soft_margin, as_json, out);
    if (*gravity_cmd) return cmd_gravity(bundle, gravity_flags, gravity_out, as_json, out);
    if (*exec_cmd) return cmd_exec(ef, as_json, out, err);
    if (*render_cmd) return cmd_render(bundle, render_out, render_round, render_log, highlight, seed, out);
    if (*metrics_cmd) return cmd_metrics(mf, out);
    if (*replay_cmd) return cmd_replay(bundle, replay_log, replay_out, seed, as_json, out);
    if (*serve_cmd) {
      sc.bundle_root = bundle_root;
      sc.journal_dir = journal_dir;
      sc.exec.auto_gravity = !serve_no_gravity;
      sc.exec.physics = serve_physics.config();
      service svc(sc);
      out << "listening on " << sc.host << ":" << sc.port << std::endl;
      if (!svc.listen()) throw error(errc::io_failure, "cannot listen on " + sc.host + ":" + std::to_string(sc.port));
      return 0;
    }
  } catch (const error& e) {
    if (as_json)
      err << json{{"error", error_payload(e)}}.dump() << "\n";
    else
      err << "error: " << to_string(e.code()) << ": " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    if (as_json)
      err << json{{"error", {{"code", "io_failure"}, {"message", e.what()}}}}.dump() << "\n";
    else
      err << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

}  // namespace strata
