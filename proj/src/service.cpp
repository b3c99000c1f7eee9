#include "strata/service.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <fstream>
#include <map>
#include <mutex>
#include <random>
#include <shared_mutex>

#include "httplib.h"
#include "strata/bundle.hpp"
#include "strata/compositor.hpp"
#include "strata/digest.hpp"
#include "strata/metrics.hpp"
#include "strata/occlusion.hpp"
#include "strata/png_io.hpp"

namespace strata {

using nlohmann::json;
namespace fs = std::filesystem;

json error_payload(const error& e) {
  json j = {{"code", to_string(e.code())}, {"message", e.what()}};
  if (e.line()) j["line"] = *e.line();
  if (e.offset()) j["offset"] = *e.offset();
  return j;
}

int http_status(errc code) {
  switch (code) {
    case errc::session_not_found: return 404;
    case errc::nothing_to_undo: return 409;
    case errc::bundle_invalid: return 422;
    case errc::planner_unreachable:
    case errc::planner_malformed_reply: return 502;
    case errc::io_failure: return 500;
    default: return 400;
  }
}

json state_summary(const environment& env, const physics_config& cfg) {
  json layers = json::array();
  for (const auto& l : env.layers) {
    rect b = l.bbox();
    json item = {{"id", l.id},
                 {"name", l.name},
                 {"bbox", {b.x0, b.y0, b.x1, b.y1}},
                 {"depth_score", l.depth_score},
                 {"visible", l.visible},
                 {"offset", {l.offset.x, l.offset.y}},
                 {"scale", l.scale},
                 {"anchored", l.anchored},
                 {"affected_by_gravity", l.affected_by_gravity},
                 {"attributes",
                  {{"brightness", l.attributes.brightness},
                   {"contrast", l.attributes.contrast},
                   {"color", l.attributes.color},
                   {"sharpness", l.attributes.sharpness}}}};
    if (l.depth_hint) item["depth_hint"] = *l.depth_hint;
    layers.push_back(std::move(item));
  }
  support_graph support = infer_support(env, cfg);
  json edges = json::array();
  for (const auto& e : support.edges)
    edges.push_back({{"supported", e.supported}, {"supporter", e.supporter}});
  return {{"canvas", {{"width", env.canvas_width}, {"height", env.canvas_height}}},
          {"ground_y", env.ground_y},
          {"round", env.round},
          {"digest", state_digest(env)},
          {"layers", std::move(layers)},
          {"stacking", env.stacking},
          {"support_edges", std::move(edges)},
          {"ground_supported", support.ground_supported}};
}

namespace {

std::string random_token() {
  std::random_device rd;
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (int i = 0; i < 8; ++i) {
    std::uint32_t v = rd();
    for (int k = 0; k < 4; ++k) {
      out += hex[(v >> (8 * k + 4)) & 0xf];
      out += hex[(v >> (8 * k)) & 0xf];
    }
  }
  return out;
}

double now_seconds() {
  using namespace std::chrono;
  return duration_cast<duration<double>>(system_clock::now().time_since_epoch()).count();
}

struct live_session {
  std::string id;
  std::string bundle;
  double created = 0;
  double updated = 0;

  std::mutex writer;  // serializes mutations and log reads
  std::unique_ptr<session> engine;

  std::mutex events_mutex;
  std::condition_variable events_cv;
  std::vector<json> events;

  std::ofstream journal;
  std::size_t journal_written = 0;

  void push_event(json e) {
    {
      std::lock_guard lock(events_mutex);
      e["seq"] = events.size();
      events.push_back(std::move(e));
    }
    events_cv.notify_all();
  }

  // Appends journal lines not yet on disk.
  void flush_journal() {
    if (!journal.is_open()) return;
    const auto& lines = engine->journal();
    for (; journal_written < lines.size(); ++journal_written)
      journal << lines[journal_written].dump() << '\n';
    journal.flush();
  }
};

void send_json(httplib::Response& res, const json& body, int status = 200) {
  res.status = status;
  res.set_content(body.dump(2), "application/json");
}

void send_error(httplib::Response& res, const error& e) {
  send_json(res, {{"error", error_payload(e)}}, http_status(e.code()));
}

json parse_body(const httplib::Request& req) {
  if (req.body.empty()) return json::object();
  try {
    return json::parse(req.body);
  } catch (const json::parse_error& e) {
    throw error(errc::parse_error, std::string("request body: ") + e.what());
  }
}

int int_param(const httplib::Request& req, const char* name) {
  const std::string text = req.get_param_value(name);
  int v = 0;
  auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || p != text.data() + text.size())
    throw error(errc::invalid_parameter, std::string(name) + " must be an integer");
  return v;
}

}  // namespace

struct service::impl {
  service_config cfg;
  httplib::Server server;
  std::shared_ptr<planner_client> planner;
  std::shared_mutex sessions_mutex;
  std::map<std::string, std::shared_ptr<live_session>> sessions;
  std::atomic<bool> stopping{false};

  explicit impl(service_config c) : cfg(std::move(c)), planner(make_planner(cfg.planner_endpoint)) {
    routes();
  }

  std::shared_ptr<live_session> find(const std::string& id) {
    std::shared_lock lock(sessions_mutex);
    auto it = sessions.find(id);
    if (it == sessions.end()) throw error(errc::session_not_found, "no session '" + id + "'");
    return it->second;
  }

  fs::path resolve_bundle(const std::string& ref) const {
    if (ref.empty()) throw error(errc::bundle_invalid, "missing bundle reference");
    if (cfg.bundle_root.empty()) return fs::path(ref);
    fs::path root = fs::weakly_canonical(cfg.bundle_root);
    fs::path p = fs::weakly_canonical(fs::path(ref).is_absolute() ? fs::path(ref) : root / ref);
    auto [r, _] = std::mismatch(root.begin(), root.end(), p.begin(), p.end());
    if (r != root.end())
      throw error(errc::bundle_invalid, "bundle '" + ref + "' lies outside the bundle root");
    return p;
  }

  json create(const json& body) {
    std::string ref = body.value("bundle", "");
    environment env;
    try {
      env = load_bundle(resolve_bundle(ref));
      order_environment(env);
    } catch (const error& e) {
      if (e.code() == errc::bundle_invalid) throw;
      throw error(errc::bundle_invalid,
                  "bundle '" + ref + "': " + std::string(to_string(e.code())) + ": " + e.what());
    }
    execute_options opts = cfg.exec;
    if (body.contains("auto_gravity")) opts.auto_gravity = body["auto_gravity"].get<bool>();

    auto s = std::make_shared<live_session>();
    s->id = random_token();
    s->bundle = ref;
    s->created = s->updated = now_seconds();
    s->engine = std::make_unique<session>(std::move(env), std::make_shared<stub_synthesizer>(cfg.seed),
                                          opts);
    live_session* raw = s.get();
    s->engine->set_event_sink([raw](const json& e) { raw->push_event(e); });
    if (!cfg.journal_dir.empty()) {
      fs::create_directories(cfg.journal_dir);
      s->journal.open(cfg.journal_dir / (s->id + ".ndjson"));
      if (!s->journal) throw error(errc::io_failure, "cannot open session journal");
      s->journal << json{{"type", "session"},
                         {"bundle", ref},
                         {"auto_gravity", opts.auto_gravity},
                         {"seed", cfg.seed}}
                         .dump()
                 << '\n';
      s->journal.flush();
    }

    json out = {{"id", s->id},
                {"layers", s->engine->state().layers.size()},
                {"stacking", s->engine->state().stacking},
                {"round", 0},
                {"digest", s->engine->digest()}};
    std::unique_lock lock(sessions_mutex);
    sessions.emplace(s->id, std::move(s));
    return out;
  }

  void routes() {
    server.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                                {"Access-Control-Allow-Headers", "Content-Type"},
                                {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    server.Options(R"(.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    auto guarded = [](auto fn) {
      return [fn](const httplib::Request& req, httplib::Response& res) {
        try {
          fn(req, res);
        } catch (const error& e) {
          send_error(res, e);
        } catch (const std::exception& e) {
          send_json(res, {{"error", {{"code", "internal"}, {"message", e.what()}}}}, 500);
        }
      };
    };

    server.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
      send_json(res, {{"ok", true}});
    });

    server.Post("/sessions", guarded([this](const httplib::Request& req, httplib::Response& res) {
      send_json(res, create(parse_body(req)), 201);
    }));

    server.Get("/sessions", guarded([this](const httplib::Request&, httplib::Response& res) {
      json list = json::array();
      std::shared_lock lock(sessions_mutex);
      for (const auto& [id, s] : sessions)
        list.push_back({{"id", id}, {"bundle", s->bundle}, {"created", s->created}, {"updated", s->updated}});
      send_json(res, {{"sessions", list}});
    }));

    server.Get(R"(/sessions/([^/]+)/state)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = find(req.matches[1]);
                 environment snapshot;
                 {
                   std::lock_guard lock(s->writer);
                   snapshot = s->engine->state();
                 }
                 json out = state_summary(snapshot, s->engine->options().physics);
                 out["id"] = s->id;
                 out["bundle"] = s->bundle;
                 send_json(res, out);
               }));

    server.Post(R"(/sessions/([^/]+)/actions)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = find(req.matches[1]);
                  auto actions = parse_script(req.body);
                  provenance origin = provenance::user;
                  if (req.has_param("provenance"))
                    origin = provenance_from(req.get_param_value("provenance"));
                  if (origin == provenance::physics)
                    throw error(errc::invalid_parameter, "physics provenance is reserved for the engine");
                  std::lock_guard lock(s->writer);
                  round_report report = s->engine->run_round(actions, origin);
                  s->updated = now_seconds();
                  s->flush_journal();
                  send_json(res, to_json(report));
                }));

    server.Get(R"(/sessions/([^/]+)/render)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = find(req.matches[1]);
                 environment snapshot;
                 {
                   std::lock_guard lock(s->writer);
                   if (req.has_param("round")) {
                     int r = int_param(req, "round");
                     snapshot = s->engine->state_at_round(r);
                   } else {
                     snapshot = s->engine->state();
                   }
                 }
                 auto png = encode_png(composite(snapshot));
                 res.set_content(std::string(png.begin(), png.end()), "image/png");
               }));

    server.Post(R"(/sessions/([^/]+)/undo)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = find(req.matches[1]);
                  json body = parse_body(req);
                  long long k = 1;
                  if (body.contains("k")) {
                    if (!body["k"].is_number_integer())
                      throw error(errc::non_numeric_param, "k must be an integer");
                    k = body["k"].get<long long>();
                  }
                  if (k < 1) throw error(errc::invalid_parameter, "k must be at least 1");
                  std::lock_guard lock(s->writer);
                  s->engine->undo(static_cast<std::size_t>(k));
                  s->updated = now_seconds();
                  s->flush_journal();
                  send_json(res, {{"round", s->engine->round()},
                                  {"digest", s->engine->digest()},
                                  {"records", s->engine->log().size()}});
                }));

    server.Get(R"(/sessions/([^/]+)/diagnostics)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = find(req.matches[1]);
                 std::unique_ptr<session> copy;
                 {
                   std::lock_guard lock(s->writer);
                   copy = std::make_unique<session>(*s->engine);
                 }
                 copy->set_event_sink(nullptr);
                 auto targets = touched_layers(copy->log());
                 auto series = drift_series(*copy, {});
                 physics_report physics;
                 physics.support = infer_support(copy->state(), copy->options().physics);
                 physics.violations = check_balance(copy->state(), physics.support, copy->options().physics);
                 auto floating = floating_layers(copy->state(), physics.support);
                 physics.violations.insert(physics.violations.end(), floating.begin(), floating.end());
                 send_json(res, {{"round", copy->round()},
                                 {"targets", targets},
                                 {"drift", to_json(series)},
                                 {"physics", to_json(physics)}});
               }));

    server.Post(R"(/sessions/([^/]+)/plan)",
                guarded([this](const httplib::Request& req, httplib::Response& res) {
                  auto s = find(req.matches[1]);
                  json body = parse_body(req);
                  if (!body.contains("instruction") || !body["instruction"].is_string())
                    throw error(errc::arity_mismatch, "plan needs an \"instruction\" string");
                  environment snapshot;
                  {
                    std::lock_guard lock(s->writer);
                    snapshot = s->engine->state();
                  }
                  auto actions = plan(body["instruction"].get<std::string>(), snapshot, *planner,
                                      s->engine->options().physics);
                  json dsl = json::array();
                  for (const auto& a : actions) dsl.push_back(to_dsl(a));
                  json out = serialize_actions(actions);
                  out["dsl"] = dsl;
                  send_json(res, out);
                }));

    server.Get(R"(/sessions/([^/]+)/events)",
               guarded([this](const httplib::Request& req, httplib::Response& res) {
                 auto s = find(req.matches[1]);
                 std::size_t from = 0;
                 if (req.has_param("from")) from = static_cast<std::size_t>(std::max(0, int_param(req, "from")));
                 bool follow = !(req.has_param("follow") && req.get_param_value("follow") == "0");
                 auto cursor = std::make_shared<std::size_t>(from);
                 res.set_chunked_content_provider(
                     "application/x-ndjson",
                     [this, s, cursor, follow](std::size_t, httplib::DataSink& sink) {
                       std::vector<json> batch;
                       {
                         std::unique_lock lock(s->events_mutex);
                         if (follow && *cursor >= s->events.size())
                           s->events_cv.wait_for(lock, std::chrono::milliseconds(250), [&] {
                             return stopping.load() || *cursor < s->events.size();
                           });
                         for (; *cursor < s->events.size(); ++*cursor) batch.push_back(s->events[*cursor]);
                       }
                       for (const auto& e : batch) {
                         std::string line = e.dump() + "\n";
                         if (!sink.write(line.data(), line.size())) return false;
                       }
                       if (!follow || stopping.load()) sink.done();
                       return true;
                     });
               }));
  }
};

service::service(service_config cfg) : impl_(std::make_unique<impl>(std::move(cfg))) {}
service::~service() { stop(); }

bool service::listen() { return impl_->server.listen(impl_->cfg.host, impl_->cfg.port); }
int service::bind_any_port() { return impl_->server.bind_to_any_port(impl_->cfg.host); }
bool service::listen_after_bind() { return impl_->server.listen_after_bind(); }

void service::stop() {
  impl_->stopping = true;
  {
    std::shared_lock lock(impl_->sessions_mutex);
    for (auto& [_, s] : impl_->sessions) s->events_cv.notify_all();
  }
  impl_->server.stop();
}

httplib::Server& service::server() { return impl_->server; }

}  // namespace strata
