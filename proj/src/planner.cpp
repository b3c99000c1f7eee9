#include "strata/planner.hpp"

#include <algorithm>
#include <cctype>
#include <regex>
#include <sstream>

#include "httplib.h"
#include "strata/error.hpp"

namespace strata {

using nlohmann::json;

namespace {

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

void replace_all(std::string& s, const std::string& from, const std::string& to) {
  for (std::size_t pos = 0; (pos = s.find(from, pos)) != std::string::npos; pos += to.size())
    s.replace(pos, from.size(), to);
}

constexpr const char* prompt_template = R"(You are an action planning expert. Based on the physical reasoning, generate atomic actions.

Scene Description:
{scene_desc}

User Instruction: "{text_prompt}"

Physical Reasoning Result:
{reasoning_result}

Generate a sequence of atomic actions to achieve the instruction while respecting physical constraints.

=== Image Coordinate System ===

Image Dimensions: {width} x {height} pixels

Reference Points:
- Top-Left: (0, 0)
- Top-Right: ({width}, 0)
- Bottom-Left: (0, {height})
- Bottom-Right: ({width}, {height})
- Image Center: ({width/2}, {height/2})

Coordinate Rules:
- Origin at top-left
- X increases left to right
- Y increases top to bottom
- All coordinates must satisfy image bounds

=== Available Atomic Actions ===

REMOVE(object_id)
MOVE(object_id, x, y)
KEEP(object_id)
FALL(object_id, delta_y)
RESIZE(object_id, scale)
RETOUCH(object_id, brightness, contrast, color, sharpness)
EDIT(object_id, prompt, edit_type)
INSERT(prompt, x, y, width, height, layer_relation)

Guidelines:
1. Respect gravity and support relations
2. Maintain physical plausibility
3. Execute actions in correct order
4. Strictly adhere to image boundaries

=== Output Format ===

{
  "action_sequence": [
    { "action": "...", "object_id": ..., "reason": "..." }
  ]
}

Generate the action sequence.
)";

}  // namespace

std::string describe_scene(const environment& env, const support_graph& support) {
  std::ostringstream os;
  os << "Canvas: " << env.canvas_width << "x" << env.canvas_height << ", ground at y="
     << env.ground_y << "\n";
  os << "Objects (front to back):\n";
  for (const auto& id : env.stacking) {
    const object_layer* l = env.find(id);
    if (!l) continue;
    rect b = l->bbox();
    os << "- " << l->id;
    if (!l->name.empty() && l->name != l->id) os << " (\"" << l->name << "\")";
    os << ": bbox [" << b.x0 << ", " << b.y0 << ", " << b.x1 << ", " << b.y1 << "], depth "
       << l->depth_score;
    if (l->anchored) os << ", anchored";
    os << "\n";
  }
  os << "Support:";
  if (support.edges.empty() && support.ground_supported.empty()) os << " none";
  os << "\n";
  for (const auto& e : support.edges) os << "- " << e.supported << " rests on " << e.supporter << "\n";
  for (const auto& id : support.ground_supported) os << "- " << id << " rests on the ground\n";
  return os.str();
}

std::string describe_physics(const environment& env, const support_graph& support,
                             const physics_config& cfg) {
  std::ostringstream os;
  bool any = false;
  for (const auto& l : env.layers) {
    if (!l.visible) continue;
    std::vector<std::string> carried;
    for (const auto& e : support.edges)
      if (e.supporter == l.id) carried.push_back(e.supported);
    if (carried.empty()) continue;
    any = true;
    os << "- Removing or moving " << l.id << " leaves ";
    for (std::size_t i = 0; i < carried.size(); ++i) os << (i ? ", " : "") << carried[i];
    os << " without that support\n";
  }
  auto violations = check_balance(env, support, cfg);
  auto floating = floating_layers(env, support);
  violations.insert(violations.end(), floating.begin(), floating.end());
  for (const auto& v : violations) {
    any = true;
    os << "- " << to_string(v.rule) << ": " << v.layer_id << " " << v.message << "\n";
  }
  if (!any) os << "- No support dependencies or violations\n";
  return os.str();
}

std::string render_planner_prompt(const environment& env, const support_graph& support,
                                  const std::string& instruction) {
  std::string out = prompt_template;
  replace_all(out, "{scene_desc}", describe_scene(env, support));
  replace_all(out, "{reasoning_result}", describe_physics(env, support));
  replace_all(out, "{text_prompt}", instruction);
  replace_all(out, "{width/2}", fmt(env.canvas_width / 2.0));
  replace_all(out, "{height/2}", fmt(env.canvas_height / 2.0));
  replace_all(out, "{width}", std::to_string(env.canvas_width));
  replace_all(out, "{height}", std::to_string(env.canvas_height));
  return out;
}

// ------------------------------------------------------------ offline stub

namespace {

const object_layer* find_named(const environment& env, const std::string& clause) {
  const object_layer* best = nullptr;
  std::size_t best_len = 0;
  auto whole_word = [&](const std::string& needle) {
    if (needle.empty()) return false;
    for (std::size_t pos = clause.find(needle); pos != std::string::npos;
         pos = clause.find(needle, pos + 1)) {
      bool left = pos == 0 || !std::isalnum(static_cast<unsigned char>(clause[pos - 1]));
      std::size_t end = pos + needle.size();
      bool right = end == clause.size() || !std::isalnum(static_cast<unsigned char>(clause[end]));
      if (left && right) return true;
    }
    return false;
  };
  for (const auto& l : env.layers) {
    if (!l.visible) continue;
    std::string spaced = lower(l.id);
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    for (const std::string& cand : {lower(l.name), lower(l.id), spaced})
      if (cand.size() > best_len && whole_word(cand)) {
        best = &l;
        best_len = cand.size();
      }
  }
  return best;
}

std::optional<json> match_clause(const environment& env, const std::string& clause) {
  static const std::regex verb_re(
      R"(^(?:please\s+)?(remove|delete|erase|move|shift|resize|scale|enlarge|shrink|make)\b)");
  static const std::regex to_re(R"(\bto\s*\(?\s*(-?\d+(?:\.\d+)?)\s*[, ]\s*(-?\d+(?:\.\d+)?))");
  static const std::regex dir_re(R"(\b(left|right|up|down)\b(?:\s+by\s+(\d+(?:\.\d+)?))?)");
  static const std::regex by_re(R"(\bby\s+(?:a\s+factor\s+of\s+)?(\d+(?:\.\d+)?)\b(?!\s*(?:px|pixels)))");

  std::smatch m;
  if (!std::regex_search(clause, m, verb_re)) return std::nullopt;
  std::string verb = m[1];
  const object_layer* layer = find_named(env, clause);
  if (!layer) return std::nullopt;

  json a = {{"object_id", layer->id}, {"reason", "offline template: " + clause}};
  if (verb == "remove" || verb == "delete" || verb == "erase") {
    a["action"] = "REMOVE";
  } else if (verb == "move" || verb == "shift") {
    a["action"] = "MOVE";
    if (std::regex_search(clause, m, to_re)) {
      a["x"] = std::stod(m[1]);
      a["y"] = std::stod(m[2]);
    } else if (std::regex_search(clause, m, dir_re)) {
      double step = m[2].matched ? std::stod(m[2]) : 50.0;
      rect b = layer->bbox();
      double x = b.center_x(), y = b.center_y();
      std::string d = m[1];
      if (d == "left") x -= step;
      if (d == "right") x += step;
      if (d == "up") y -= step;
      if (d == "down") y += step;
      a["x"] = x;
      a["y"] = y;
    } else {
      return std::nullopt;
    }
  } else {
    a["action"] = "RESIZE";
    bool bigger = verb == "enlarge" || clause.find("bigger") != std::string::npos ||
                  clause.find("larger") != std::string::npos;
    bool smaller = verb == "shrink" || clause.find("smaller") != std::string::npos;
    if (std::regex_search(clause, m, by_re))
      a["scale"] = std::stod(m[1]);
    else if (bigger)
      a["scale"] = 1.5;
    else if (smaller)
      a["scale"] = 0.5;
    else
      return std::nullopt;
  }
  return a;
}

}  // namespace

std::string offline_planner::complete(const planner_request& request) {
  json seq = json::array();
  if (request.env) {
    // commas and points followed by a digit belong to coordinates or scales
    static const std::regex split_re(R"(\s*(?:;|\.(?!\d)|,(?!\s*-?\d)|\bthen\b|\band\b)\s*)");
    std::string text = lower(request.instruction);
    for (std::sregex_token_iterator it(text.begin(), text.end(), split_re, -1), end; it != end;
         ++it) {
      std::string clause = *it;
      while (!clause.empty() && std::isspace(static_cast<unsigned char>(clause.front())))
        clause.erase(clause.begin());
      if (clause.empty()) continue;
      if (auto a = match_clause(*request.env, clause)) seq.push_back(std::move(*a));
    }
  }
  return json{{"action_sequence", seq}}.dump(2);
}

// ------------------------------------------------------------ HTTP client

http_planner::http_planner(std::string url, int timeout_seconds) : timeout_(timeout_seconds) {
  static const std::regex url_re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, url_re))
    throw error(errc::invalid_parameter, "planner endpoint must be an http(s) URL: " + url);
  base_ = m[1];
  path_ = m[2].matched ? std::string(m[2]) : "/";
}

std::string http_planner::complete(const planner_request& request) {
  httplib::Client client(base_);
  client.set_connection_timeout(timeout_);
  client.set_read_timeout(timeout_);
  json body = {{"prompt", request.prompt}, {"instruction", request.instruction}};
  auto res = client.Post(path_, body.dump(), "application/json");
  if (!res)
    throw error(errc::planner_unreachable,
                "planner at " + base_ + path_ + ": " + httplib::to_string(res.error()));
  if (res->status != 200)
    throw error(errc::planner_unreachable,
                "planner at " + base_ + path_ + " answered HTTP " + std::to_string(res->status));
  return res->body;
}

std::shared_ptr<planner_client> make_planner(const std::string& endpoint) {
  if (endpoint.empty() || endpoint == "offline") return std::make_shared<offline_planner>();
  return std::make_shared<http_planner>(endpoint);
}

namespace {

// Models like to wrap JSON in prose or code fences; keep the outermost object.
std::string extract_reply(const std::string& reply) {
  auto first = reply.find_first_not_of(" \t\r\n");
  if (first == std::string::npos || reply[first] == '{') return reply;
  auto open = reply.find('{');
  auto close = reply.rfind('}');
  if (open != std::string::npos && close != std::string::npos && close > open &&
      reply.find("action_sequence") != std::string::npos)
    return reply.substr(open, close - open + 1);
  return reply;
}

}  // namespace

std::vector<atomic_action> plan(const std::string& instruction, const environment& env,
                                planner_client& client, const physics_config& cfg) {
  support_graph support = infer_support(env, cfg);
  planner_request request{render_planner_prompt(env, support, instruction), instruction, &env};
  std::string reply = client.complete(request);
  std::vector<atomic_action> actions;
  try {
    actions = parse_script(extract_reply(reply));
  } catch (const error& e) {
    throw error(errc::planner_malformed_reply, std::string("planner reply: ") + e.what());
  }
  if (actions.empty())
    throw error(errc::planner_malformed_reply, "planner proposed no actions for: " + instruction);
  return actions;
}

}  // namespace strata
