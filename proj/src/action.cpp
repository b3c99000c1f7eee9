#include "strata/action.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include "strata/error.hpp"

namespace strata {

using nlohmann::json;

namespace {

std::string upper(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

enum class verb { remove, move, keep, fall, resize, retouch, edit, insert };

std::optional<verb> verb_from(std::string_view text) {
  std::string v = upper(text);
  if (v == "REMOVE") return verb::remove;
  if (v == "MOVE") return verb::move;
  if (v == "KEEP") return verb::keep;
  if (v == "FALL") return verb::fall;
  if (v == "RESIZE") return verb::resize;
  if (v == "RETOUCH") return verb::retouch;
  if (v == "EDIT") return verb::edit;
  if (v == "INSERT") return verb::insert;
  return std::nullopt;
}

// Location attached to errors raised while checking one action.
struct where {
  std::optional<std::size_t> line;
  std::size_t offset = 0;
  std::string context;
};

[[noreturn]] void fail(errc code, const std::string& message, const where& at) {
  std::string text = at.context.empty() ? message : at.context + ": " + message;
  if (at.line) throw error(code, text, *at.line, at.offset);
  throw error(code, text);
}

void check_ranges(const atomic_action& a, const where& at) {
  auto finite = [&](double v, const char* name) {
    if (!std::isfinite(v)) fail(errc::invalid_parameter, std::string(name) + " must be finite", at);
  };
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<T, move_action>) {
          finite(p.x, "x");
          finite(p.y, "y");
        } else if constexpr (std::is_same_v<T, fall_action>) {
          finite(p.delta_y, "delta_y");
          if (p.delta_y < 0) fail(errc::invalid_parameter, "delta_y must be >= 0", at);
        } else if constexpr (std::is_same_v<T, resize_action>) {
          finite(p.scale, "scale");
          if (!(p.scale > 0)) fail(errc::invalid_parameter, "scale must be > 0", at);
        } else if constexpr (std::is_same_v<T, retouch_action>) {
          for (double f : {p.factors.brightness, p.factors.contrast, p.factors.color,
                           p.factors.sharpness}) {
            finite(f, "retouch factor");
            if (f < 0) fail(errc::invalid_parameter, "retouch factors must be >= 0", at);
          }
        } else if constexpr (std::is_same_v<T, insert_action>) {
          finite(p.x, "x");
          finite(p.y, "y");
          finite(p.width, "width");
          finite(p.height, "height");
          if (!(p.width > 0) || !(p.height > 0))
            fail(errc::invalid_parameter, "width and height must be > 0", at);
        }
      },
      a.params);
}

std::string number_text(double v) { return json(v).dump(); }

}  // namespace

layer_relation layer_relation::parse(std::string_view text) {
  layer_relation r;
  auto target_after = [&](std::string_view prefix) -> std::optional<std::string> {
    if (text.size() > prefix.size() && text.substr(0, prefix.size()) == prefix)
      return std::string(text.substr(prefix.size()));
    return std::nullopt;
  };
  if (text == "frontmost") {
    r.where = kind::frontmost;
  } else if (text == "backmost") {
    r.where = kind::backmost;
  } else if (auto t = target_after("front_of:")) {
    r.where = kind::front_of;
    r.target = *t;
  } else if (auto b = target_after("behind:")) {
    r.where = kind::behind;
    r.target = *b;
  } else {
    throw error(errc::parse_error,
                "layer_relation must be frontmost, backmost, front_of:<id> or behind:<id>, got '" +
                    std::string(text) + "'");
  }
  return r;
}

std::string layer_relation::str() const {
  switch (where) {
    case kind::frontmost: return "frontmost";
    case kind::backmost: return "backmost";
    case kind::front_of: return "front_of:" + target;
    case kind::behind: return "behind:" + target;
  }
  return "frontmost";
}

std::string_view verb_name(const atomic_action& a) {
  static constexpr std::string_view names[] = {"REMOVE", "MOVE", "KEEP", "FALL",
                                               "RESIZE", "RETOUCH", "EDIT", "INSERT"};
  return names[a.params.index()];
}

std::optional<std::string> target_id(const atomic_action& a) {
  return std::visit(
      [](const auto& p) -> std::optional<std::string> {
        if constexpr (std::is_same_v<std::decay_t<decltype(p)>, insert_action>)
          return std::nullopt;
        else
          return p.object_id;
      },
      a.params);
}

bool operator==(const atomic_action& a, const atomic_action& b) {
  return to_json(a) == to_json(b);
}

// ---------------------------------------------------------------- JSON form

namespace {

const json* field(const json& rec, const char* key) {
  auto it = rec.find(key);
  return it == rec.end() ? nullptr : &*it;
}

std::string required_string(const json& rec, const char* key, const where& at) {
  const json* v = field(rec, key);
  if (!v) fail(errc::arity_mismatch, std::string("missing '") + key + "'", at);
  if (!v->is_string()) fail(errc::parse_error, std::string("'") + key + "' must be a string", at);
  return v->get<std::string>();
}

double required_number(const json& rec, const char* key, const where& at) {
  const json* v = field(rec, key);
  if (!v) fail(errc::arity_mismatch, std::string("missing '") + key + "'", at);
  if (!v->is_number())
    fail(errc::non_numeric_param, std::string("'") + key + "' must be numeric", at);
  return v->get<double>();
}

double optional_number(const json& rec, const char* key, double fallback, const where& at) {
  return field(rec, key) ? required_number(rec, key, at) : fallback;
}

atomic_action parse_record(const json& rec, const where& at) {
  if (!rec.is_object()) fail(errc::parse_error, "action record must be an object", at);
  std::string name = required_string(rec, "action", at);
  auto v = verb_from(name);
  if (!v) fail(errc::unknown_verb, "unknown action '" + name + "'", at);

  atomic_action a;
  std::vector<std::string> known = {"action"};
  auto id = [&] {
    known.push_back("object_id");
    return required_string(rec, "object_id", at);
  };
  auto num = [&](const char* key) {
    known.push_back(key);
    return required_number(rec, key, at);
  };
  switch (*v) {
    case verb::remove: a.params = remove_action{id()}; break;
    case verb::keep: a.params = keep_action{id()}; break;
    case verb::move: {
      move_action m{id()};
      m.x = num("x");
      m.y = num("y");
      a.params = m;
      break;
    }
    case verb::fall: {
      fall_action f{id()};
      f.delta_y = num("delta_y");
      a.params = f;
      break;
    }
    case verb::resize: {
      resize_action r{id()};
      r.scale = num("scale");
      a.params = r;
      break;
    }
    case verb::retouch: {
      retouch_action r;
      r.object_id = id();
      for (const char* k : {"brightness", "contrast", "color", "sharpness"}) known.push_back(k);
      r.factors.brightness = optional_number(rec, "brightness", 1.0, at);
      r.factors.contrast = optional_number(rec, "contrast", 1.0, at);
      r.factors.color = optional_number(rec, "color", 1.0, at);
      r.factors.sharpness = optional_number(rec, "sharpness", 1.0, at);
      a.params = r;
      break;
    }
    case verb::edit: {
      edit_action e;
      e.object_id = id();
      known.insert(known.end(), {"prompt", "edit_type"});
      e.prompt = required_string(rec, "prompt", at);
      e.edit_type = required_string(rec, "edit_type", at);
      a.params = e;
      break;
    }
    case verb::insert: {
      insert_action ins;
      known.push_back("prompt");
      ins.prompt = required_string(rec, "prompt", at);
      ins.x = num("x");
      ins.y = num("y");
      ins.width = num("width");
      ins.height = num("height");
      known.push_back("layer_relation");
      if (const json* rel = field(rec, "layer_relation")) {
        if (!rel->is_string()) fail(errc::parse_error, "'layer_relation' must be a string", at);
        try {
          ins.relation = layer_relation::parse(rel->get<std::string>());
        } catch (const error& e) {
          fail(errc::parse_error, e.what(), at);
        }
      }
      a.params = ins;
      break;
    }
  }
  for (const auto& [key, value] : rec.items())
    if (std::find(known.begin(), known.end(), key) == known.end()) a.metadata[key] = value;
  check_ranges(a, at);
  return a;
}

}  // namespace

atomic_action parse_action_record(const json& record) {
  return parse_record(record, {});
}

std::vector<atomic_action> parse_action_json(const json& doc) {
  if (!doc.is_object()) throw error(errc::parse_error, "expected an object with 'action_sequence'");
  auto it = doc.find("action_sequence");
  if (it == doc.end()) throw error(errc::parse_error, "missing 'action_sequence'");
  if (!it->is_array()) throw error(errc::parse_error, "'action_sequence' must be an array");
  std::vector<atomic_action> out;
  for (std::size_t i = 0; i < it->size(); ++i)
    out.push_back(parse_record((*it)[i], {std::nullopt, 0, "action_sequence[" + std::to_string(i) + "]"}));
  return out;
}

json to_json(const atomic_action& a) {
  json rec = a.metadata.is_object() ? a.metadata : json::object();
  rec["action"] = std::string(verb_name(a));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (!std::is_same_v<T, insert_action>) rec["object_id"] = p.object_id;
        if constexpr (std::is_same_v<T, move_action>) {
          rec["x"] = p.x;
          rec["y"] = p.y;
        } else if constexpr (std::is_same_v<T, fall_action>) {
          rec["delta_y"] = p.delta_y;
        } else if constexpr (std::is_same_v<T, resize_action>) {
          rec["scale"] = p.scale;
        } else if constexpr (std::is_same_v<T, retouch_action>) {
          rec["brightness"] = p.factors.brightness;
          rec["contrast"] = p.factors.contrast;
          rec["color"] = p.factors.color;
          rec["sharpness"] = p.factors.sharpness;
        } else if constexpr (std::is_same_v<T, edit_action>) {
          rec["prompt"] = p.prompt;
          rec["edit_type"] = p.edit_type;
        } else if constexpr (std::is_same_v<T, insert_action>) {
          rec["prompt"] = p.prompt;
          rec["x"] = p.x;
          rec["y"] = p.y;
          rec["width"] = p.width;
          rec["height"] = p.height;
          rec["layer_relation"] = p.relation.str();
        }
      },
      a.params);
  return rec;
}

json serialize_actions(const std::vector<atomic_action>& actions) {
  json seq = json::array();
  for (const auto& a : actions) seq.push_back(to_json(a));
  return {{"action_sequence", std::move(seq)}};
}

// ----------------------------------------------------------------- DSL form

namespace {

struct token {
  std::string text;
  bool quoted = false;
  std::size_t column = 0;
};

std::vector<token> tokenize(std::string_view line, std::size_t line_no) {
  std::vector<token> out;
  std::size_t i = 0;
  while (i < line.size()) {
    if (std::isspace(static_cast<unsigned char>(line[i]))) {
      ++i;
      continue;
    }
    if (line[i] == '#') break;
    token t;
    t.column = i;
    if (line[i] == '"') {
      t.quoted = true;
      ++i;
      bool closed = false;
      while (i < line.size()) {
        char c = line[i++];
        if (c == '"') {
          closed = true;
          break;
        }
        if (c == '\\' && i < line.size()) c = line[i++];
        t.text += c;
      }
      if (!closed) throw error(errc::parse_error, "unterminated string", line_no, t.column);
    } else {
      while (i < line.size() && !std::isspace(static_cast<unsigned char>(line[i])))
        t.text += line[i++];
    }
    out.push_back(std::move(t));
  }
  return out;
}

double parse_number(const token& t, std::size_t line_no) {
  double v = 0;
  const char* begin = t.text.data();
  const char* end = begin + t.text.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (t.quoted || ec != std::errc() || ptr != end || t.text.empty())
    throw error(errc::non_numeric_param, "expected a number, got '" + t.text + "'", line_no,
                t.column);
  return v;
}

atomic_action parse_line(const std::vector<token>& toks, std::size_t line_no) {
  const token& head = toks.front();
  auto v = verb_from(head.text);
  if (!v || head.quoted)
    throw error(errc::unknown_verb, "unknown verb '" + head.text + "'", line_no, head.column);

  auto expect = [&](std::size_t args, const char* usage) {
    if (toks.size() != args + 1)
      throw error(errc::arity_mismatch,
                  upper(head.text) + " takes " + std::to_string(args) + " argument(s): " + usage,
                  line_no, toks.size() > args + 1 ? toks[args + 1].column : head.column);
  };
  auto num = [&](std::size_t k) { return parse_number(toks[k], line_no); };

  atomic_action a;
  switch (*v) {
    case verb::remove:
      expect(1, "REMOVE id");
      a.params = remove_action{toks[1].text};
      break;
    case verb::keep:
      expect(1, "KEEP id");
      a.params = keep_action{toks[1].text};
      break;
    case verb::move:
      expect(3, "MOVE id x y");
      a.params = move_action{toks[1].text, num(2), num(3)};
      break;
    case verb::fall:
      expect(2, "FALL id delta_y");
      a.params = fall_action{toks[1].text, num(2)};
      break;
    case verb::resize:
      expect(2, "RESIZE id scale");
      a.params = resize_action{toks[1].text, num(2)};
      break;
    case verb::retouch:
      expect(5, "RETOUCH id brightness contrast color sharpness");
      a.params = retouch_action{toks[1].text, {num(2), num(3), num(4), num(5)}};
      break;
    case verb::edit:
      expect(3, "EDIT id \"prompt\" edit_type");
      a.params = edit_action{toks[1].text, toks[2].text, toks[3].text};
      break;
    case verb::insert: {
      expect(6, "INSERT \"prompt\" x y width height relation");
      insert_action ins{toks[1].text, num(2), num(3), num(4), num(5), {}};
      try {
        ins.relation = layer_relation::parse(toks[6].text);
      } catch (const error& e) {
        throw error(errc::parse_error, e.what(), line_no, toks[6].column);
      }
      a.params = ins;
      break;
    }
  }
  check_ranges(a, {line_no, toks.size() > 1 ? toks[1].column : head.column, {}});
  return a;
}

std::vector<atomic_action> parse_dsl(std::string_view input) {
  std::vector<atomic_action> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= input.size()) {
    std::size_t nl = input.find('\n', pos);
    std::string_view line = input.substr(pos, nl == std::string_view::npos ? input.npos : nl - pos);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    auto toks = tokenize(line, line_no);
    if (!toks.empty()) out.push_back(parse_line(toks, line_no));
    if (nl == std::string_view::npos) break;
    pos = nl + 1;
  }
  return out;
}

}  // namespace

std::vector<atomic_action> parse_script(std::string_view input) {
  auto first = std::find_if(input.begin(), input.end(),
                            [](char c) { return !std::isspace(static_cast<unsigned char>(c)); });
  if (first == input.end() || *first != '{') return parse_dsl(input);

  json doc;
  try {
    doc = json::parse(input);
  } catch (const json::parse_error& e) {
    std::size_t byte = e.byte == 0 ? 0 : e.byte - 1;
    byte = std::min(byte, input.size());
    std::size_t line = 1 + static_cast<std::size_t>(
                               std::count(input.begin(), input.begin() + static_cast<long>(byte), '\n'));
    std::size_t line_start = input.rfind('\n', byte == 0 ? 0 : byte - 1);
    std::size_t offset = line_start == std::string_view::npos || line == 1 ? byte : byte - line_start - 1;
    throw error(errc::parse_error, std::string("invalid JSON: ") + e.what(), line, offset);
  }
  return parse_action_json(doc);
}

std::string to_dsl(const atomic_action& a) {
  auto quote = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"' || c == '\\') out += '\\';
      out += c;
    }
    return out + "\"";
  };
  std::string out(verb_name(a));
  std::visit(
      [&](const auto& p) {
        using T = std::decay_t<decltype(p)>;
        if constexpr (!std::is_same_v<T, insert_action>) out += " " + p.object_id;
        if constexpr (std::is_same_v<T, move_action>) {
          out += " " + number_text(p.x) + " " + number_text(p.y);
        } else if constexpr (std::is_same_v<T, fall_action>) {
          out += " " + number_text(p.delta_y);
        } else if constexpr (std::is_same_v<T, resize_action>) {
          out += " " + number_text(p.scale);
        } else if constexpr (std::is_same_v<T, retouch_action>) {
          out += " " + number_text(p.factors.brightness) + " " + number_text(p.factors.contrast) +
                 " " + number_text(p.factors.color) + " " + number_text(p.factors.sharpness);
        } else if constexpr (std::is_same_v<T, edit_action>) {
          out += " " + quote(p.prompt) + " " + p.edit_type;
        } else if constexpr (std::is_same_v<T, insert_action>) {
          out += " " + quote(p.prompt) + " " + number_text(p.x) + " " + number_text(p.y) + " " +
                 number_text(p.width) + " " + number_text(p.height) + " " + p.relation.str();
        }
      },
      a.params);
  return out;
}

}  // namespace strata
