#include "strata/metrics.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>

#include "strata/compositor.hpp"
#include "strata/engine.hpp"
#include "strata/error.hpp"

namespace strata {

using nlohmann::json;

// ---------------------------------------------------------------- LPIPS-U

pyramid_extractor::pyramid_extractor(int levels) : levels_(levels) {
  if (levels < 1) throw error(errc::invalid_parameter, "pyramid needs at least one level");
}

namespace {

feature_level blur_and_decimate(const feature_level& in) {
  static constexpr std::array<double, 5> k = {1 / 16.0, 4 / 16.0, 6 / 16.0, 4 / 16.0, 1 / 16.0};
  const int w = in.width, h = in.height, c = in.channels;
  auto clampi = [](int v, int hi) { return std::clamp(v, 0, hi - 1); };

  std::vector<double> tmp(in.values.size());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double s = 0;
        for (int t = -2; t <= 2; ++t)
          s += k[t + 2] * in.values[(static_cast<std::size_t>(y) * w + clampi(x + t, w)) * c + ch];
        tmp[(static_cast<std::size_t>(y) * w + x) * c + ch] = s;
      }

  feature_level out;
  out.width = (w + 1) / 2;
  out.height = (h + 1) / 2;
  out.channels = c;
  out.scale = in.scale * 2;
  out.values.resize(static_cast<std::size_t>(out.width) * out.height * c);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x)
      for (int ch = 0; ch < c; ++ch) {
        double s = 0;
        for (int t = -2; t <= 2; ++t)
          s += k[t + 2] * tmp[(static_cast<std::size_t>(clampi(2 * y + t, h)) * w + 2 * x) * c + ch];
        out.values[(static_cast<std::size_t>(y) * out.width + x) * c + ch] = s;
      }
  return out;
}

}  // namespace

std::vector<feature_level> pyramid_extractor::extract(const raster& image) const {
  std::vector<feature_level> levels;
  feature_level base;
  base.width = image.width();
  base.height = image.height();
  base.channels = 3;
  base.values.reserve(static_cast<std::size_t>(base.width) * base.height * 3);
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      rgba p = image.at(x, y);
      base.values.push_back(p.r / 255.0);
      base.values.push_back(p.g / 255.0);
      base.values.push_back(p.b / 255.0);
    }
  levels.push_back(std::move(base));
  for (int l = 1; l < levels_; ++l) levels.push_back(blur_and_decimate(levels.back()));
  for (auto& l : levels) l.weight = 1.0 / levels_;
  return levels;
}

mask downsample_keep_mask(const mask& keep, int width, int height, int scale) {
  if (scale == 1 && keep.width() == width && keep.height() == height) return keep;
  mask out(width, height);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      int kept = 0, covered = 0;
      for (int yy = y * scale; yy < std::min((y + 1) * scale, keep.height()); ++yy)
        for (int xx = x * scale; xx < std::min((x + 1) * scale, keep.width()); ++xx) {
          ++covered;
          kept += keep.at(xx, yy) ? 1 : 0;
        }
      out.set(x, y, covered > 0 && 2 * kept >= covered);
    }
  return out;
}

namespace {

std::vector<double> level_distances(const raster& original, const raster& edited,
                                    const mask& edit_mask, const feature_extractor& fx,
                                    bool raw_norm, std::vector<double>* weights) {
  if (original.width() != edited.width() || original.height() != edited.height() ||
      edit_mask.width() != original.width() || edit_mask.height() != original.height())
    throw error(errc::size_mismatch, "images and edit mask must share one size");
  auto fa = fx.extract(original);
  auto fb = fx.extract(edited);
  mask keep = edit_mask.complement();

  std::vector<double> out;
  for (std::size_t l = 0; l < fa.size(); ++l) {
    const auto& a = fa[l];
    const auto& b = fb[l];
    mask m = downsample_keep_mask(keep, a.width, a.height, a.scale);
    double sum = 0;
    std::size_t count = 0;
    for (int y = 0; y < a.height; ++y)
      for (int x = 0; x < a.width; ++x) {
        if (!m.at(x, y)) continue;
        for (int ch = 0; ch < a.channels; ++ch) {
          std::size_t i = (static_cast<std::size_t>(y) * a.width + x) * a.channels + ch;
          double d = a.values[i] - b.values[i];
          sum += d * d;
          ++count;
        }
      }
    double norm = std::sqrt(sum);
    if (!raw_norm) norm = count ? norm / std::sqrt(static_cast<double>(count)) : 0.0;
    out.push_back(norm);
    if (weights) weights->push_back(a.weight);
  }
  return out;
}

}  // namespace

std::vector<double> lpips_u_levels(const raster& original, const raster& edited,
                                   const mask& edit_mask, const feature_extractor& fx,
                                   bool raw_norm) {
  return level_distances(original, edited, edit_mask, fx, raw_norm, nullptr);
}

double lpips_u(const raster& original, const raster& edited, const mask& edit_mask,
               const feature_extractor& fx, bool raw_norm) {
  std::vector<double> weights;
  auto levels = level_distances(original, edited, edit_mask, fx, raw_norm, &weights);
  double total = 0;
  for (std::size_t l = 0; l < levels.size(); ++l) total += weights[l] * levels[l];
  return total;
}

double lpips_u(const raster& original, const raster& edited, const mask& edit_mask,
               bool raw_norm) {
  return lpips_u(original, edited, edit_mask, pyramid_extractor{}, raw_norm);
}

// ------------------------------------------------------------- SA and CSR

namespace {

constraint_op op_from(const std::string& s) {
  std::string t;
  for (char c : s) t += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (t == "remove") return constraint_op::remove;
  if (t == "move") return constraint_op::move;
  if (t == "insert") return constraint_op::insert;
  if (t == "edit") return constraint_op::edit;
  throw error(errc::invalid_parameter, "unknown constraint operation '" + s + "'");
}

const char* op_name(constraint_op op) {
  switch (op) {
    case constraint_op::remove: return "Remove";
    case constraint_op::move: return "Move";
    case constraint_op::insert: return "Insert";
    case constraint_op::edit: return "Edit";
  }
  return "?";
}

relation_kind relation_from(const std::string& s) {
  if (s == "left_of") return relation_kind::left_of;
  if (s == "right_of") return relation_kind::right_of;
  if (s == "above") return relation_kind::above;
  if (s == "below") return relation_kind::below;
  if (s == "center") return relation_kind::center;
  throw error(errc::invalid_parameter, "unknown relation '" + s + "'");
}

const char* relation_name(relation_kind k) {
  switch (k) {
    case relation_kind::left_of: return "left_of";
    case relation_kind::right_of: return "right_of";
    case relation_kind::above: return "above";
    case relation_kind::below: return "below";
    case relation_kind::center: return "center";
  }
  return "?";
}

const detection* best_match(const std::vector<detection>& dets, const std::string& label) {
  const detection* best = nullptr;
  for (const auto& d : dets)
    if (d.label == label && (!best || d.confidence > best->confidence)) best = &d;
  return best;
}

}  // namespace

constraint_spec parse_constraint(const json& j) {
  try {
    constraint_spec c;
    c.target = j.at("target").get<std::string>();
    c.operation = op_from(j.at("operation").get<std::string>());
    if (j.contains("relation") && !j["relation"].is_null()) {
      const json& r = j["relation"];
      spatial_relation rel;
      rel.kind = relation_from(r.at("kind").get<std::string>());
      if (rel.kind != relation_kind::center) rel.reference = r.at("reference").get<std::string>();
      c.relation = rel;
    }
    bool needs = c.operation == constraint_op::move || c.operation == constraint_op::insert;
    if (needs != c.relation.has_value())
      throw error(errc::invalid_parameter,
                  std::string(op_name(c.operation)) + " constraint on '" + c.target + "' " +
                      (needs ? "needs a relation" : "takes no relation"));
    return c;
  } catch (const json::exception& e) {
    throw error(errc::invalid_parameter, std::string("malformed constraint: ") + e.what());
  }
}

std::vector<constraint_spec> parse_constraints(const json& j) {
  const json& list = j.is_object() && j.contains("constraints") ? j["constraints"] : j;
  if (!list.is_array()) throw error(errc::invalid_parameter, "constraints must be an array");
  std::vector<constraint_spec> out;
  for (const auto& c : list) out.push_back(parse_constraint(c));
  return out;
}

json to_json(const constraint_spec& c) {
  json j = {{"target", c.target}, {"operation", op_name(c.operation)}};
  if (c.relation) {
    j["relation"] = {{"kind", relation_name(c.relation->kind)}};
    if (c.relation->kind != relation_kind::center) j["relation"]["reference"] = c.relation->reference;
  }
  return j;
}

std::vector<detection> ground_truth_detections(const environment& env) {
  std::vector<detection> out;
  for (const auto& l : env.layers) {
    if (!l.visible) continue;
    rect b = intersect(l.placed_amodal().tight_bounds(), env.canvas_rect());
    if (b.empty()) continue;
    out.push_back({l.id, b, 1.0});
  }
  return out;
}

std::vector<detection> parse_detections(const json& j) {
  const json& list = j.is_object() && j.contains("detections") ? j["detections"] : j;
  if (!list.is_array()) throw error(errc::invalid_parameter, "detections must be an array");
  std::vector<detection> out;
  try {
    for (const auto& d : list) {
      detection det;
      det.label = d.at("label").get<std::string>();
      auto b = d.at("bbox").get<std::vector<int>>();
      if (b.size() != 4) throw error(errc::invalid_parameter, "bbox needs 4 numbers");
      det.bbox = {b[0], b[1], b[2], b[3]};
      det.confidence = d.value("confidence", 1.0);
      if (det.confidence < 0 || det.confidence > 1)
        throw error(errc::invalid_parameter, "confidence must lie in [0,1]");
      out.push_back(det);
    }
  } catch (const json::exception& e) {
    throw error(errc::invalid_parameter, std::string("malformed detection: ") + e.what());
  }
  return out;
}

json to_json(const detection& d) {
  return {{"label", d.label},
          {"bbox", {d.bbox.x0, d.bbox.y0, d.bbox.x1, d.bbox.y1}},
          {"confidence", d.confidence}};
}

double grade_constraint(const constraint_spec& c, const std::vector<detection>& before,
                        const std::vector<detection>& after, int canvas_width,
                        int canvas_height) {
  const detection* now = best_match(after, c.target);
  switch (c.operation) {
    case constraint_op::remove: {
      if (!now) return 1.0;
      const detection* was = best_match(before, c.target);
      if (was && now->confidence < 0.5 * was->confidence) return 0.5;
      return 0.0;
    }
    case constraint_op::edit:
      return now ? 1.0 : 0.0;
    case constraint_op::move:
    case constraint_op::insert: {
      if (!now) return 0.0;
      double cx = now->bbox.center_x() / canvas_width;
      double cy = now->bbox.center_y() / canvas_height;
      const spatial_relation& rel = *c.relation;
      bool holds = false;
      if (rel.kind == relation_kind::center) {
        holds = cx >= 1.0 / 3 && cx <= 2.0 / 3 && cy >= 1.0 / 3 && cy <= 2.0 / 3;
      } else if (const detection* ref = best_match(after, rel.reference)) {
        double rx = ref->bbox.center_x() / canvas_width;
        double ry = ref->bbox.center_y() / canvas_height;
        switch (rel.kind) {
          case relation_kind::left_of: holds = cx < rx; break;
          case relation_kind::right_of: holds = cx > rx; break;
          case relation_kind::above: holds = cy < ry; break;
          case relation_kind::below: holds = cy > ry; break;
          case relation_kind::center: break;
        }
      }
      return holds ? 1.0 : 0.5;
    }
  }
  return 0.0;
}

std::vector<double> grade_constraints(const std::vector<constraint_spec>& constraints,
                                      const std::vector<detection>& before,
                                      const std::vector<detection>& after, int canvas_width,
                                      int canvas_height) {
  std::vector<double> out;
  for (const auto& c : constraints)
    out.push_back(grade_constraint(c, before, after, canvas_width, canvas_height));
  return out;
}

double spatial_accuracy(const std::vector<double>& grades) {
  if (grades.empty()) throw error(errc::empty_constraint_set, "SA is undefined without constraints");
  double sum = 0;
  for (double a : grades) sum += a;
  return sum / static_cast<double>(grades.size());
}

double constraint_satisfaction_rate(const std::vector<double>& grades, double tau) {
  if (grades.empty())
    throw error(errc::empty_constraint_set, "CSR is undefined without constraints");
  if (!(tau >= 0 && tau <= 1)) throw error(errc::invalid_parameter, "tau must lie in [0,1]");
  std::size_t hits = 0;
  for (double a : grades) hits += a >= tau ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(grades.size());
}

// ------------------------------------------------------------ PC, IC, MS

int penalty(severity s) {
  switch (s) {
    case severity::minor: return 1;
    case severity::moderate: return 2;
    case severity::severe: return 3;
  }
  return 0;
}

severity severity_from(const std::string& text) {
  if (text == "minor") return severity::minor;
  if (text == "moderate") return severity::moderate;
  if (text == "severe") return severity::severe;
  throw error(errc::invalid_parameter, "unknown severity '" + text + "'");
}

namespace {

std::vector<judged_issue> parse_issues(const json& j, const char* key) {
  std::vector<judged_issue> out;
  if (!j.contains(key)) return out;
  for (const auto& item : j[key]) {
    judged_issue issue;
    if (item.is_number()) {
      issue.penalty = item.get<double>();
    } else {
      issue.description = item.value("description", "");
      if (item.contains("severity"))
        issue.penalty = penalty(severity_from(item["severity"].get<std::string>()));
      else
        issue.penalty = item.at("penalty").get<double>();
    }
    if (!(issue.penalty >= 0))
      throw error(errc::invalid_parameter, std::string(key) + " penalties must be >= 0");
    out.push_back(issue);
  }
  return out;
}

std::vector<double> parse_unit_scores(const json& j, const char* key) {
  std::vector<double> out;
  if (!j.contains(key)) return out;
  for (const auto& v : j[key]) {
    double s = v.is_object() ? v.at("score").get<double>() : v.get<double>();
    if (!(s >= 0 && s <= 1)) throw error(errc::invalid_parameter, std::string(key) + " must lie in [0,1]");
    out.push_back(s);
  }
  return out;
}

double sum_penalties(const std::vector<judged_issue>& issues) {
  double s = 0;
  for (const auto& i : issues) s += i.penalty;
  return s;
}

// 10 * mean, scaled before dividing so 10 * 2 / 3 lands on 20.0 / 3
double ten_times_mean(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return 10.0 * s / static_cast<double>(v.size());
}

}  // namespace

judge_findings parse_findings(const json& j) {
  try {
    judge_findings f;
    f.physical_issues = parse_issues(j, "physical_issues");
    f.unwanted_changes = parse_issues(j, "unwanted_changes");
    f.preservation_damage = parse_issues(j, "preservation_damage");
    f.fulfillments = parse_unit_scores(j, "fulfillments");
    f.step_successes = parse_unit_scores(j, "step_successes");
    return f;
  } catch (const json::exception& e) {
    throw error(errc::invalid_parameter, std::string("malformed judge findings: ") + e.what());
  }
}

double pc_score(const judge_findings& f) {
  return std::clamp(10.0 - sum_penalties(f.physical_issues), 1.0, 10.0);
}

double ic_score(const judge_findings& f) {
  if (f.fulfillments.empty())
    throw error(errc::empty_request_set, "IC is undefined without requested edits");
  double raw = ten_times_mean(f.fulfillments) - sum_penalties(f.unwanted_changes) -
               sum_penalties(f.preservation_damage);
  return std::clamp(raw, 1.0, 10.0);
}

double ms_score(const judge_findings& f) {
  if (f.step_successes.empty())
    throw error(errc::empty_request_set, "MS is undefined without steps");
  return ten_times_mean(f.step_successes);
}

// ------------------------------------------------------------------ drift

namespace {

double saturation(double r, double g, double b) {
  double hi = std::max({r, g, b}), lo = std::min({r, g, b});
  return hi > 0 ? (hi - lo) / hi : 0.0;
}

}  // namespace

double mean_abs_difference(const raster& a, const raster& b, const mask& region) {
  if (a.width() != b.width() || a.height() != b.height() || region.width() != a.width() ||
      region.height() != a.height())
    throw error(errc::size_mismatch, "rasters and region must share one size");
  double sum = 0;
  std::size_t n = 0;
  for (int y = 0; y < a.height(); ++y)
    for (int x = 0; x < a.width(); ++x) {
      if (!region.at(x, y)) continue;
      rgba p = a.at(x, y), q = b.at(x, y);
      sum += std::abs(p.r - q.r) + std::abs(p.g - q.g) + std::abs(p.b - q.b);
      n += 3;
    }
  return n ? sum / (255.0 * static_cast<double>(n)) : 0.0;
}

double mean_saturation(const raster& image, const mask& region) {
  double sum = 0;
  std::size_t n = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (!region.at(x, y)) continue;
      rgba p = image.at(x, y);
      sum += saturation(p.r, p.g, p.b);
      ++n;
    }
  return n ? sum / static_cast<double>(n) : 0.0;
}

mask drift_region(const session& s, const std::vector<std::string>& target_ids) {
  std::set<std::string> ids(target_ids.begin(), target_ids.end());
  for (const auto& id : touched_layers(s.log())) ids.insert(id);
  mask edited(s.state().canvas_width, s.state().canvas_height);
  for (int r = 0; r <= s.round(); ++r) {
    environment env = s.state_at_round(r);
    std::set<std::string> present;
    for (const auto& id : ids)
      if (env.find(id)) present.insert(id);
    mask m = composite_mask(env, present);
    for (int y = 0; y < m.height(); ++y)
      for (int x = 0; x < m.width(); ++x)
        if (m.at(x, y)) edited.set(x, y, true);
  }
  return edited.complement();
}

std::vector<drift_point> drift_series(const session& s, const std::vector<std::string>& target_ids) {
  mask region = drift_region(s, target_ids);
  raster first = composite(s.state_at_round(0));
  std::vector<drift_point> out;
  for (int r = 1; r <= s.round(); ++r) {
    raster frame = composite(s.state_at_round(r));
    out.push_back({r, mean_abs_difference(frame, first, region), mean_saturation(frame, region)});
  }
  return out;
}

std::vector<drift_point> noise_baseline_series(const raster& frame, const mask& region,
                                               int rounds, double sigma, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> noise(0.0, sigma);
  const int w = frame.width(), h = frame.height();
  std::vector<double> orig, cur;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      rgba p = frame.at(x, y);
      for (double v : {p.r / 255.0, p.g / 255.0, p.b / 255.0}) orig.push_back(v);
    }
  cur = orig;
  std::vector<drift_point> out;
  for (int r = 1; r <= rounds; ++r) {
    for (double& v : cur) v = std::clamp(v + noise(rng), 0.0, 1.0);
    double diff = 0, sat = 0;
    std::size_t n = 0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!region.at(x, y)) continue;
        std::size_t i = (static_cast<std::size_t>(y) * w + x) * 3;
        for (int c = 0; c < 3; ++c) diff += std::abs(cur[i + c] - orig[i + c]);
        sat += saturation(cur[i], cur[i + 1], cur[i + 2]);
        ++n;
      }
    out.push_back({r, n ? diff / (3.0 * n) : 0.0, n ? sat / n : 0.0});
  }
  return out;
}

json to_json(const std::vector<drift_point>& series) {
  json rounds = json::array(), pix = json::array(), sat = json::array();
  for (const auto& p : series) {
    rounds.push_back(p.round);
    pix.push_back(p.pixdiff);
    sat.push_back(p.mean_saturation);
  }
  return {{"rounds", rounds}, {"pixdiff", pix}, {"mean_saturation", sat}};
}

}  // namespace strata
