#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "strata/image.hpp"
#include "strata/scene.hpp"

namespace strata {

class session;

// ---------------------------------------------------------------- LPIPS-U

struct feature_level {
  int width = 0;
  int height = 0;
  int channels = 0;
  int scale = 1;       // canvas pixels per feature cell along each axis
  double weight = 0;   // weights of all levels sum to 1
  std::vector<double> values;  // row-major, channels interleaved
};

class feature_extractor {
 public:
  virtual ~feature_extractor() = default;
  virtual std::vector<feature_level> extract(const raster& image) const = 0;
};

// Gaussian pyramid on RGB in [0,1]: full, 1/2, 1/4 ... resolution with a
// 5-tap binomial blur before each decimation. Equal level weights.
class pyramid_extractor : public feature_extractor {
 public:
  explicit pyramid_extractor(int levels = 3);
  std::vector<feature_level> extract(const raster& image) const override;

 private:
  int levels_;
};

// The unedited mask at a level: a cell is kept when at least half of the
// canvas pixels it covers are unedited.
mask downsample_keep_mask(const mask& keep, int width, int height, int scale);

// Per-level masked L2 distance, unweighted. Divided by sqrt(unmasked element
// count) unless raw_norm.
std::vector<double> lpips_u_levels(const raster& original, const raster& edited,
                                   const mask& edit_mask, const feature_extractor& fx,
                                   bool raw_norm = false);

double lpips_u(const raster& original, const raster& edited, const mask& edit_mask,
               const feature_extractor& fx, bool raw_norm = false);
double lpips_u(const raster& original, const raster& edited, const mask& edit_mask,
               bool raw_norm = false);

// ------------------------------------------------------------- SA and CSR

enum class constraint_op { remove, move, insert, edit };
enum class relation_kind { left_of, right_of, above, below, center };

struct spatial_relation {
  relation_kind kind = relation_kind::center;
  std::string reference;  // unused for center
};

struct constraint_spec {
  std::string target;
  constraint_op operation = constraint_op::remove;
  std::optional<spatial_relation> relation;
};

// Throws invalid_parameter when the relation is missing for Move/Insert or
// present for Remove/Edit.
constraint_spec parse_constraint(const nlohmann::json& j);
std::vector<constraint_spec> parse_constraints(const nlohmann::json& j);
nlohmann::json to_json(const constraint_spec& c);

struct detection {
  std::string label;
  rect bbox;
  double confidence = 1;
};

// One exact detection per visible layer with an on-canvas box, labelled by
// layer id.
std::vector<detection> ground_truth_detections(const environment& env);
std::vector<detection> parse_detections(const nlohmann::json& j);
nlohmann::json to_json(const detection& d);

// a in {0, 0.5, 1}.
double grade_constraint(const constraint_spec& c, const std::vector<detection>& before,
                        const std::vector<detection>& after, int canvas_width,
                        int canvas_height);

std::vector<double> grade_constraints(const std::vector<constraint_spec>& constraints,
                                      const std::vector<detection>& before,
                                      const std::vector<detection>& after, int canvas_width,
                                      int canvas_height);

constexpr double default_tau = 0.7;

// Both throw empty_constraint_set.
double spatial_accuracy(const std::vector<double>& grades);
double constraint_satisfaction_rate(const std::vector<double>& grades, double tau = default_tau);

// ------------------------------------------------------------ PC, IC, MS

enum class severity { minor, moderate, severe };
int penalty(severity s);
severity severity_from(const std::string& text);  // throws invalid_parameter

struct judged_issue {
  std::string description;
  double penalty = 0;
};

struct judge_findings {
  std::vector<judged_issue> physical_issues;
  std::vector<double> fulfillments;
  std::vector<judged_issue> unwanted_changes;
  std::vector<judged_issue> preservation_damage;
  std::vector<double> step_successes;
};

// Issues are {description, severity} objects or bare penalties.
judge_findings parse_findings(const nlohmann::json& j);

double pc_score(const judge_findings& f);
double ic_score(const judge_findings& f);  // throws empty_request_set
double ms_score(const judge_findings& f);  // throws empty_request_set

// ------------------------------------------------------------------ drift

struct drift_point {
  int round = 0;
  double pixdiff = 0;
  double mean_saturation = 0;
};

double mean_abs_difference(const raster& a, const raster& b, const mask& region);
double mean_saturation(const raster& image, const mask& region);

// Rounds 1..R. The region excluded from measurement is the union, over all
// rounds, of the masks of target_ids and every layer the log touched.
std::vector<drift_point> drift_series(const session& s, const std::vector<std::string>& target_ids);
mask drift_region(const session& s, const std::vector<std::string>& target_ids);

// What an editor that regenerates the whole frame each round does: Gaussian
// noise with standard deviation sigma (in [0,1] units) accumulates on every
// pixel. Rounds 1..rounds.
std::vector<drift_point> noise_baseline_series(const raster& frame, const mask& region,
                                               int rounds, double sigma = 0.01,
                                               std::uint64_t seed = 0);

nlohmann::json to_json(const std::vector<drift_point>& series);

}  // namespace strata
