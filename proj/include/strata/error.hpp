#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace strata {

// Stable error codes. The string form (see to_string) is part of the CLI and
// HTTP error payloads, so never rename an existing entry.
enum class errc {
  // scene bundle
  missing_asset,
  malformed_manifest,
  duplicate_layer_id,
  mask_out_of_bounds,
  version_unsupported,
  io_failure,
  // ordering
  hard_constraint_cycle,
  // physics
  no_landing_surface,
  // actions
  parse_error,
  unknown_verb,
  arity_mismatch,
  non_numeric_param,
  invalid_parameter,
  nothing_to_undo,
  synthesizer_unavailable,
  planner_unreachable,
  planner_malformed_reply,
  // rendering / metrics
  invalid_stacking,
  unknown_layer,
  size_mismatch,
  empty_constraint_set,
  empty_request_set,
  // service
  session_not_found,
  round_out_of_range,
  bundle_invalid,
};

std::string_view to_string(errc code) noexcept;

class error : public std::runtime_error {
 public:
  error(errc code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  // Parse errors carry a 1-based line and a 0-based byte offset within it.
  error(errc code, const std::string& message, std::size_t line,
        std::size_t offset)
      : std::runtime_error(message),
        code_(code),
        line_(line),
        offset_(offset) {}

  errc code() const noexcept { return code_; }
  std::optional<std::size_t> line() const noexcept { return line_; }
  std::optional<std::size_t> offset() const noexcept { return offset_; }

 private:
  errc code_;
  std::optional<std::size_t> line_;
  std::optional<std::size_t> offset_;
};

}  // namespace strata
