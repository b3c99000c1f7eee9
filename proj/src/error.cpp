#include "strata/error.hpp"

namespace strata {

std::string_view to_string(errc code) noexcept {
  switch (code) {
    case errc::missing_asset: return "missing_asset";
    case errc::malformed_manifest: return "malformed_manifest";
    case errc::duplicate_layer_id: return "duplicate_layer_id";
    case errc::mask_out_of_bounds: return "mask_out_of_bounds";
    case errc::version_unsupported: return "version_unsupported";
    case errc::io_failure: return "io_failure";
    case errc::hard_constraint_cycle: return "hard_constraint_cycle";
    case errc::no_landing_surface: return "no_landing_surface";
    case errc::parse_error: return "parse_error";
    case errc::unknown_verb: return "unknown_verb";
    case errc::arity_mismatch: return "arity_mismatch";
    case errc::non_numeric_param: return "non_numeric_param";
    case errc::invalid_parameter: return "invalid_parameter";
    case errc::nothing_to_undo: return "nothing_to_undo";
    case errc::synthesizer_unavailable: return "synthesizer_unavailable";
    case errc::planner_unreachable: return "planner_unreachable";
    case errc::planner_malformed_reply: return "planner_malformed_reply";
    case errc::invalid_stacking: return "invalid_stacking";
    case errc::unknown_layer: return "unknown_layer";
    case errc::size_mismatch: return "size_mismatch";
    case errc::empty_constraint_set: return "empty_constraint_set";
    case errc::empty_request_set: return "empty_request_set";
    case errc::session_not_found: return "session_not_found";
    case errc::round_out_of_range: return "round_out_of_range";
    case errc::bundle_invalid: return "bundle_invalid";
  }
  return "unknown";
}

}  // namespace strata
