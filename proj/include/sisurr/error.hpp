#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sisurr {

enum class ErrorCode {
    invalid_space,
    degenerate_feature,
    missing_context,
    invalid_geometry,
    unbound_parameter,
    non_solvable_netlist,
    timestep_too_coarse,
    insufficient_data,
    invalid_kernel,
    ill_conditioned,
    invalid_hyper,
    training_diverged,
    dimension_mismatch,
    out_of_domain,
    out_of_bounds,
    too_large_request,
    invalid_argument,
    io_error,
    parse_error,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the library carries a machine-readable code so the
/// CLI and the HTTP service can map it without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

}  // namespace sisurr
