#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace locreg {

enum class ErrorCode {
    invalid_dimension,
    invalid_argument,
    unsupported_mode,
    not_unit_norm,
    invalid_k,
    zero_row_sum,
    degenerate_scale,
    isolated_node,
    disconnected_graph,
    no_convergence,
    length_mismatch,
    shape_mismatch,
    eta_too_large,
    domain_error,
    insufficient_labels,
    insufficient_data,
    bad_magic,
    truncated_file,
    count_mismatch,
    io_error,
    config_error,
};

std::string_view to_string(ErrorCode code);

/// Library-wide exception. `stage()` is filled in by the experiment runner
/// when an error crosses a pipeline boundary.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }
    const std::string& stage() const noexcept { return stage_; }
    const std::string& message() const noexcept { return message_; }

    /// Returns a copy tagged with the pipeline stage it escaped from.
    Error with_stage(std::string stage) const;

private:
    ErrorCode code_;
    std::string message_;
    std::string stage_;
};

}  // namespace locreg
