#include "locreg/error.hpp"
#include "locreg/log.hpp"

#include <iostream>
#include <mutex>
#include <vector>

namespace locreg {

std::string_view to_string(ErrorCode code)
{
    switch (code) {
    case ErrorCode::invalid_dimension: return "invalid-dimension";
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::unsupported_mode: return "unsupported-mode";
    case ErrorCode::not_unit_norm: return "not-unit-norm";
    case ErrorCode::invalid_k: return "invalid-k";
    case ErrorCode::zero_row_sum: return "zero-row-sum";
    case ErrorCode::degenerate_scale: return "degenerate-scale";
    case ErrorCode::isolated_node: return "isolated-node";
    case ErrorCode::disconnected_graph: return "disconnected-graph";
    case ErrorCode::no_convergence: return "no-convergence";
    case ErrorCode::length_mismatch: return "length-mismatch";
    case ErrorCode::shape_mismatch: return "shape-mismatch";
    case ErrorCode::eta_too_large: return "eta-too-large";
    case ErrorCode::domain_error: return "domain-error";
    case ErrorCode::insufficient_labels: return "insufficient-labels";
    case ErrorCode::insufficient_data: return "insufficient-data";
    case ErrorCode::bad_magic: return "bad-magic";
    case ErrorCode::truncated_file: return "truncated-file";
    case ErrorCode::count_mismatch: return "count-mismatch";
    case ErrorCode::io_error: return "io-error";
    case ErrorCode::config_error: return "config-error";
    }
    return "unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message)
{
}

Error Error::with_stage(std::string stage) const
{
    Error tagged(code_, message_);
    tagged.stage_ = std::move(stage);
    return tagged;
}

namespace {

std::mutex& sink_mutex()
{
    static std::mutex m;
    return m;
}

WarningSink& sink()
{
    static WarningSink s = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
    return s;
}

}  // namespace

void warn(const std::string& message)
{
    std::lock_guard lock(sink_mutex());
    if (sink())
        sink()(message);
}

WarningSink set_warning_sink(WarningSink s)
{
    std::lock_guard lock(sink_mutex());
    auto previous = std::move(sink());
    sink() = std::move(s);
    return previous;
}

ScopedWarningCapture::ScopedWarningCapture()
{
    previous_ = set_warning_sink([this](const std::string& msg) { messages_.push_back(msg); });
}

ScopedWarningCapture::~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }

}  // namespace locreg
