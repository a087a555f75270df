#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace chainbsde {

enum class ErrorCode {
    BadColumnSum,
    NegativeRate,
    EmptySchedule,
    BadSchedule,
    DimensionMismatch,
    NotSymmetric,
    NonFinite,
    NoConvergence,
    IncompatibleObstacle,
    GridMismatch,
    InstanceMismatch,
    ConstraintUnsatisfiable,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Exception type thrown by every module. The code identifies the failure
/// class; the message carries the human-readable context.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    [[nodiscard]] ErrorCode code() const noexcept { return code_; }
    /// The message without the code prefix.
    [[nodiscard]] const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace chainbsde
