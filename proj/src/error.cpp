#include "chainbsde/error.hpp"

namespace chainbsde {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::BadColumnSum: return "BadColumnSum";
        case ErrorCode::NegativeRate: return "NegativeRate";
        case ErrorCode::EmptySchedule: return "EmptySchedule";
        case ErrorCode::BadSchedule: return "BadSchedule";
        case ErrorCode::DimensionMismatch: return "DimensionMismatch";
        case ErrorCode::NotSymmetric: return "NotSymmetric";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NoConvergence: return "NoConvergence";
        case ErrorCode::IncompatibleObstacle: return "IncompatibleObstacle";
        case ErrorCode::GridMismatch: return "GridMismatch";
        case ErrorCode::InstanceMismatch: return "InstanceMismatch";
        case ErrorCode::ConstraintUnsatisfiable: return "ConstraintUnsatisfiable";
        case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

}  // namespace chainbsde
