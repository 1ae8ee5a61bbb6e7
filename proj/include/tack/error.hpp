#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace tack {

enum class ErrorCode {
    // configuration / input
    ConfigError,
    MissingBoundaryValue,
    GridTooCoarse,
    GridDoesNotCoverGeometry,
    GeometryOverlap,
    RfRegionDisconnected,
    OutOfAperture,
    EmptyProfile,
    // physics outcomes
    NotConverged,
    NoInteriorMinimum,
    SaddleNotMinimum,
    OverlappingIons,
    NoConvergence,
    NoRaysReachPlane,
    BundleNotSingleValued,
    SlopeUnmanufacturable,
    IonInsideElectrode,
    // filesystem
    IoError,
};

enum class ErrorCategory { Config, Physics, Io };

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::MissingBoundaryValue: return "MissingBoundaryValue";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::GridDoesNotCoverGeometry: return "GridDoesNotCoverGeometry";
    case ErrorCode::GeometryOverlap: return "GeometryOverlap";
    case ErrorCode::RfRegionDisconnected: return "RfRegionDisconnected";
    case ErrorCode::OutOfAperture: return "OutOfAperture";
    case ErrorCode::EmptyProfile: return "EmptyProfile";
    case ErrorCode::NotConverged: return "NotConverged";
    case ErrorCode::NoInteriorMinimum: return "NoInteriorMinimum";
    case ErrorCode::SaddleNotMinimum: return "SaddleNotMinimum";
    case ErrorCode::OverlappingIons: return "OverlappingIons";
    case ErrorCode::NoConvergence: return "NoConvergence";
    case ErrorCode::NoRaysReachPlane: return "NoRaysReachPlane";
    case ErrorCode::BundleNotSingleValued: return "BundleNotSingleValued";
    case ErrorCode::SlopeUnmanufacturable: return "SlopeUnmanufacturable";
    case ErrorCode::IonInsideElectrode: return "IonInsideElectrode";
    case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

constexpr ErrorCategory category_of(ErrorCode code) {
    switch (code) {
    case ErrorCode::ConfigError:
    case ErrorCode::MissingBoundaryValue:
    case ErrorCode::GridTooCoarse:
    case ErrorCode::GridDoesNotCoverGeometry:
    case ErrorCode::GeometryOverlap:
    case ErrorCode::RfRegionDisconnected:
    case ErrorCode::OutOfAperture:
    case ErrorCode::EmptyProfile:
        return ErrorCategory::Config;
    case ErrorCode::IoError:
        return ErrorCategory::Io;
    default:
        return ErrorCategory::Physics;
    }
}

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), message_(message) {}

    ErrorCode code() const noexcept { return code_; }
    ErrorCategory category() const noexcept { return category_of(code_); }
    const std::string& message() const noexcept { return message_; }

private:
    ErrorCode code_;
    std::string message_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

} // namespace tack
