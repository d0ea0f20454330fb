#include "crtiv/error.hpp"

namespace crtiv {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ParseError: return "ParseError";
        case ErrorCode::InvalidInput: return "InvalidInput";
        case ErrorCode::ZeroDenominator: return "ZeroDenominator";
        case ErrorCode::DegenerateVariance: return "DegenerateVariance";
        case ErrorCode::RankDeficientFirstStage: return "RankDeficientFirstStage";
        case ErrorCode::DegenerateArm: return "DegenerateArm";
        case ErrorCode::CapExceeded: return "CapExceeded";
        case ErrorCode::NoCompliers: return "NoCompliers";
        case ErrorCode::EmptyPiSource: return "EmptyPiSource";
        case ErrorCode::InvalidLambda: return "InvalidLambda";
    }
    return "Unknown";
}

bool is_statistical(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::ZeroDenominator:
        case ErrorCode::DegenerateVariance:
        case ErrorCode::RankDeficientFirstStage:
        case ErrorCode::DegenerateArm:
        case ErrorCode::NoCompliers:
            return true;
        default:
            return false;
    }
}

}  // namespace crtiv
