#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace crtiv {

enum class ErrorCode {
    ParseError,
    InvalidInput,
    ZeroDenominator,
    DegenerateVariance,
    RankDeficientFirstStage,
    DegenerateArm,
    CapExceeded,
    NoCompliers,
    EmptyPiSource,
    InvalidLambda,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Statistical degeneracies (zero denominators, empty arms, no compliers)
/// are distinguished from malformed input so that callers such as the CLI
/// can map them to different exit codes.
bool is_statistical(ErrorCode code) noexcept;

class Error : public std::runtime_error {
   public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

   private:
    ErrorCode code_;
};

}  // namespace crtiv
