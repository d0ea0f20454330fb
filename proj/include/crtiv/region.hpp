#pragma once

#include <limits>
#include <string>
#include <string_view>

namespace crtiv {

/// A confidence set for a scalar parameter. Inverting a ratio test can give
/// an interval, the complement of an interval (two rays), the whole line or
/// nothing at all.
///
/// A single ray is stored as a ComplementOfInterval with one infinite
/// endpoint, e.g. [b, inf) is the complement of (-inf, b).
struct ConfidenceRegion {
    enum class Kind { FiniteInterval, ComplementOfInterval, WholeLine, Empty };

    Kind kind = Kind::Empty;
    double lo = std::numeric_limits<double>::quiet_NaN();
    double hi = std::numeric_limits<double>::quiet_NaN();
    double alpha = 0.05;

    static ConfidenceRegion finite(double lo, double hi, double alpha);
    static ConfidenceRegion complement(double lo, double hi, double alpha);
    static ConfidenceRegion whole_line(double alpha);
    static ConfidenceRegion empty(double alpha);

    bool contains(double x) const noexcept;
    bool is_infinite() const noexcept {
        return kind == Kind::WholeLine || kind == Kind::ComplementOfInterval;
    }
    /// Length of a finite interval; +inf for unbounded regions, 0 for Empty.
    double length() const noexcept;
};

std::string_view kind_tag(ConfidenceRegion::Kind kind) noexcept;
std::string_view kind_label(ConfidenceRegion::Kind kind) noexcept;
ConfidenceRegion::Kind kind_from_tag(std::string_view tag);

/// "[lo, hi]", "(-inf, a] ∪ [b, inf)", "(-inf, inf)" or "∅".
std::string format_region(const ConfidenceRegion& region, int precision = 6);

}  // namespace crtiv
