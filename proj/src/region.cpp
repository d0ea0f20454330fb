#include "crtiv/region.hpp"

#include <cmath>
#include <cstdio>

#include "crtiv/error.hpp"

namespace crtiv {

ConfidenceRegion ConfidenceRegion::finite(double lo, double hi, double alpha) {
    if (!(lo <= hi)) throw Error(ErrorCode::InvalidInput, "interval requires lo <= hi");
    return {Kind::FiniteInterval, lo, hi, alpha};
}

ConfidenceRegion ConfidenceRegion::complement(double lo, double hi, double alpha) {
    if (!(lo <= hi)) throw Error(ErrorCode::InvalidInput, "interval requires lo <= hi");
    return {Kind::ComplementOfInterval, lo, hi, alpha};
}

ConfidenceRegion ConfidenceRegion::whole_line(double alpha) {
    constexpr double inf = std::numeric_limits<double>::infinity();
    return {Kind::WholeLine, -inf, inf, alpha};
}

ConfidenceRegion ConfidenceRegion::empty(double alpha) {
    ConfidenceRegion r;
    r.alpha = alpha;
    return r;
}

bool ConfidenceRegion::contains(double x) const noexcept {
    switch (kind) {
        case Kind::FiniteInterval: return lo <= x && x <= hi;
        // The excluded interval is open: its endpoints are roots and belong to the set.
        case Kind::ComplementOfInterval: return x <= lo || x >= hi;
        case Kind::WholeLine: return true;
        case Kind::Empty: return false;
    }
    return false;
}

double ConfidenceRegion::length() const noexcept {
    switch (kind) {
        case Kind::FiniteInterval: return hi - lo;
        case Kind::Empty: return 0.0;
        default: return std::numeric_limits<double>::infinity();
    }
}

std::string_view kind_tag(ConfidenceRegion::Kind kind) noexcept {
    switch (kind) {
        case ConfidenceRegion::Kind::FiniteInterval: return "FiniteInterval";
        case ConfidenceRegion::Kind::ComplementOfInterval: return "ComplementOfInterval";
        case ConfidenceRegion::Kind::WholeLine: return "WholeLine";
        case ConfidenceRegion::Kind::Empty: return "Empty";
    }
    return "Empty";
}

std::string_view kind_label(ConfidenceRegion::Kind kind) noexcept {
    switch (kind) {
        case ConfidenceRegion::Kind::FiniteInterval: return "finite";
        case ConfidenceRegion::Kind::ComplementOfInterval: return "two rays";
        case ConfidenceRegion::Kind::WholeLine: return "whole line";
        case ConfidenceRegion::Kind::Empty: return "empty";
    }
    return "empty";
}

ConfidenceRegion::Kind kind_from_tag(std::string_view tag) {
    for (auto k : {ConfidenceRegion::Kind::FiniteInterval, ConfidenceRegion::Kind::ComplementOfInterval,
                   ConfidenceRegion::Kind::WholeLine, ConfidenceRegion::Kind::Empty}) {
        if (kind_tag(k) == tag) return k;
    }
    throw Error(ErrorCode::ParseError, "unknown region kind '" + std::string(tag) + "'");
}

std::string format_region(const ConfidenceRegion& region, int precision) {
    auto num = [precision](double v) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*g", precision, v);
        return std::string(buf);
    };
    switch (region.kind) {
        case ConfidenceRegion::Kind::FiniteInterval:
            return "[" + num(region.lo) + ", " + num(region.hi) + "]";
        case ConfidenceRegion::Kind::ComplementOfInterval:
            if (std::isinf(region.lo)) return "[" + num(region.hi) + ", inf)";
            if (std::isinf(region.hi)) return "(-inf, " + num(region.lo) + "]";
            return "(-inf, " + num(region.lo) + "] ∪ [" + num(region.hi) + ", inf)";
        case ConfidenceRegion::Kind::WholeLine:
            return "(-inf, inf)";
        case ConfidenceRegion::Kind::Empty:
            return "∅";
    }
    return "";
}

}  // namespace crtiv
