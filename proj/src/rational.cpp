#include "crtiv/rational.hpp"

#include <charconv>
#include <limits>

#include "crtiv/error.hpp"

namespace crtiv {

namespace {

__int128 gcd128(__int128 a, __int128 b) {
    if (a < 0) a = -a;
    if (b < 0) b = -b;
    while (b != 0) {
        const __int128 t = a % b;
        a = b;
        b = t;
    }
    return a;
}

std::int64_t parse_int(std::string_view s, std::string_view whole) {
    std::int64_t v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
        throw Error(ErrorCode::ParseError, "not an exact number: '" + std::string(whole) + "'");
    }
    return v;
}

}  // namespace

Rational::Rational(std::int64_t num, std::int64_t den) { *this = make(num, den); }

Rational Rational::make(__int128 num, __int128 den) {
    if (den == 0) throw Error(ErrorCode::InvalidInput, "rational with zero denominator");
    if (den < 0) {
        num = -num;
        den = -den;
    }
    const __int128 g = gcd128(num, den);
    if (g > 1) {
        num /= g;
        den /= g;
    }
    constexpr __int128 lim = std::numeric_limits<std::int64_t>::max();
    if (num > lim || num < -lim || den > lim) {
        throw Error(ErrorCode::InvalidInput, "rational overflow");
    }
    Rational r;
    r.num_ = static_cast<std::int64_t>(num);
    r.den_ = static_cast<std::int64_t>(den);
    return r;
}

Rational Rational::parse(std::string_view text) {
    const std::string_view whole = text;
    if (auto slash = text.find('/'); slash != std::string_view::npos) {
        return Rational(parse_int(text.substr(0, slash), whole), parse_int(text.substr(slash + 1), whole));
    }
    bool negative = false;
    if (!text.empty() && (text.front() == '-' || text.front() == '+')) {
        negative = text.front() == '-';
        text.remove_prefix(1);
    }
    std::string_view int_part = text, frac_part;
    if (auto dot = text.find('.'); dot != std::string_view::npos) {
        int_part = text.substr(0, dot);
        frac_part = text.substr(dot + 1);
    }
    if (int_part.empty() && frac_part.empty()) throw Error(ErrorCode::ParseError, "empty number");
    if (frac_part.size() > 17) throw Error(ErrorCode::ParseError, "too many decimals: '" + std::string(whole) + "'");
    __int128 num = int_part.empty() ? 0 : parse_int(int_part, whole);
    __int128 den = 1;
    for (char ch : frac_part) {
        if (ch < '0' || ch > '9') throw Error(ErrorCode::ParseError, "not an exact number: '" + std::string(whole) + "'");
        num = num * 10 + (ch - '0');
        den *= 10;
    }
    return make(negative ? -num : num, den);
}

std::string Rational::str() const {
    if (den_ == 1) return std::to_string(num_);
    return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
    return Rational::make(static_cast<__int128>(a.num_) * b.den_ + static_cast<__int128>(b.num_) * a.den_,
                          static_cast<__int128>(a.den_) * b.den_);
}

Rational operator-(const Rational& a, const Rational& b) {
    return Rational::make(static_cast<__int128>(a.num_) * b.den_ - static_cast<__int128>(b.num_) * a.den_,
                          static_cast<__int128>(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
    return Rational::make(static_cast<__int128>(a.num_) * b.num_, static_cast<__int128>(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
    return Rational::make(static_cast<__int128>(a.num_) * b.den_, static_cast<__int128>(a.den_) * b.num_);
}

std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept {
    const __int128 lhs = static_cast<__int128>(a.num_) * b.den_;
    const __int128 rhs = static_cast<__int128>(b.num_) * a.den_;
    return lhs <=> rhs;
}

}  // namespace crtiv
