#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <string_view>

namespace crtiv {

/// Exact fraction with 64-bit numerator and positive denominator, always
/// reduced. Arithmetic uses 128-bit intermediates and throws on overflow.
class Rational {
   public:
    constexpr Rational() = default;
    Rational(std::int64_t num, std::int64_t den = 1);

    /// Parses "3", "-1.25", "7/4".
    static Rational parse(std::string_view text);

    std::int64_t num() const noexcept { return num_; }
    std::int64_t den() const noexcept { return den_; }
    double to_double() const noexcept { return static_cast<double>(num_) / static_cast<double>(den_); }
    std::string str() const;

    friend Rational operator+(const Rational& a, const Rational& b);
    friend Rational operator-(const Rational& a, const Rational& b);
    friend Rational operator*(const Rational& a, const Rational& b);
    friend Rational operator/(const Rational& a, const Rational& b);
    Rational& operator+=(const Rational& o) { return *this = *this + o; }

    friend bool operator==(const Rational& a, const Rational& b) noexcept {
        return a.num_ == b.num_ && a.den_ == b.den_;
    }
    friend std::strong_ordering operator<=>(const Rational& a, const Rational& b) noexcept;

   private:
    static Rational make(__int128 num, __int128 den);
    std::int64_t num_ = 0;
    std::int64_t den_ = 1;
};

}  // namespace crtiv
