#pragma once

#include <charconv>
#include <compare>
#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>

namespace espark {

/// Fixed-point money with 4 decimal digits of fraction.
///
/// All reward accounting runs on this type so that ledger identities
/// (total = sales - order - holding - backlog - excess) hold exactly;
/// floating point appears only inside the trainer.
class Money {
public:
    static constexpr std::int64_t kScale = 10'000;

    constexpr Money() = default;

    static constexpr Money from_raw(std::int64_t raw) {
        Money m;
        m.raw_ = raw;
        return m;
    }

    /// Converts a real number to money, rounding the value's shortest
    /// decimal representation half-to-even at the 4th fractional digit.
    /// Requires |x| < 2^40; throws std::range_error otherwise.
    static Money from_f64(double x);

    static constexpr Money zero() { return Money{}; }

    constexpr std::int64_t raw() const { return raw_; }
    double to_f64() const { return static_cast<double>(raw_) / kScale; }

    /// "123.4500" style rendering, always 4 fractional digits.
    std::string to_string() const;

    constexpr Money operator+(Money o) const { return from_raw(raw_ + o.raw_); }
    constexpr Money operator-(Money o) const { return from_raw(raw_ - o.raw_); }
    constexpr Money operator-() const { return from_raw(-raw_); }
    constexpr Money& operator+=(Money o) {
        raw_ += o.raw_;
        return *this;
    }
    constexpr Money& operator-=(Money o) {
        raw_ -= o.raw_;
        return *this;
    }
    /// Money times an integer unit count is exact.
    constexpr Money operator*(std::int64_t units) const { return from_raw(raw_ * units); }

    constexpr auto operator<=>(const Money&) const = default;

private:
    std::int64_t raw_ = 0;
};

constexpr Money operator*(std::int64_t units, Money m) { return m * units; }

inline Money Money::from_f64(double x) {
    constexpr double kLimit = 1099511627776.0;  // 2^40
    if (!(x > -kLimit && x < kLimit)) {
        throw std::range_error("money value out of range: " + std::to_string(x));
    }
    // std::to_chars emits the shortest decimal string that round-trips,
    // so decimal literals like 1.00005 surface as true half-way ties.
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), x);
    *res.ptr = '\0';

    // Parse [-]digits[.digits][e[+-]digits] into digits + exponent.
    const char* p = buf;
    bool negative = false;
    if (*p == '-') {
        negative = true;
        ++p;
    }
    unsigned __int128 mantissa = 0;
    int frac_digits = 0;
    bool in_frac = false;
    for (; *p != '\0' && *p != 'e' && *p != 'E'; ++p) {
        if (*p == '.') {
            in_frac = true;
            continue;
        }
        mantissa = mantissa * 10 + static_cast<unsigned>(*p - '0');
        if (in_frac) ++frac_digits;
    }
    int exp10 = 0;
    if (*p == 'e' || *p == 'E') {
        exp10 = std::atoi(p + 1);
    }
    // value = mantissa * 10^(exp10 - frac_digits); scale by 10^4.
    int shift = exp10 - frac_digits + 4;
    while (shift > 0 && mantissa != 0) {
        mantissa *= 10;
        --shift;
    }
    unsigned __int128 remainder_div = 1;
    for (int i = shift; i < 0; ++i) remainder_div *= 10;

    unsigned __int128 quotient = mantissa / remainder_div;
    unsigned __int128 remainder = mantissa % remainder_div;
    unsigned __int128 half = remainder_div / 2;
    if (remainder > half || (remainder == half && remainder_div % 2 == 0 && (quotient & 1))) {
        ++quotient;
    }
    auto raw = static_cast<std::int64_t>(quotient);
    return from_raw(negative ? -raw : raw);
}

inline std::string Money::to_string() const {
    std::int64_t whole = raw_ / kScale;
    std::int64_t frac = raw_ % kScale;
    std::string sign;
    if (raw_ < 0) {
        sign = "-";
        whole = -whole;
        frac = -frac;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s%lld.%04lld", sign.c_str(),
                  static_cast<long long>(whole), static_cast<long long>(frac));
    return buf;
}

}  // namespace espark
