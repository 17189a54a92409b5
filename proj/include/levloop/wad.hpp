#pragma once

// 18-decimal fixed-point numbers backed by a signed 128-bit integer.
// Products and quotients are formed in 256-bit intermediates and rounded
// once. Any result outside the 128-bit range throws Errc::Overflow.

#include <boost/multiprecision/cpp_int.hpp>

#include <compare>
#include <cstdint>
#include <limits>
#include <string>
#include <string_view>

#include "levloop/error.hpp"

namespace levloop {

enum class Rounding { Down, Up };

class Wad {
 public:
  using rep = __int128;
  using wide = boost::multiprecision::int256_t;

  static constexpr int kDecimals = 18;
  static constexpr rep kScale = static_cast<rep>(1'000'000'000'000'000'000LL);

  constexpr Wad() = default;

  static constexpr Wad from_raw(rep raw) { return Wad(raw); }
  static constexpr Wad from_int(std::int64_t v) { return Wad(static_cast<rep>(v) * kScale); }
  static constexpr Wad from_bps(std::int64_t bps) {
    return Wad(static_cast<rep>(bps) * (kScale / 10'000));
  }
  static constexpr Wad zero() { return Wad(); }
  static constexpr Wad one() { return Wad(kScale); }
  static constexpr Wad ulp() { return Wad(1); }
  static constexpr Wad max() { return Wad(std::numeric_limits<rep>::max()); }

  /// Parses "123", "-4.5", "0.000000000000000001". More than 18 fractional
  /// digits, exponents, or stray characters are rejected.
  static Wad parse(std::string_view text);

  constexpr rep raw() const { return raw_; }
  constexpr bool is_zero() const { return raw_ == 0; }
  constexpr bool is_negative() const { return raw_ < 0; }
  constexpr bool is_positive() const { return raw_ > 0; }

  double to_double() const { return static_cast<double>(raw_) / 1e18; }

  /// Canonical decimal form: no trailing fractional zeros, "0" for zero.
  std::string str() const;

  constexpr auto operator<=>(const Wad&) const = default;

  Wad operator-() const {
    if (raw_ == std::numeric_limits<rep>::min()) throw Error(Errc::Overflow, "negation");
    return Wad(-raw_);
  }
  friend Wad operator+(Wad a, Wad b) {
    rep out;
    if (__builtin_add_overflow(a.raw_, b.raw_, &out)) throw Error(Errc::Overflow, "addition");
    return Wad(out);
  }
  friend Wad operator-(Wad a, Wad b) {
    rep out;
    if (__builtin_sub_overflow(a.raw_, b.raw_, &out)) throw Error(Errc::Overflow, "subtraction");
    return Wad(out);
  }
  Wad& operator+=(Wad o) { return *this = *this + o; }
  Wad& operator-=(Wad o) { return *this = *this - o; }

  /// a * b, truncated toward zero.
  friend Wad operator*(Wad a, Wad b) { return mul_div(a, b, one()); }
  /// a / b, truncated toward zero.
  friend Wad operator/(Wad a, Wad b) { return mul_div(a, one(), b); }

  Wad operator*(std::int64_t k) const { return mul_div(*this, from_int(k), one()); }

  /// a * b / c with a single rounding step.
  static Wad mul_div(Wad a, Wad b, Wad c, Rounding mode = Rounding::Down);

  static wide widen(rep v);
  static rep narrow(const wide& v);

 private:
  constexpr explicit Wad(rep raw) : raw_(raw) {}
  rep raw_ = 0;
};

inline Wad min(Wad a, Wad b) { return b < a ? b : a; }
inline Wad max(Wad a, Wad b) { return a < b ? b : a; }

// ---------------------------------------------------------------------------

inline Wad::wide Wad::widen(rep v) {
  const bool neg = v < 0;
  unsigned __int128 mag = neg ? static_cast<unsigned __int128>(0) - static_cast<unsigned __int128>(v)
                              : static_cast<unsigned __int128>(v);
  wide out = static_cast<std::uint64_t>(mag >> 64);
  out <<= 64;
  out += static_cast<std::uint64_t>(mag);
  return neg ? wide(-out) : out;
}

inline Wad::rep Wad::narrow(const wide& v) {
  static const wide kMax = widen(std::numeric_limits<rep>::max());
  static const wide kMin = widen(std::numeric_limits<rep>::min());
  if (v > kMax || v < kMin) throw Error(Errc::Overflow, "value exceeds 128-bit range");
  const bool neg = v < 0;
  wide mag = neg ? wide(-v) : v;
  const auto lo = static_cast<std::uint64_t>(mag & wide(std::numeric_limits<std::uint64_t>::max()));
  const auto hi = static_cast<std::uint64_t>(mag >> 64);
  unsigned __int128 u = (static_cast<unsigned __int128>(hi) << 64) | lo;
  return neg ? static_cast<rep>(static_cast<unsigned __int128>(0) - u) : static_cast<rep>(u);
}

inline Wad Wad::mul_div(Wad a, Wad b, Wad c, Rounding mode) {
  if (c.raw_ == 0) throw Error(Errc::Overflow, "division by zero");
  const wide num = widen(a.raw_) * widen(b.raw_);
  const wide den = widen(c.raw_);
  wide q = num / den;  // truncates toward zero
  if (mode == Rounding::Up) {
    const wide r = num % den;
    if (r != 0 && ((num < 0) == (den < 0))) q += 1;
  }
  return Wad(narrow(q));
}

inline Wad Wad::parse(std::string_view text) {
  auto fail = [&] { return Error(Errc::InvalidAmount, "not a decimal amount: '" + std::string(text) + "'"); };
  if (text.empty()) throw fail();
  std::size_t i = 0;
  bool neg = false;
  if (text[0] == '-') {
    neg = true;
    i = 1;
  }
  if (i >= text.size()) throw fail();

  unsigned __int128 int_part = 0;
  std::size_t int_digits = 0;
  for (; i < text.size() && text[i] != '.'; ++i) {
    const char ch = text[i];
    if (ch < '0' || ch > '9') throw fail();
    int_part = int_part * 10 + static_cast<unsigned>(ch - '0');
    if (++int_digits > 21) throw Error(Errc::Overflow, "amount too large: " + std::string(text));
  }
  if (int_digits == 0) throw fail();

  unsigned __int128 frac = 0;
  std::size_t frac_digits = 0;
  if (i < text.size()) {
    ++i;  // '.'
    if (i >= text.size()) throw fail();
    for (; i < text.size(); ++i) {
      const char ch = text[i];
      if (ch < '0' || ch > '9') throw fail();
      if (++frac_digits > static_cast<std::size_t>(kDecimals)) {
        throw Error(Errc::InvalidAmount, "more than 18 fractional digits: " + std::string(text));
      }
      frac = frac * 10 + static_cast<unsigned>(ch - '0');
    }
  }
  for (std::size_t k = frac_digits; k < static_cast<std::size_t>(kDecimals); ++k) frac *= 10;

  const unsigned __int128 limit = static_cast<unsigned __int128>(std::numeric_limits<rep>::max());
  if (int_part > (limit - frac) / static_cast<unsigned __int128>(kScale)) {
    throw Error(Errc::Overflow, "amount too large: " + std::string(text));
  }
  const rep mag = static_cast<rep>(int_part * static_cast<unsigned __int128>(kScale) + frac);
  return Wad(neg ? -mag : mag);
}

inline std::string Wad::str() const {
  const bool neg = raw_ < 0;
  unsigned __int128 mag = neg ? static_cast<unsigned __int128>(0) - static_cast<unsigned __int128>(raw_)
                              : static_cast<unsigned __int128>(raw_);
  const auto scale = static_cast<unsigned __int128>(kScale);
  unsigned __int128 ip = mag / scale;
  unsigned __int128 fp = mag % scale;

  std::string digits;
  do {
    digits.insert(digits.begin(), static_cast<char>('0' + static_cast<int>(ip % 10)));
    ip /= 10;
  } while (ip != 0);

  std::string out = neg ? "-" + digits : digits;
  if (fp != 0) {
    std::string frac(kDecimals, '0');
    for (int k = kDecimals - 1; k >= 0; --k) {
      frac[static_cast<std::size_t>(k)] = static_cast<char>('0' + static_cast<int>(fp % 10));
      fp /= 10;
    }
    while (!frac.empty() && frac.back() == '0') frac.pop_back();
    out += "." + frac;
  }
  return out;
}

}  // namespace levloop
