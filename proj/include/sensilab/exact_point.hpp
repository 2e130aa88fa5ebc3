#pragma once

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <compare>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace sensilab {

using BigInt = boost::multiprecision::cpp_int;
using WideFloat = boost::multiprecision::cpp_bin_float_50;

/// A point of [0,1) stored as numerator / 2^precision_bits.
///
/// All arithmetic is modulo 1 and exact: adding two points or multiplying
/// by a small integer never rounds. Points of different precision are
/// aligned to the larger precision before combining, which is also exact.
class ExactPoint {
 public:
  ExactPoint() : ExactPoint(BigInt(0), 64) {}

  ExactPoint(BigInt numerator, unsigned precision_bits)
      : num_(std::move(numerator)), bits_(precision_bits) {
    if (bits_ == 0) throw std::invalid_argument("ExactPoint: precision_bits must be positive");
    if (num_ < 0 || (num_ != 0 && boost::multiprecision::msb(num_) >= bits_))
      throw std::invalid_argument("ExactPoint: numerator out of range [0, 2^precision_bits)");
  }

  /// floor(p/q * 2^bits) / 2^bits. Requires 0 <= p < q.
  static ExactPoint from_rational(std::uint64_t p, std::uint64_t q, unsigned bits) {
    if (q == 0 || p >= q) throw std::invalid_argument("ExactPoint::from_rational: need 0 <= p < q");
    BigInt n = BigInt(p) << bits;
    n /= q;
    return {std::move(n), bits};
  }

  /// Exact when the double's binary expansion fits in `bits`, truncated otherwise.
  static ExactPoint from_double(double v, unsigned bits) {
    if (!(v >= 0.0 && v < 1.0)) throw std::invalid_argument("ExactPoint::from_double: value outside [0,1)");
    int exp = 0;
    double mant = std::frexp(v, &exp);  // v = mant * 2^exp, mant in [0.5,1)
    if (v == 0.0) return {BigInt(0), bits};
    auto m53 = static_cast<std::uint64_t>(std::ldexp(mant, 53));
    // v = m53 * 2^(exp-53); numerator = v * 2^bits = m53 * 2^(exp - 53 + bits)
    int shift = exp - 53 + static_cast<int>(bits);
    BigInt n(m53);
    if (shift >= 0)
      n <<= shift;
    else
      n >>= -shift;
    return {std::move(n), bits};
  }

  /// Parses `0x<hex>@<bits>`.
  static ExactPoint from_hex(std::string_view text) {
    auto at = text.find('@');
    if (at == std::string_view::npos || text.substr(0, 2) != "0x" || at <= 2)
      throw std::invalid_argument("expected 0x<hex>@<bits>, got '" + std::string(text) + "'");
    auto hex = text.substr(2, at - 2);
    auto bits_text = text.substr(at + 1);
    if (bits_text.empty() || bits_text.find_first_not_of("0123456789") != std::string_view::npos)
      throw std::invalid_argument("bad precision suffix in '" + std::string(text) + "'");
    if (hex.find_first_not_of("0123456789abcdefABCDEF") != std::string_view::npos)
      throw std::invalid_argument("bad hex digits in '" + std::string(text) + "'");
    unsigned long bits = std::stoul(std::string(bits_text));
    if (bits == 0 || bits > (1u << 20)) throw std::invalid_argument("precision out of range in '" + std::string(text) + "'");
    BigInt n("0x" + std::string(hex));
    return {std::move(n), static_cast<unsigned>(bits)};
  }

  [[nodiscard]] const BigInt& numerator() const noexcept { return num_; }
  [[nodiscard]] unsigned precision_bits() const noexcept { return bits_; }
  [[nodiscard]] bool is_zero() const noexcept { return num_ == 0; }

  /// Same value at a higher precision (zero-extended low bits).
  [[nodiscard]] ExactPoint promoted(unsigned bits) const {
    if (bits < bits_) throw std::invalid_argument("ExactPoint::promoted: cannot lower precision");
    return {num_ << (bits - bits_), bits};
  }

  [[nodiscard]] std::string to_hex() const {
    std::string s = "0x";
    if (num_ == 0) {
      s += '0';
    } else {
      std::string digits = num_.str(0, std::ios_base::hex);
      std::transform(digits.begin(), digits.end(), digits.begin(),
                     [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
      s += digits;
    }
    return s + "@" + std::to_string(bits_);
  }

  [[nodiscard]] double to_double() const { return scaled_to_double(num_, bits_); }

  /// x * k mod 1, exact.
  [[nodiscard]] ExactPoint times(std::uint64_t k) const {
    ExactPoint r = *this;
    r.num_ *= k;
    r.reduce();
    return r;
  }

  /// x + y mod 1, exact. Result has the larger of the two precisions.
  [[nodiscard]] ExactPoint plus(const ExactPoint& other) const {
    unsigned bits = std::max(bits_, other.bits_);
    ExactPoint r = promoted(bits);
    r.num_ += other.bits_ == bits ? other.num_ : BigInt(other.num_ << (bits - other.bits_));
    r.reduce();
    return r;
  }

  /// -x mod 1.
  [[nodiscard]] ExactPoint negated() const {
    if (num_ == 0) return *this;
    return {(BigInt(1) << bits_) - num_, bits_};
  }

  /// 1 - |2x - 1| with the endpoint 1 wrapped to 0.
  [[nodiscard]] ExactPoint tent() const {
    ExactPoint r = *this;
    r.num_ <<= 1;
    BigInt one = BigInt(1) << bits_;
    if (r.num_ >= one) {
      r.num_ = (one << 1) - r.num_;
      if (r.num_ == one) r.num_ = 0;
    }
    return r;
  }

  friend bool operator==(const ExactPoint& a, const ExactPoint& b) { return compare(a, b) == 0; }
  friend std::strong_ordering operator<=>(const ExactPoint& a, const ExactPoint& b) {
    int c = compare(a, b);
    return c < 0 ? std::strong_ordering::less : c > 0 ? std::strong_ordering::greater : std::strong_ordering::equal;
  }

  /// |x - y| as a double (correctly rounded).
  friend double euclidean_gap(const ExactPoint& a, const ExactPoint& b) {
    unsigned bits = std::max(a.bits_, b.bits_);
    BigInt x = a.aligned(bits), y = b.aligned(bits);
    return x >= y ? scaled_to_double(x - y, bits) : scaled_to_double(y - x, bits);
  }

  /// min(|x - y|, 1 - |x - y|) as a double (correctly rounded).
  friend double circle_gap(const ExactPoint& a, const ExactPoint& b) {
    unsigned bits = std::max(a.bits_, b.bits_);
    BigInt x = a.aligned(bits), y = b.aligned(bits);
    BigInt d = x >= y ? BigInt(x - y) : BigInt(y - x);
    BigInt wrap = (BigInt(1) << bits) - d;
    return scaled_to_double(d < wrap ? d : wrap, bits);
  }

  /// The same two gaps carried to 50 significant digits.
  friend WideFloat euclidean_gap_wide(const ExactPoint& a, const ExactPoint& b) {
    unsigned bits = std::max(a.bits_, b.bits_);
    BigInt x = a.aligned(bits), y = b.aligned(bits);
    return ldexp(WideFloat(x >= y ? BigInt(x - y) : BigInt(y - x)), -static_cast<int>(bits));
  }

  friend WideFloat circle_gap_wide(const ExactPoint& a, const ExactPoint& b) {
    unsigned bits = std::max(a.bits_, b.bits_);
    BigInt x = a.aligned(bits), y = b.aligned(bits);
    BigInt d = x >= y ? BigInt(x - y) : BigInt(y - x);
    BigInt wrap = (BigInt(1) << bits) - d;
    return ldexp(WideFloat(d < wrap ? d : wrap), -static_cast<int>(bits));
  }

  /// v / 2^bits rounded to nearest double, with v >= 0.
  static double scaled_to_double(const BigInt& v, unsigned bits) {
    if (v == 0) return 0.0;
    unsigned top = boost::multiprecision::msb(v);
    if (top < 64) return std::ldexp(static_cast<double>(static_cast<std::uint64_t>(v)), -static_cast<int>(bits));
    unsigned shift = top - 63;
    BigInt head = v >> shift;
    auto word = static_cast<std::uint64_t>(head);
    // sticky bit keeps round-to-nearest correct after truncating the tail
    if (boost::multiprecision::lsb(v) < shift) word |= 1u;
    return std::ldexp(static_cast<double>(word), static_cast<int>(shift) - static_cast<int>(bits));
  }

 private:
  BigInt aligned(unsigned bits) const { return bits == bits_ ? num_ : BigInt(num_ << (bits - bits_)); }

  void reduce() {
    if (num_ != 0 && boost::multiprecision::msb(num_) >= bits_) num_ -= (num_ >> bits_) << bits_;
  }

  static int compare(const ExactPoint& a, const ExactPoint& b) {
    if (a.bits_ == b.bits_) return a.num_.compare(b.num_);
    unsigned bits = std::max(a.bits_, b.bits_);
    return a.aligned(bits).compare(b.aligned(bits));
  }

  BigInt num_;
  unsigned bits_;
};

}  // namespace sensilab
