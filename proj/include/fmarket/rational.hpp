#pragma once

#include <boost/multiprecision/gmp.hpp>

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace fmarket {

using Integer = boost::multiprecision::number<boost::multiprecision::gmp_int, boost::multiprecision::et_off>;
using Rational = boost::multiprecision::number<boost::multiprecision::gmp_rational, boost::multiprecision::et_off>;

inline Rational make_rational(std::int64_t n, std::int64_t d = 1) {
  if (d == 0) throw std::invalid_argument("zero denominator");
  return Rational(Integer(n), Integer(d));
}

inline Integer num(const Rational& r) { return boost::multiprecision::numerator(r); }
inline Integer den(const Rational& r) { return boost::multiprecision::denominator(r); }

/// Parses "n", "n/d" or a plain decimal like "0.25" into an exact rational.
inline Rational parse_rational(std::string_view s) {
  std::string t(s);
  auto trim = [](std::string& x) {
    while (!x.empty() && (x.front() == ' ' || x.front() == '\t')) x.erase(x.begin());
    while (!x.empty() && (x.back() == ' ' || x.back() == '\t')) x.pop_back();
  };
  trim(t);
  if (t.empty()) throw std::invalid_argument("empty rational");
  auto bad = [&]() { return std::invalid_argument("malformed rational '" + std::string(s) + "'"); };
  auto is_int = [](const std::string& x) {
    std::size_t i = (x[0] == '-' || x[0] == '+') ? 1 : 0;
    if (i >= x.size()) return false;
    for (; i < x.size(); ++i)
      if (x[i] < '0' || x[i] > '9') return false;
    return true;
  };
  auto slash = t.find('/');
  if (slash != std::string::npos) {
    std::string a = t.substr(0, slash), b = t.substr(slash + 1);
    trim(a);
    trim(b);
    if (a.empty() || b.empty() || !is_int(a) || !is_int(b)) throw bad();
    Integer d(b);
    if (d == 0) throw std::invalid_argument("zero denominator in '" + std::string(s) + "'");
    return Rational(Integer(a), d);
  }
  auto dot = t.find('.');
  if (dot != std::string::npos) {
    std::string ip = t.substr(0, dot), fp = t.substr(dot + 1);
    bool neg = !ip.empty() && ip[0] == '-';
    if (ip.empty() || ip == "-" || ip == "+") ip += "0";
    if (!is_int(ip) || (!fp.empty() && !is_int(fp)) || (!fp.empty() && (fp[0] == '-' || fp[0] == '+')))
      throw bad();
    Integer scale = 1;
    for (std::size_t i = 0; i < fp.size(); ++i) scale *= 10;
    Rational r{Integer(ip)};
    Rational frac = fp.empty() ? Rational(0) : Rational(Integer(fp), scale);
    return neg ? r - frac : r + frac;
  }
  if (!is_int(t)) throw bad();
  return Rational(Integer(t));
}

/// Canonical "n/d" form; integers are written with "/1" so the format is uniform.
inline std::string to_string(const Rational& r) {
  return num(r).str() + "/" + den(r).str();
}

inline Integer floor_int(const Rational& r) {
  Integer q = num(r) / den(r);  // truncates toward zero
  if (r < 0 && q * den(r) != num(r)) q -= 1;
  return q;
}

inline Integer ceil_int(const Rational& r) {
  Integer f = floor_int(r);
  return Rational(f) == r ? f : f + 1;
}

inline Rational rabs(const Rational& r) { return r < 0 ? Rational(-r) : r; }
inline Rational rmin(const Rational& a, const Rational& b) { return a < b ? a : b; }
inline Rational rmax(const Rational& a, const Rational& b) { return a < b ? b : a; }

inline Rational rpow(const Rational& b, unsigned e) {
  Rational r = 1, x = b;
  while (e) {
    if (e & 1u) r *= x;
    x *= x;
    e >>= 1;
  }
  return r;
}

inline double to_double(const Rational& r) { return r.convert_to<double>(); }

/// Exact rational for a finite double (binary expansion, no rounding).
inline Rational from_double(double v) {
  if (v == 0) return 0;
  int ex = 0;
  double m = std::frexp(v, &ex);
  std::int64_t mi = static_cast<std::int64_t>(std::ldexp(m, 53));
  ex -= 53;
  Rational r(mi);
  if (ex > 0)
    r *= rpow(Rational(2), static_cast<unsigned>(ex));
  else if (ex < 0)
    r /= rpow(Rational(2), static_cast<unsigned>(-ex));
  return r;
}

/// Closest rational to v with denominator at most max_den (Stern-Brocot walk).
inline Rational approximate(double v, std::int64_t max_den) {
  bool neg = v < 0;
  double x = neg ? -v : v;
  std::int64_t a0 = static_cast<std::int64_t>(std::floor(x));
  std::int64_t p0 = 1, q0 = 0, p1 = a0, q1 = 1;
  double frac = x - static_cast<double>(a0);
  while (frac > 1e-15) {
    double inv = 1.0 / frac;
    std::int64_t a = static_cast<std::int64_t>(std::floor(inv));
    std::int64_t q2 = a * q1 + q0;
    if (q2 > max_den) break;
    std::int64_t p2 = a * p1 + p0;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    frac = inv - static_cast<double>(a);
  }
  Rational r = make_rational(p1, q1);
  return neg ? Rational(-r) : r;
}

}  // namespace fmarket
