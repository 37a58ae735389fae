#pragma once

#include <cmath>
#include <cstdint>
#include <limits>

namespace flip {

// Double-double scalar (~31 significant digits). The Cantor-B geometry at
// generation k lives at scale 2^(-k(1+beta)); plain doubles run out of
// resolution near generation 6 at beta = 7, so the inverse-pair checks of the
// 1-D and frame maps evaluate in this type.
struct DD {
    double hi = 0.0;
    double lo = 0.0;

    constexpr DD() = default;
    constexpr DD(double h) : hi(h), lo(0.0) {}
    constexpr DD(double h, double l) : hi(h), lo(l) {}
};

namespace detail {
inline DD two_sum(double a, double b) {
    double s = a + b;
    double bb = s - a;
    return {s, (a - (s - bb)) + (b - bb)};
}
inline DD quick_two_sum(double a, double b) {
    double s = a + b;
    return {s, b - (s - a)};
}
inline DD two_prod(double a, double b) {
    double p = a * b;
    return {p, std::fma(a, b, -p)};
}
}  // namespace detail

inline DD operator+(DD a, DD b) {
    DD s = detail::two_sum(a.hi, b.hi);
    return detail::quick_two_sum(s.hi, s.lo + a.lo + b.lo);
}
inline DD operator-(DD a) { return {-a.hi, -a.lo}; }
inline DD operator-(DD a, DD b) { return a + (-b); }
inline DD operator*(DD a, DD b) {
    DD p = detail::two_prod(a.hi, b.hi);
    return detail::quick_two_sum(p.hi, p.lo + a.hi * b.lo + a.lo * b.hi);
}
inline DD operator/(DD a, DD b) {
    double q1 = a.hi / b.hi;
    DD r = a - DD(q1) * b;
    double q2 = r.hi / b.hi;
    r = r - DD(q2) * b;
    double q3 = r.hi / b.hi;
    DD q = detail::quick_two_sum(q1, q2);
    return q + DD(q3);
}
inline DD& operator+=(DD& a, DD b) { a = a + b; return a; }
inline DD& operator-=(DD& a, DD b) { a = a - b; return a; }
inline DD& operator*=(DD& a, DD b) { a = a * b; return a; }
inline DD& operator/=(DD& a, DD b) { a = a / b; return a; }

inline bool operator<(DD a, DD b) { return a.hi < b.hi || (a.hi == b.hi && a.lo < b.lo); }
inline bool operator>(DD a, DD b) { return b < a; }
inline bool operator<=(DD a, DD b) { return !(b < a); }
inline bool operator>=(DD a, DD b) { return !(a < b); }
inline bool operator==(DD a, DD b) { return a.hi == b.hi && a.lo == b.lo; }
inline bool operator!=(DD a, DD b) { return !(a == b); }

inline DD abs(DD a) { return a.hi < 0.0 || (a.hi == 0.0 && a.lo < 0.0) ? -a : a; }

// Scalar accessors shared by double and DD template paths.
inline double to_double(double x) { return x; }
inline double to_double(DD x) { return x.hi + x.lo; }

inline double ldexp2(double x, int e) { return std::ldexp(x, e); }
inline DD ldexp2(DD x, int e) { return {std::ldexp(x.hi, e), std::ldexp(x.lo, e)}; }

using std::abs;

template <class S>
S pow_int(S base, int e) {
    if (e < 0) return S(1) / pow_int(base, -e);
    S r(1);
    S b = base;
    while (e > 0) {
        if (e & 1) r *= b;
        b *= b;
        e >>= 1;
    }
    return r;
}

}  // namespace flip
