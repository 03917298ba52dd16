#pragma once

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbf {

// Closed interval [lo, hi] with outward-rounded arithmetic. Every op
// encloses the true real range of the operation on its argument sets;
// bounds that are provably exact in double precision are kept exact
// (not widened), so zero-margin facts like x - x = 0 stay decidable.
struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    Interval() = default;
    constexpr Interval(double l, double h) : lo(l), hi(h) {}

    static constexpr Interval point(double v) { return {v, v}; }
    static Interval whole() {
        const double inf = std::numeric_limits<double>::infinity();
        return {-inf, inf};
    }

    double width() const { return hi - lo; }
    double mid() const {
        if (lo == -hi) return 0.0;
        double m = 0.5 * lo + 0.5 * hi;
        return std::clamp(m, lo, hi);
    }
    bool contains(double v) const { return lo <= v && v <= hi; }
    bool contains(const Interval& o) const { return lo <= o.lo && o.hi <= hi; }
    bool is_point() const { return lo == hi; }

    bool operator==(const Interval& o) const { return lo == o.lo && hi == o.hi; }
};

namespace detail {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

inline double next_up(double x) {
    if (x == kInf) return x;
    return std::nextafter(x, kInf);
}
inline double next_dn(double x) {
    if (x == -kInf) return x;
    return std::nextafter(x, -kInf);
}

// a + b rounded toward +inf / -inf, exact results untouched (two-sum).
inline double add_up(double a, double b) {
    double s = a + b;
    if (!std::isfinite(s)) return std::isnan(s) ? kInf : s;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return err > 0 ? next_up(s) : s;
}
inline double add_dn(double a, double b) {
    double s = a + b;
    if (!std::isfinite(s)) return std::isnan(s) ? -kInf : s;
    double bb = s - a;
    double err = (a - (s - bb)) + (b - bb);
    return err < 0 ? next_dn(s) : s;
}

// a * b with directed rounding via the fma residual.
inline double mul_up(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    double p = a * b;
    if (!std::isfinite(p)) return std::isnan(p) ? kInf : p;
    double err = std::fma(a, b, -p);
    return err > 0 ? next_up(p) : p;
}
inline double mul_dn(double a, double b) {
    if (a == 0.0 || b == 0.0) return 0.0;
    double p = a * b;
    if (!std::isfinite(p)) return std::isnan(p) ? -kInf : p;
    double err = std::fma(a, b, -p);
    return err < 0 ? next_dn(p) : p;
}

// a / b (b != 0) with directed rounding; residual of q*b vs a gives the
// rounding direction of q.
inline double div_up(double a, double b) {
    double q = a / b;
    if (!std::isfinite(q)) return std::isnan(q) ? kInf : q;
    double err = std::fma(q, b, -a); // q*b - a; true quotient = q - err/b
    if (err == 0) return q;
    return (err < 0) == (b > 0) ? next_up(q) : q;
}
inline double div_dn(double a, double b) {
    double q = a / b;
    if (!std::isfinite(q)) return std::isnan(q) ? -kInf : q;
    double err = std::fma(q, b, -a);
    if (err == 0) return q;
    return (err > 0) == (b > 0) ? next_dn(q) : q;
}

// libm sin/cos/exp are not correctly rounded; widen by two ulps.
inline double lib_up(double x) { return next_up(next_up(x)); }
inline double lib_dn(double x) { return next_dn(next_dn(x)); }

} // namespace detail

inline Interval operator-(const Interval& a) { return {-a.hi, -a.lo}; }

inline Interval operator+(const Interval& a, const Interval& b) {
    return {detail::add_dn(a.lo, b.lo), detail::add_up(a.hi, b.hi)};
}
inline Interval operator-(const Interval& a, const Interval& b) {
    return {detail::add_dn(a.lo, -b.hi), detail::add_up(a.hi, -b.lo)};
}

inline Interval operator*(const Interval& a, const Interval& b) {
    using namespace detail;
    double lo = std::min(std::min(mul_dn(a.lo, b.lo), mul_dn(a.lo, b.hi)),
                         std::min(mul_dn(a.hi, b.lo), mul_dn(a.hi, b.hi)));
    double hi = std::max(std::max(mul_up(a.lo, b.lo), mul_up(a.lo, b.hi)),
                         std::max(mul_up(a.hi, b.lo), mul_up(a.hi, b.hi)));
    return {lo, hi};
}

// Division by an interval containing 0 has no finite enclosure; the caller
// checks for that case (interval_div sets *defined = false and returns the
// whole line).
inline Interval interval_div(const Interval& a, const Interval& b, bool* defined) {
    using namespace detail;
    if (b.lo <= 0.0 && 0.0 <= b.hi) {
        if (defined) *defined = false;
        return Interval::whole();
    }
    if (defined) *defined = true;
    double lo = std::min(std::min(div_dn(a.lo, b.lo), div_dn(a.lo, b.hi)),
                         std::min(div_dn(a.hi, b.lo), div_dn(a.hi, b.hi)));
    double hi = std::max(std::max(div_up(a.lo, b.lo), div_up(a.lo, b.hi)),
                         std::max(div_up(a.hi, b.lo), div_up(a.hi, b.hi)));
    return {lo, hi};
}

namespace detail {
// |x|^n with directed rounding, x >= 0, n >= 1.
inline double pos_pow_up(double x, int n) {
    double r = 1.0;
    double base = x;
    int e = n;
    // first factor exact
    while (e > 0) {
        if (e & 1) r = (r == 1.0) ? base : mul_up(r, base);
        e >>= 1;
        if (e) base = mul_up(base, base);
    }
    return r;
}
inline double pos_pow_dn(double x, int n) {
    double r = 1.0;
    double base = x;
    int e = n;
    while (e > 0) {
        if (e & 1) r = (r == 1.0) ? base : mul_dn(r, base);
        e >>= 1;
        if (e) base = mul_dn(base, base);
    }
    return r;
}
} // namespace detail

inline Interval interval_ipow(const Interval& a, int n) {
    using namespace detail;
    if (n == 0) return Interval::point(1.0);
    if (n == 1) return a;
    if (n % 2 == 0) {
        double alo = std::abs(a.lo), ahi = std::abs(a.hi);
        double m_hi = std::max(alo, ahi);
        double m_lo = (a.lo <= 0.0 && 0.0 <= a.hi) ? 0.0 : std::min(alo, ahi);
        return {pos_pow_dn(m_lo, n), pos_pow_up(m_hi, n)};
    }
    // odd: monotone
    double lo = a.lo < 0 ? -pos_pow_up(-a.lo, n) : pos_pow_dn(a.lo, n);
    double hi = a.hi < 0 ? -pos_pow_dn(-a.hi, n) : pos_pow_up(a.hi, n);
    return {lo, hi};
}

inline Interval interval_exp(const Interval& a) {
    using namespace detail;
    double lo = lib_dn(std::exp(a.lo));
    double hi = lib_up(std::exp(a.hi));
    return {std::max(lo, 0.0), hi};
}

// sqrt over the valid subdomain [max(lo,0), hi]; *defined = false when part
// (or all) of the interval is negative.
inline Interval interval_sqrt(const Interval& a, bool* defined) {
    using namespace detail;
    if (a.hi < 0.0) {
        if (defined) *defined = false;
        return Interval::whole();
    }
    if (defined) *defined = a.lo >= 0.0;
    double lo = a.lo <= 0.0 ? 0.0 : next_dn(std::sqrt(a.lo));
    double s = std::sqrt(a.hi);
    double hi = (s * s == a.hi) ? s : next_up(s);
    return {std::max(lo, 0.0), hi};
}

namespace detail {
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 2.0 * kPi;

// Does [lo,hi] contain offset + 2*pi*k for integral k? The tolerance only
// enlarges the answer toward "yes", which only widens sin/cos enclosures.
inline bool contains_phase(double lo, double hi, double offset) {
    if (hi - lo >= kTwoPi) return true;
    double k = std::ceil((lo - offset) / kTwoPi - 1e-9);
    double v = offset + kTwoPi * k;
    return v <= hi + 1e-9 * (1.0 + std::abs(hi));
}
} // namespace detail

inline Interval interval_sin(const Interval& a) {
    using namespace detail;
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.width() >= kTwoPi)
        return {-1.0, 1.0};
    double slo = std::sin(a.lo), shi = std::sin(a.hi);
    double lo = lib_dn(std::min(slo, shi));
    double hi = lib_up(std::max(slo, shi));
    if (contains_phase(a.lo, a.hi, kPi / 2)) hi = 1.0;
    if (contains_phase(a.lo, a.hi, -kPi / 2)) lo = -1.0;
    return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval interval_cos(const Interval& a) {
    using namespace detail;
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || a.width() >= kTwoPi)
        return {-1.0, 1.0};
    double clo = std::cos(a.lo), chi = std::cos(a.hi);
    double lo = lib_dn(std::min(clo, chi));
    double hi = lib_up(std::max(clo, chi));
    if (contains_phase(a.lo, a.hi, 0.0)) hi = 1.0;
    if (contains_phase(a.lo, a.hi, kPi)) lo = -1.0;
    return {std::max(lo, -1.0), std::min(hi, 1.0)};
}

inline Interval interval_min(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline Interval interval_max(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::max(a.hi, b.hi)};
}

// Outer-semicontinuous sign: any interval touching 0 may take every value
// in [-1, 1].
inline Interval interval_sign(const Interval& a) {
    if (a.lo > 0.0) return Interval::point(1.0);
    if (a.hi < 0.0) return Interval::point(-1.0);
    return {-1.0, 1.0};
}

inline Interval interval_sat(const Interval& a, double lo, double hi) {
    return {std::clamp(a.lo, lo, hi), std::clamp(a.hi, lo, hi)};
}

inline Interval intersect(const Interval& a, const Interval& b) {
    return {std::max(a.lo, b.lo), std::min(a.hi, b.hi)};
}
inline bool empty(const Interval& a) { return !(a.lo <= a.hi); }

inline Interval hull(const Interval& a, const Interval& b) {
    return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}

} // namespace lbf
