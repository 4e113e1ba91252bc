#pragma once

#include <cmath>

namespace kz::detail {

// Error-free transformations for double-double accumulation.

struct DD {
    double hi = 0.0;
    double lo = 0.0;
};

inline DD two_sum(double a, double b)
{
    const double s = a + b;
    const double bb = s - a;
    const double e = (a - (s - bb)) + (b - bb);
    return {s, e};
}

inline DD quick_two_sum(double a, double b)
{
    const double s = a + b;
    return {s, b - (s - a)};
}

inline DD add(DD a, DD b)
{
    DD s = two_sum(a.hi, b.hi);
    DD t = two_sum(a.lo, b.lo);
    s.lo += t.hi;
    s = quick_two_sum(s.hi, s.lo);
    s.lo += t.lo;
    return quick_two_sum(s.hi, s.lo);
}

inline DD neg(DD a) { return {-a.hi, -a.lo}; }

/// Exact product of a double by an integer-valued double, plus the low part.
inline DD mul(DD a, double k)
{
    const double p = a.hi * k;
    const double e = std::fma(a.hi, k, -p);
    return quick_two_sum(p, e + a.lo * k);
}

/// Sign of a - b.
inline int compare(DD a, DD b)
{
    if (a.hi != b.hi) return a.hi < b.hi ? -1 : 1;
    if (a.lo != b.lo) return a.lo < b.lo ? -1 : 1;
    return 0;
}

}  // namespace kz::detail
