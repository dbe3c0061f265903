#pragma once

#include <algorithm>

namespace treepot {

// Closed interval of reals. Products and quotients assume nonnegative operands.
struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  static Interval point(double v) { return {v, v}; }
  double mid() const { return 0.5 * (lo + hi); }
  double width() const { return hi - lo; }
  bool contains(double v, double slack = 0.0) const { return v >= lo - slack && v <= hi + slack; }
};

inline Interval operator+(Interval a, Interval b) { return {a.lo + b.lo, a.hi + b.hi}; }
inline Interval operator-(Interval a, Interval b) { return {a.lo - b.hi, a.hi - b.lo}; }
inline Interval operator*(Interval a, Interval b) { return {a.lo * b.lo, a.hi * b.hi}; }
inline Interval operator*(double s, Interval a) { return {s * a.lo, s * a.hi}; }
inline Interval operator/(Interval a, Interval b) { return {a.lo / b.hi, a.hi / b.lo}; }
inline Interval one_minus(Interval a) { return {1.0 - a.hi, 1.0 - a.lo}; }
inline Interval hull(Interval a, Interval b) {
  return {std::min(a.lo, b.lo), std::max(a.hi, b.hi)};
}
// from two evaluations of a quantity that is monotone in the truncation side
inline Interval ordered(double a, double b) { return {std::min(a, b), std::max(a, b)}; }

}  // namespace treepot
