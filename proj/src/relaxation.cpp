#include <algorithm>
#include <cmath>

#include "nnreach/error.hpp"
#include "nnreach/relax.hpp"
#include "nnreach/simplex.hpp"

namespace nnreach {

double AlphaRule::alpha(double l, double u) const {
  switch (mode) {
    case Mode::Adaptive: return u >= std::abs(l) ? 1.0 : 0.0;
    case Mode::Zero: return 0.0;
    case Mode::One: return 1.0;
    case Mode::Constant: return std::clamp(value, 0.0, 1.0);
  }
  return 0.0;
}

namespace {

void check_interval(double l, double u) {
  if (!(l <= u)) throw Error(Errc::InvalidInterval, "lower bound exceeds upper bound");
}

double sech2(double x) {
  const double c = std::cosh(x);
  return 1.0 / (c * c);
}

// Extremes of g(x) = tanh(x) - k x on [l, u]. Critical points solve
// sech^2(x) = k, i.e. x = +-acosh(1/sqrt(k)).
std::pair<double, double> offset_range(double k, double l, double u) {
  auto g = [k](double x) { return std::tanh(x) - k * x; };
  double lo = std::min(g(l), g(u));
  double hi = std::max(g(l), g(u));
  if (k > 0.0 && k < 1.0) {
    const double r = std::acosh(1.0 / std::sqrt(k));
    for (double x : {-r, r})
      if (x > l && x < u) {
        lo = std::min(lo, g(x));
        hi = std::max(hi, g(x));
      }
  }
  return {lo, hi};
}

// Area between tanh and the line k x + b on [l, u], using the antiderivative
// log cosh of tanh. Sign picks lower (+1: tanh - line) or upper (-1).
double gap_area(double k, double b, double l, double u, double sign) {
  auto log_cosh = [](double x) {
    const double ax = std::abs(x);
    return ax + std::log1p(std::exp(-2.0 * ax)) - std::log(2.0);
  };
  const double curve = log_cosh(u) - log_cosh(l);
  const double line = 0.5 * k * (u * u - l * l) + b * (u - l);
  return sign * (curve - line);
}

constexpr double kPad = 1e-12;

}  // namespace

ReluRelaxation relu_relaxation(double l, double u, const AlphaRule& rule) {
  check_interval(l, u);
  ReluRelaxation r;
  if (l >= 0.0) {
    r.kind = ReluCase::Identity;
    return r;
  }
  if (u <= 0.0) {
    r.kind = ReluCase::Zero;
    r.upper_slope = 0.0;
    r.lower_slope = 0.0;
    return r;
  }
  r.kind = ReluCase::Unstable;
  r.upper_slope = u / (u - l);
  r.upper_intercept = -u * l / (u - l);
  r.lower_slope = rule.alpha(l, u);
  return r;
}

// Construction:
//  * point interval: constant lines through (l, tanh l);
//  * u <= 0 (convex part): chord above, tangent at the midpoint below;
//  * l >= 0 (concave part): chord below, tangent at the midpoint above;
//  * l < 0 < u: for each side, the better (smaller gap area) of the tangent
//    slope at the matching endpoint and the chord slope, with the intercept
//    shifted to the exact extreme of tanh(x) - k x on [l, u].
// A grid check certifies the result; any violation falls back to the
// constant bounds [tanh l, tanh u].
TanhRelaxation tanh_relaxation(double l, double u) {
  check_interval(l, u);
  TanhRelaxation r;
  const double tl = std::tanh(l);
  const double tu = std::tanh(u);
  if (u - l < 1e-9) {
    r.lower_intercept = tl;
    r.upper_intercept = tu;
    return r;
  }
  const double chord = (tu - tl) / (u - l);
  const double mid = 0.5 * (l + u);
  const double tm = std::tanh(mid);
  const double km = sech2(mid);
  if (u <= 0.0) {
    r.upper_slope = chord;
    r.upper_intercept = tl - chord * l;
    r.lower_slope = km;
    r.lower_intercept = tm - km * mid;
  } else if (l >= 0.0) {
    r.lower_slope = chord;
    r.lower_intercept = tl - chord * l;
    r.upper_slope = km;
    r.upper_intercept = tm - km * mid;
  } else {
    double best_area = kInf;
    for (double k : {sech2(l), chord}) {
      const double b = offset_range(k, l, u).first;
      const double area = gap_area(k, b, l, u, 1.0);
      if (area < best_area) {
        best_area = area;
        r.lower_slope = k;
        r.lower_intercept = b;
      }
    }
    best_area = kInf;
    for (double k : {sech2(u), chord}) {
      const double b = offset_range(k, l, u).second;
      const double area = gap_area(k, b, l, u, -1.0);
      if (area < best_area) {
        best_area = area;
        r.upper_slope = k;
        r.upper_intercept = b;
      }
    }
  }
  r.lower_intercept -= kPad;
  r.upper_intercept += kPad;
  if (tanh_relaxation_violation(r, l, u) > 0.0) {
    r = TanhRelaxation{};
    r.lower_intercept = tl;
    r.upper_intercept = tu;
  }
  return r;
}

namespace {

// Slope of the upper hull of tanh on [l, u] at x, before fixing the intercept.
// For l < 0 < u the hull follows the line from (l, tanh l) tangent to the
// curve at d, then the curve itself.
double upper_hull_slope(double l, double u, double x) {
  const double tl = std::tanh(l);
  const double chord = (std::tanh(u) - tl) / (u - l);
  if (u <= 0.0) return chord;
  if (l >= 0.0) return sech2(x);
  // h(d) = tanh d + sech^2 d (l - d) - tanh l is increasing on [0, inf).
  auto h = [&](double d) { return std::tanh(d) + sech2(d) * (l - d) - tl; };
  if (h(u) <= 0.0) return chord;
  double a = 0.0, b = u;
  for (int i = 0; i < 200 && b - a > 1e-15 * (1.0 + b); ++i) {
    const double m = 0.5 * (a + b);
    (h(m) < 0.0 ? a : b) = m;
  }
  return sech2(std::max(x, b));
}

}  // namespace

TanhRelaxation tanh_hull_lines(double l, double u, double x) {
  check_interval(l, u);
  TanhRelaxation r;
  if (u - l < 1e-9) {
    r.lower_intercept = std::tanh(l) - kPad;
    r.upper_intercept = std::tanh(u) + kPad;
    return r;
  }
  x = std::clamp(x, l, u);
  r.upper_slope = upper_hull_slope(l, u, x);
  // tanh is odd: the lower hull on [l, u] mirrors the upper hull on [-u, -l].
  r.lower_slope = upper_hull_slope(-u, -l, -x);
  r.lower_intercept = offset_range(r.lower_slope, l, u).first - kPad;
  r.upper_intercept = offset_range(r.upper_slope, l, u).second + kPad;
  return r;
}

double tanh_relaxation_violation(const TanhRelaxation& r, double l, double u, int points) {
  double worst = 0.0;
  for (int i = 0; i < points; ++i) {
    const double x = points == 1 ? l : l + (u - l) * static_cast<double>(i) / (points - 1);
    const double t = std::tanh(x);
    worst = std::max(worst, r.lower(x) - t);
    worst = std::max(worst, t - r.upper(x));
  }
  return worst;
}

const IntervalBound& BoundMap::at(NodeId id) const {
  if (!has(id)) throw Error(Errc::MissingPreactivation, "no bounds for node " + std::to_string(id.value));
  return *bounds_[id.value];
}

void BoundMap::set(NodeId id, IntervalBound b) {
  if (id.value >= bounds_.size()) bounds_.resize(id.value + 1);
  bounds_[id.value] = std::move(b);
}

}  // namespace nnreach
