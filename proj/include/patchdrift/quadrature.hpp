#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "patchdrift/errors.hpp"

namespace patchdrift {

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  int segments = 0;
};

namespace detail {

// 15-point Kronrod extension of 7-point Gauss (QUADPACK QK15 constants).
inline constexpr double kKronrodNodes[8] = {
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144838258730,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
};

inline constexpr double kKronrodWeights[8] = {
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
};

inline constexpr double kGaussWeights[4] = {
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
};

struct Segment {
  double a, b;
  double value;
  double error;
};

template <typename F>
Segment qk15(const F& f, double a, double b) {
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  double fv[15];
  // Index layout: 0..6 positive/negative node pairs, 14 is the center.
  for (int i = 0; i < 7; ++i) {
    double dx = half * kKronrodNodes[i];
    fv[2 * i] = f(center - dx);
    fv[2 * i + 1] = f(center + dx);
  }
  fv[14] = f(center);

  double resk = kKronrodWeights[7] * fv[14];
  for (int i = 0; i < 7; ++i) resk += kKronrodWeights[i] * (fv[2 * i] + fv[2 * i + 1]);
  double resg = kGaussWeights[3] * fv[14];
  for (int i = 0; i < 3; ++i) {
    int k = 2 * i + 1;  // Gauss nodes sit at odd Kronrod indices.
    resg += kGaussWeights[i] * (fv[2 * k] + fv[2 * k + 1]);
  }

  double mean = 0.5 * resk;
  double resasc = kKronrodWeights[7] * std::abs(fv[14] - mean);
  for (int i = 0; i < 7; ++i)
    resasc += kKronrodWeights[i] * (std::abs(fv[2 * i] - mean) + std::abs(fv[2 * i + 1] - mean));

  resasc *= half;
  double err = std::abs((resk - resg) * half);
  if (resasc != 0.0 && err != 0.0)
    err = resasc * std::min(1.0, std::pow(200.0 * err / resasc, 1.5));
  return Segment{a, b, resk * half, err};
}

}  // namespace detail

// Globally adaptive Gauss-Kronrod integration. Optional interior
// breakpoints seed the initial partition; useful when nearly all of the
// mass sits in narrow layers near the endpoints.
template <typename F>
QuadratureResult integrate_adaptive(const F& f, double a, double b, double rel_tol,
                                    double abs_tol = 0.0,
                                    const std::vector<double>& breakpoints = {},
                                    int max_segments = 5000) {
  std::vector<double> knots{a};
  for (double x : breakpoints)
    if (x > a && x < b) knots.push_back(x);
  knots.push_back(b);
  std::sort(knots.begin(), knots.end());

  std::vector<detail::Segment> segs;
  for (std::size_t i = 0; i + 1 < knots.size(); ++i)
    segs.push_back(detail::qk15(f, knots[i], knots[i + 1]));

  auto tolerance = [&](double total) {
    return std::max(abs_tol, rel_tol * std::abs(total));
  };

  double total = 0.0, total_err = 0.0;
  for (const auto& s : segs) {
    total += s.value;
    total_err += s.error;
  }

  while (total_err > tolerance(total) && static_cast<int>(segs.size()) < max_segments) {
    std::size_t worst = 0;
    for (std::size_t i = 1; i < segs.size(); ++i)
      if (segs[i].error > segs[worst].error) worst = i;
    detail::Segment s = segs[worst];
    double mid = 0.5 * (s.a + s.b);
    if (mid <= s.a || mid >= s.b) break;  // interval exhausted in double precision
    detail::Segment left = detail::qk15(f, s.a, mid);
    detail::Segment right = detail::qk15(f, mid, s.b);
    segs[worst] = left;
    segs.push_back(right);
    total = total_err = 0.0;
    for (const auto& g : segs) {
      total += g.value;
      total_err += g.error;
    }
  }

  if (total_err > tolerance(total) && total_err > 10.0 * tolerance(total))
    throw Error(ErrorCode::QuadratureFailure,
                "adaptive refinement stalled at error " + std::to_string(total_err));

  return QuadratureResult{total, total_err, static_cast<int>(segs.size())};
}

}  // namespace patchdrift
