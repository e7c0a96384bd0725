#pragma once

#include <cmath>
#include <optional>
#include <vector>

#include "patchdrift/errors.hpp"
#include "patchdrift/estimates.hpp"
#include "patchdrift/quadrature.hpp"

namespace patchdrift {

// Two patches, independent noise. Closed-form stationary density of the
// patch-1 fraction and quadrature-exact growth rate.
struct TwoPatchParams {
  double mu1 = 0.0, mu2 = 0.0;
  double s1sq = 1.0, s2sq = 1.0;  // noise variances
  double d12 = 0.5, d21 = 0.5;    // movement rates 1->2 and 2->1

  void validate() const {
    if (s1sq <= 0.0 || s2sq <= 0.0)
      throw Error(ErrorCode::ModelError, "two-patch variances must be positive");
    if (d12 <= 0.0 || d21 <= 0.0)
      throw Error(ErrorCode::ModelError,
                  "two-patch movement rates must be positive in both directions");
  }

  TwoPatchParams scaled(double delta) const {
    TwoPatchParams p = *this;
    p.d12 *= delta;
    p.d21 *= delta;
    return p;
  }
};

// Diffusive symmetric family: both rates delta/2, so delta multiplies the
// unit-rate fully connected two-patch generator.
inline TwoPatchParams symmetric_two_patch(double mu, double sigma2, double delta) {
  TwoPatchParams p;
  p.mu1 = p.mu2 = mu;
  p.s1sq = p.s2sq = sigma2;
  p.d12 = p.d21 = 0.5 * delta;
  return p;
}

namespace detail {

inline std::vector<double> endpoint_breakpoints() {
  std::vector<double> b;
  for (double x : {1e-12, 1e-9, 1e-6, 1e-4, 1e-3, 1e-2, 0.05, 0.2, 0.5})
    b.push_back(x);
  for (double x : {0.05, 0.2, 1e-2, 1e-3, 1e-4, 1e-6, 1e-9, 1e-12})
    b.push_back(1.0 - x);
  return b;
}

}  // namespace detail

// Stationary density of Y^1 on (0,1). Evaluation is done in log space;
// the cached shift keeps the normalizing integrals inside double range.
class StationaryDensity {
 public:
  explicit StationaryDensity(const TwoPatchParams& p) : p_(p) {
    p.validate();
    double s = p.s1sq + p.s2sq;
    alpha1_ = 2.0 * p.s1sq / s;
    alpha2_ = 2.0 * p.s2sq / s;
    beta_ = 2.0 * (p.mu1 - p.mu2 + p.d21 - p.d12) / s;
    coef_ = 2.0 / s;

    log_shift_ = peak_log_value();
    auto raw = [this](double y) { return shifted(y); };
    QuadratureResult z =
        integrate_adaptive(raw, 0.0, 1.0, 1e-11, 0.0, detail::endpoint_breakpoints());
    if (!(z.value > 0.0) || !std::isfinite(z.value))
      throw Error(ErrorCode::QuadratureFailure, "density normalization integral degenerate");
    norm_ = z.value;
  }

  double log_unnormalized(double y) const {
    return (beta_ - alpha1_) * std::log(y) - (beta_ + alpha2_) * std::log1p(-y) -
           coef_ * (p_.d21 / y + p_.d12 / (1.0 - y));
  }

  // Normalized density; 0 at the (entrance) endpoints.
  double operator()(double y) const {
    if (y <= 0.0 || y >= 1.0) return 0.0;
    return shifted(y) / norm_;
  }

  // Normalizing constant of exp(log_unnormalized).
  double normalization() const { return norm_ * std::exp(log_shift_); }

  double moment(int k) const {
    auto f = [this, k](double y) {
      double v = shifted(y);
      for (int j = 0; j < k; ++j) v *= y;
      return v;
    };
    QuadratureResult r =
        integrate_adaptive(f, 0.0, 1.0, 1e-11, 0.0, detail::endpoint_breakpoints());
    return r.value / norm_;
  }

  // E[g(Y)] for a pointwise factor g.
  template <typename G>
  double expectation(const G& g) const {
    auto f = [this, &g](double y) { return g(y) * shifted(y); };
    QuadratureResult r =
        integrate_adaptive(f, 0.0, 1.0, 1e-11, 0.0, detail::endpoint_breakpoints());
    return r.value / norm_;
  }

 private:
  double shifted(double y) const {
    if (y <= 0.0 || y >= 1.0) return 0.0;
    double lg = log_unnormalized(y) - log_shift_;
    return lg < -745.0 ? 0.0 : std::exp(lg);
  }

  double peak_log_value() const {
    double best = -1e300;
    for (double y : detail::endpoint_breakpoints()) best = std::max(best, log_unnormalized(y));
    for (int i = 1; i < 512; ++i) best = std::max(best, log_unnormalized(i / 512.0));
    return best;
  }

  TwoPatchParams p_;
  double alpha1_, alpha2_, beta_, coef_;
  double log_shift_ = 0.0;
  double norm_ = 1.0;
};

inline StationaryDensity stationary_density(const TwoPatchParams& p) {
  return StationaryDensity(p);
}

inline GrowthEstimate chi_quadrature(const TwoPatchParams& p) {
  StationaryDensity rho(p);
  double m1 = rho.moment(1);
  double m2 = rho.moment(2);
  double chi = p.mu2 - 0.5 * p.s2sq + (p.mu1 - p.mu2 + p.s2sq) * m1 -
               0.5 * (p.s1sq + p.s2sq) * m2;
  return GrowthEstimate{chi, 0.0, Method::quadrature, 0};
}

// High-dispersal form of the symmetric family.
inline GrowthEstimate chi_symmetric_asymptote(double delta, double mu, double sigma2) {
  if (delta <= 0.0) throw Error(ErrorCode::ModelError, "asymptote needs delta > 0");
  double chi = mu - 0.25 * sigma2 - sigma2 * sigma2 / (16.0 * delta);
  return GrowthEstimate{chi, 0.0, Method::asymptote, 0};
}

// Root of chi(delta) = 0 over the family delta -> base rates scaled by
// delta. Reported as absent when chi does not change sign on the scan
// interval, which matches the known sign of chi at both extremes.
inline std::optional<double> critical_dispersal(const TwoPatchParams& base,
                                                double delta_max = 1e3,
                                                double delta_min = 1e-2,
                                                double tol = 1e-8) {
  base.validate();
  auto chi_at = [&](double delta) { return chi_quadrature(base.scaled(delta)).chi; };

  const int scan_points = 61;
  double prev_delta = delta_min;
  double prev_chi = chi_at(prev_delta);
  double lo = 0.0, hi = 0.0;
  bool bracketed = false;
  for (int i = 1; i < scan_points; ++i) {
    double t = static_cast<double>(i) / (scan_points - 1);
    double delta = delta_min * std::pow(delta_max / delta_min, t);
    double chi = chi_at(delta);
    if (prev_chi == 0.0) return prev_delta;
    if ((prev_chi < 0.0) != (chi < 0.0)) {
      lo = prev_delta;
      hi = delta;
      bracketed = true;
      break;
    }
    prev_delta = delta;
    prev_chi = chi;
  }
  if (!bracketed) return std::nullopt;

  double chi_lo = chi_at(lo);
  while (hi - lo > tol) {
    double mid = 0.5 * (lo + hi);
    double chi_mid = chi_at(mid);
    if (chi_mid == 0.0) return mid;
    if ((chi_mid < 0.0) == (chi_lo < 0.0)) {
      lo = mid;
      chi_lo = chi_mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

}  // namespace patchdrift
