#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "patchdrift/dispersal.hpp"
#include "patchdrift/errors.hpp"
#include "patchdrift/estimates.hpp"
#include "patchdrift/groups.hpp"
#include "patchdrift/landscape.hpp"

namespace patchdrift {

// Hierarchical habitat on a product of cyclic groups: movement rates and
// noise covariances depend only on the coarsest scale at which two
// patches differ.
struct MultiScaleSpec {
  CyclicProductGroup group;
  std::vector<double> q_rates;  // q_1..q_{k+1}; the last is the diagonal completion
  std::vector<double> s_covs;   // s_1..s_{k+1}; the last is the own-patch variance
  Vec mu;

  static MultiScaleSpec create(CyclicProductGroup g, std::vector<double> q,
                               std::vector<double> s, Vec mu_values) {
    const int k = g.scales();
    if (static_cast<int>(q.size()) != k)
      throw Error(ErrorCode::ModelError, "need one movement rate per scale");
    if (static_cast<int>(s.size()) != k + 1)
      throw Error(ErrorCode::ModelError, "need k+1 covariance levels (own-patch level last)");
    if (mu_values.size() != g.order())
      throw Error(ErrorCode::ModelError, "growth rates must cover every patch");
    for (int l = 0; l < k; ++l)
      if (q[l] < 0.0) throw Error(ErrorCode::NegativeOffDiagonal, "scale rates must be >= 0");

    MultiScaleSpec spec{std::move(g), std::move(q), std::move(s), std::move(mu_values)};
    double diag = 0.0;
    for (int l = 1; l <= k; ++l)
      diag -= spec.q_rates[l - 1] * (spec.nbar(l - 1) - spec.nbar(l));
    spec.q_rates.push_back(diag);
    return spec;
  }

  int scales() const { return group.scales(); }

  // Number of patches inside one metapatch at scale r (product of the
  // factors finer than r); nbar(0) is the whole habitat.
  double nbar(int r) const {
    double p = 1.0;
    for (int j = r; j < group.scales(); ++j) p *= group.factor(j);
    return p;
  }

  // Number of metapatches at scale r; cap_n(k+1) is the patch count.
  double cap_n(int r) const {
    double p = 1.0;
    for (int j = 0; j < r - 1; ++j) p *= group.factor(j);
    return p;
  }

  double mean_s() const {
    const int k = scales();
    double acc = s_covs[k];  // identity element
    for (int l = 1; l <= k; ++l) acc += s_covs[l - 1] * (nbar(l - 1) - nbar(l));
    return acc / group.order();
  }

  std::vector<double> q_class_function() const {
    std::vector<double> f(group.order());
    for (int g = 0; g < group.order(); ++g) f[g] = q_rates[group.scale_level(g) - 1];
    return f;
  }

  std::vector<double> s_class_function() const {
    std::vector<double> f(group.order());
    for (int g = 0; g < group.order(); ++g) f[g] = s_covs[group.scale_level(g) - 1];
    return f;
  }
};

// Full matrices Q_{gh} = q(level(g-h)), Sigma_{gh} = s(level(g-h)).
inline std::pair<DispersalMatrix, Mat> expand_multiscale(const MultiScaleSpec& spec) {
  const int n = spec.group.order();
  Mat q(n, n), sigma(n, n);
  for (int g = 0; g < n; ++g) {
    for (int h = 0; h < n; ++h) {
      int level = spec.group.scale_level(spec.group.subtract(g, h));
      q(g, h) = spec.q_rates[level - 1];
      sigma(g, h) = spec.s_covs[level - 1];
    }
  }
  DispersalMatrix d = validate_dispersal(q);
  try {
    noise_factor(sigma);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::NotPositiveDefinite)
      throw Error(ErrorCode::SigmaNotPD, "expanded covariance is not positive definite");
    throw;
  }
  return {std::move(d), std::move(sigma)};
}

// Per-scale summaries entering the high-dispersal formula.
struct ScaleDecomposition {
  std::vector<double> v_mu;     // habitat-quality variance attributed to each scale
  std::vector<double> s_tilde;  // covariance contrasts
  std::vector<double> q_tilde;  // movement contrasts (negative for valid specs)
  std::vector<double> cap_n;    // metapatch counts, indices 1..k+1
  std::vector<double> nbar;     // within-metapatch sizes, indices 0..k
};

inline ScaleDecomposition scale_decompose(const MultiScaleSpec& spec) {
  const int k = spec.scales();
  ScaleDecomposition d;
  d.cap_n.resize(k + 2);
  d.nbar.resize(k + 1);
  for (int r = 1; r <= k + 1; ++r) d.cap_n[r] = spec.cap_n(r);
  for (int r = 0; r <= k; ++r) d.nbar[r] = spec.nbar(r);

  d.v_mu.resize(k);
  for (int r = 1; r <= k; ++r) {
    int groups = static_cast<int>(d.cap_n[r]);
    int nr = spec.group.factor(r - 1);
    int inner = static_cast<int>(d.nbar[r]);
    double acc = 0.0;
    for (int gi = 0; gi < groups; ++gi) {
      double m1 = 0.0, m2 = 0.0;
      for (int h = 0; h < nr; ++h) {
        double block = 0.0;
        int base = (gi * nr + h) * inner;
        for (int z = 0; z < inner; ++z) block += spec.mu[base + z];
        block /= inner;
        m1 += block;
        m2 += block * block;
      }
      m1 /= nr;
      m2 /= nr;
      acc += m2 - m1 * m1;
    }
    d.v_mu[r - 1] = acc / groups;
  }

  d.s_tilde.resize(k);
  for (int r = 1; r <= k; ++r) {
    double acc = 0.0;
    for (int l = r; l <= k; ++l) acc += (spec.s_covs[l] - spec.s_covs[l - 1]) * d.nbar[l];
    d.s_tilde[r - 1] = acc;
  }

  d.q_tilde.resize(k);
  for (int r = 1; r <= k; ++r) {
    double acc = 0.0;
    for (int l = 1; l <= r; ++l) acc -= spec.q_rates[l - 1] * (d.nbar[l - 1] - d.nbar[l]);
    acc -= spec.q_rates[r - 1] * d.nbar[r];
    d.q_tilde[r - 1] = acc;
  }
  return d;
}

inline GrowthEstimate chi_multiscale(const MultiScaleSpec& spec, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::ModelError, "delta must be positive");
  const int k = spec.scales();
  ScaleDecomposition d = scale_decompose(spec);
  double n = static_cast<double>(spec.group.order());
  double mu_bar = spec.mu.mean();
  double correction = 0.0;
  for (int r = 1; r <= k; ++r) {
    double weight = (d.cap_n[r + 1] - d.cap_n[r]) / (4.0 * n * n);
    correction += (d.v_mu[r - 1] - weight * d.s_tilde[r - 1] * d.s_tilde[r - 1]) /
                  d.q_tilde[r - 1];
  }
  double chi = (mu_bar - 0.5 * spec.mean_s()) - correction / delta;
  return GrowthEstimate{chi, 0.0, Method::asymptote, 0};
}

// High-dispersal growth rate from the character transforms of the rate
// and covariance class functions.
inline GrowthEstimate chi_character(const CyclicProductGroup& group,
                                    const std::vector<double>& q_class,
                                    const std::vector<double>& s_class, const Vec& mu,
                                    double delta) {
  const int n = group.order();
  if (n == 1)
    throw Error(ErrorCode::TrivialOnlySpectrum, "a single patch has no nontrivial characters");
  if (!(delta > 0.0)) throw Error(ErrorCode::ModelError, "delta must be positive");
  if (mu.size() != n) throw Error(ErrorCode::ModelError, "growth rates must cover every patch");
  for (int g = 0; g < n; ++g) {
    int inv = group.subtract(0, g);
    if (std::abs(q_class[g] - q_class[inv]) > 1e-12 * std::max(1.0, std::abs(q_class[g])))
      throw Error(ErrorCode::NotSymmetric, "rate class function must satisfy q(g) = q(-g)");
  }

  std::vector<double> mu_vec(mu.data(), mu.data() + n);
  auto q_hat = character_transform(group, q_class);
  auto s_hat = character_transform(group, s_class);
  auto mu_hat = character_transform(group, mu_vec);

  double scale_q = 0.0, scale_s = 0.0;
  for (int m = 0; m < n; ++m) {
    scale_q = std::max(scale_q, std::abs(q_hat[m]));
    scale_s = std::max(scale_s, std::abs(s_hat[m]));
  }
  for (int m = 0; m < n; ++m) {
    if (std::abs(q_hat[m].imag()) > 1e-10 * std::max(1.0, scale_q) ||
        std::abs(s_hat[m].imag()) > 1e-10 * std::max(1.0, scale_s))
      throw Error(ErrorCode::NotSymmetric, "transforms of q and s must be real");
  }

  double mu_bar = mu.mean();
  double s_bar = 0.0;
  for (int g = 0; g < n; ++g) s_bar += s_class[g];
  s_bar /= n;

  double sum = 0.0;
  for (int m = 1; m < n; ++m) {
    double qt = q_hat[m].real();
    double st = s_hat[m].real();
    double mu_norm2 = std::norm(mu_hat[m]) / n;
    sum += (mu_norm2 - st * st / (4.0 * n)) / qt;
  }
  double chi = (mu_bar - 0.5 * s_bar) - sum / (delta * n);
  return GrowthEstimate{chi, 0.0, Method::asymptote, 0};
}

inline GrowthEstimate chi_character(const MultiScaleSpec& spec, double delta) {
  return chi_character(spec.group, spec.q_class_function(), spec.s_class_function(), spec.mu,
                       delta);
}

// Ring habitat with nearest-neighbor movement, independent noise, and a
// single cosine mode of habitat quality. The constant term is the mixing
// limit mu_bar - sigma^2/(2n): independent patch noise averages down by
// the patch count once the population is spread evenly.
inline GrowthEstimate chi_circle(int n, double sigma2, double mu_bar, double c, int mode,
                                 double delta) {
  if (n < 3) throw Error(ErrorCode::ModelError, "ring needs at least three patches");
  if (!(delta > 0.0)) throw Error(ErrorCode::ModelError, "delta must be positive");
  if (mode < 1 || 2 * mode >= n)
    throw Error(ErrorCode::BadMode, "cosine mode must satisfy 1 <= mode < n/2");
  double one_minus_cos = 2.0 * std::pow(std::sin(M_PI * mode / n), 2);
  double nn = static_cast<double>(n);
  double chi = mu_bar - 0.5 * sigma2 / nn +
               (2.0 * nn * nn * c * c / one_minus_cos -
                (nn * nn - 1.0) * sigma2 * sigma2 / 6.0) /
                   (4.0 * delta * nn * nn);
  return GrowthEstimate{chi, 0.0, Method::asymptote, 0};
}

// Class-function helpers for ring habitats.
inline std::vector<double> ring_rate_function(int n, double rate = 0.5) {
  if (n < 3) throw Error(ErrorCode::ModelError, "ring needs at least three patches");
  std::vector<double> q(n, 0.0);
  q[0] = -2.0 * rate;
  q[1] = rate;
  q[n - 1] = rate;
  return q;
}

inline std::vector<double> own_patch_noise_function(int n, double sigma2) {
  std::vector<double> s(n, 0.0);
  s[0] = sigma2;
  return s;
}

inline Vec cosine_mu(int n, double mu_bar, double c, int mode) {
  Vec mu(n);
  for (int k = 0; k < n; ++k) mu[k] = mu_bar + c * std::cos(2.0 * M_PI * k * mode / n);
  return mu;
}

}  // namespace patchdrift
