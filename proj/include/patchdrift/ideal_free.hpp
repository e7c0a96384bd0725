#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <optional>
#include <vector>

#include "patchdrift/dispersal.hpp"
#include "patchdrift/errors.hpp"
#include "patchdrift/landscape.hpp"

namespace patchdrift {

// Maximizer of g(y) = mu.y - y.Sigma.y/2 over the probability simplex.
struct IdealFreeSolution {
  PatchDistribution y_star;
  std::vector<int> support;
  double lambda = 0.0;
  double g_value = 0.0;
  double kkt_residual = 0.0;
};

namespace detail {

inline void require_pd(const Mat& sigma) {
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  double lo = es.eigenvalues().minCoeff();
  double hi = es.eigenvalues().maxCoeff();
  if (hi <= 0.0 || lo <= kSigmaRankTol * hi)
    throw Error(ErrorCode::SigmaNotPD, "covariance is not positive definite");
}

}  // namespace detail

// Exact active-set solve. Starts from full support, drops entries forced
// negative on the current face, and re-admits any off-support patch whose
// KKT multiplier comes out on the wrong side. Strict concavity makes the
// maximizer unique, so the visiting order cannot change the answer.
inline IdealFreeSolution optimize(const Vec& mu, const Mat& sigma) {
  const int n = static_cast<int>(mu.size());
  if (sigma.rows() != n || sigma.cols() != n)
    throw Error(ErrorCode::ModelError, "dimension mismatch between mu and sigma");
  detail::require_pd(sigma);

  std::vector<int> support(n);
  for (int i = 0; i < n; ++i) support[i] = i;

  const double interior_tol = 1e-12;
  const double kkt_tol = 1e-9;
  Vec y = Vec::Zero(n);
  double lambda = 0.0;

  int guard = 0;
  const int guard_max = 4 * n * n + 16;
  while (true) {
    if (++guard > guard_max)
      throw Error(ErrorCode::ModelError, "active-set iteration failed to settle");
    const int m = static_cast<int>(support.size());
    Mat s_ff(m, m);
    Vec mu_f(m);
    for (int a = 0; a < m; ++a) {
      mu_f[a] = mu[support[a]];
      for (int b = 0; b < m; ++b) s_ff(a, b) = sigma(support[a], support[b]);
    }
    Eigen::LLT<Mat> llt(s_ff);
    if (llt.info() != Eigen::Success)
      throw Error(ErrorCode::SigmaNotPD, "covariance restricted to a face lost definiteness");
    Vec inv_mu = llt.solve(mu_f);
    Vec inv_one = llt.solve(Vec::Ones(m));
    lambda = (inv_mu.sum() - 1.0) / inv_one.sum();
    Vec y_f = inv_mu - lambda * inv_one;

    int drop = -1;
    double worst = interior_tol;
    for (int a = 0; a < m; ++a) {
      if (y_f[a] < worst) {
        worst = y_f[a];
        drop = a;
      }
    }
    if (drop >= 0 && m > 1) {
      support.erase(support.begin() + drop);
      continue;
    }

    y.setZero();
    for (int a = 0; a < m; ++a) y[support[a]] = y_f[a];

    // Off-face directions: the reduced gradient must not point back in.
    Vec grad = mu - sigma * y;
    int admit = -1;
    double worst_gain = kkt_tol;
    for (int i = 0; i < n; ++i) {
      if (std::find(support.begin(), support.end(), i) != support.end()) continue;
      double gain = grad[i] - lambda;
      if (gain > worst_gain) {
        worst_gain = gain;
        admit = i;
      }
    }
    if (admit >= 0) {
      support.insert(std::lower_bound(support.begin(), support.end(), admit), admit);
      continue;
    }
    break;
  }

  y = y.cwiseMax(0.0);
  y /= y.sum();

  Vec grad = mu - sigma * y;
  double resid = std::abs(y.sum() - 1.0);
  for (int i = 0; i < n; ++i) {
    bool on = std::find(support.begin(), support.end(), i) != support.end();
    if (on)
      resid = std::max(resid, std::abs(grad[i] - lambda));
    else
      resid = std::max(resid, std::max(0.0, grad[i] - lambda));
  }

  IdealFreeSolution sol;
  sol.y_star = PatchDistribution{y};
  sol.support = support;
  sol.lambda = lambda;
  sol.g_value = mu.dot(y) - 0.5 * y.dot(sigma * y);
  sol.kkt_residual = resid;
  return sol;
}

// Interior solution for diagonal covariance; absent when some patch is
// forced out, signalling fallback to the active-set solve.
inline std::optional<PatchDistribution> closed_form_uncorrelated(const Vec& mu,
                                                                 const Vec& variances) {
  const int n = static_cast<int>(mu.size());
  if (variances.size() != n)
    throw Error(ErrorCode::ModelError, "dimension mismatch between mu and variances");
  for (int j = 0; j < n; ++j)
    if (variances[j] <= 0.0) throw Error(ErrorCode::ModelError, "variances must be positive");
  double total_inv = 0.0;
  for (int j = 0; j < n; ++j) total_inv += 1.0 / variances[j];
  Vec y(n);
  for (int i = 0; i < n; ++i) {
    double acc = 1.0;
    for (int j = 0; j < n; ++j) acc += (mu[i] - mu[j]) / variances[j];
    y[i] = acc / (variances[i] * total_inv);
  }
  for (int i = 0; i < n; ++i)
    if (y[i] <= 0.0) return std::nullopt;
  return PatchDistribution{y};
}

// Interior solution for the exchangeable covariance.
inline std::optional<PatchDistribution> closed_form_exchangeable(const Vec& mu, double sigma2,
                                                                 double rho) {
  const int n = static_cast<int>(mu.size());
  if (sigma2 <= 0.0) throw Error(ErrorCode::ModelError, "variance must be positive");
  if (n >= 2 && (rho <= -1.0 / (n - 1) || rho >= 1.0))
    throw Error(ErrorCode::BadCorrelation, "correlation outside the admissible interval");
  double mu_bar = mu.mean();
  Vec y(n);
  for (int i = 0; i < n; ++i) y[i] = (mu[i] - mu_bar) / (sigma2 * (1.0 - rho)) + 1.0 / n;
  for (int i = 0; i < n; ++i)
    if (y[i] <= 0.0) return std::nullopt;
  return PatchDistribution{y};
}

// g(y*): an upper bound on the stochastic growth rate of any dispersal
// strategy in this environment.
inline double chi_upper_bound(const Vec& mu, const Mat& sigma) {
  return optimize(mu, sigma).g_value;
}

// Smallest patch count for which free dispersal among exchangeable sink
// patches yields positive growth; absent when correlation is too strong.
inline std::optional<int> persistence_patch_count(double mu, double sigma2, double rho) {
  if (mu <= 0.0) throw Error(ErrorCode::ModelError, "mean growth rate must be positive");
  if (sigma2 <= 0.0) throw Error(ErrorCode::ModelError, "variance must be positive");
  if (rho >= 2.0 * mu / sigma2) return std::nullopt;
  double threshold = (1.0 - rho) * sigma2 / (2.0 * mu - rho * sigma2);
  int n = static_cast<int>(std::floor(threshold)) + 1;
  if (n < 1) n = 1;
  while (!(mu - ((n - 1) * rho + 1.0) * sigma2 / (2.0 * n) > 0.0)) ++n;
  return n;
}

}  // namespace patchdrift
