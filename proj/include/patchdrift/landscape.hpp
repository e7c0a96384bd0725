#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "patchdrift/errors.hpp"
#include "patchdrift/dispersal.hpp"

namespace patchdrift {

// Relative eigenvalue floor below which a covariance matrix is treated
// as rank deficient.
inline constexpr double kSigmaRankTol = 1e-10;

// Lower-triangular factor G with G * G^T = sigma, i.e. the transpose of
// the noise mixing matrix applied to independent Brownian increments.
inline Mat noise_factor(const Mat& sigma) {
  if (sigma.rows() != sigma.cols())
    throw Error(ErrorCode::ModelError, "covariance matrix must be square");
  const int n = static_cast<int>(sigma.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < i; ++j)
      if (sigma(i, j) != sigma(j, i))
        throw Error(ErrorCode::ModelError, "covariance matrix must be symmetric as stored");
  Eigen::SelfAdjointEigenSolver<Mat> es(sigma);
  double min_ev = es.eigenvalues().minCoeff();
  double max_ev = es.eigenvalues().maxCoeff();
  if (max_ev <= 0.0 || min_ev <= kSigmaRankTol * max_ev)
    throw Error(ErrorCode::NotPositiveDefinite,
                "covariance matrix is rank deficient (min eigenvalue " +
                    std::to_string(min_ev) + ")");
  Eigen::LLT<Mat> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw Error(ErrorCode::NotPositiveDefinite, "Cholesky factorization failed");
  return llt.matrixL();
}

// Growth rates and noise covariance over the patches.
class Landscape {
 public:
  Landscape(const Vec& mu, const Mat& sigma) : mu_(mu), sigma_(sigma) {
    if (mu.size() < 1) throw Error(ErrorCode::ModelError, "landscape needs at least one patch");
    if (sigma.rows() != mu.size() || sigma.cols() != mu.size())
      throw Error(ErrorCode::ModelError, "covariance dimension does not match patch count");
    gamma_t_ = noise_factor(sigma);
  }

  int n() const { return static_cast<int>(mu_.size()); }
  const Vec& mu() const { return mu_; }
  const Mat& sigma() const { return sigma_; }
  // Lower triangular; gamma_t * gamma_t^T = sigma.
  const Mat& gamma_t() const { return gamma_t_; }

 private:
  Vec mu_;
  Mat sigma_;
  Mat gamma_t_;
};

// sigma^2 [(1-rho) I + rho J]: common variance, common pairwise correlation.
inline Mat build_exchangeable_sigma(int n, double sigma2, double rho) {
  if (n < 1) throw Error(ErrorCode::ModelError, "exchangeable covariance needs n >= 1");
  if (sigma2 <= 0.0) throw Error(ErrorCode::ModelError, "variance must be positive");
  if (n >= 2 && (rho <= -1.0 / (n - 1) || rho >= 1.0))
    throw Error(ErrorCode::BadCorrelation,
                "correlation must lie in (-1/(n-1), 1) for the matrix to have full rank");
  Mat s = Mat::Constant(n, n, sigma2 * rho);
  for (int i = 0; i < n; ++i) s(i, i) = sigma2;
  return s;
}

}  // namespace patchdrift
