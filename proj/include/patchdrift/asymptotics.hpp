#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <utility>
#include <vector>

#include "patchdrift/dispersal.hpp"
#include "patchdrift/errors.hpp"
#include "patchdrift/estimates.hpp"
#include "patchdrift/landscape.hpp"

namespace patchdrift {

enum class ExpansionMethod { general_reversible, diagonalized };

// chi(delta) ~ a + b/delta for large delta, together with the pieces the
// coefficient b is assembled from.
struct HighDispersalExpansion {
  double a = 0.0;
  double b = 0.0;
  Vec nu;
  Mat gramian;
  double gramian_trace = 0.0;
  ExpansionMethod method = ExpansionMethod::general_reversible;
};

inline GrowthEstimate chi_infinity(const Landscape& land, const PatchDistribution& pi) {
  if (!pi.interior())
    throw Error(ErrorCode::ModelError, "chi at infinite dispersal needs interior pi");
  double chi = land.mu().dot(pi.y) - 0.5 * pi.y.dot(land.sigma() * pi.y);
  return GrowthEstimate{chi, 0.0, Method::limit, 0};
}

inline GrowthEstimate chi_zero(const Landscape& land) {
  double best = land.mu()[0] - 0.5 * land.sigma()(0, 0);
  for (int i = 1; i < land.n(); ++i)
    best = std::max(best, land.mu()[i] - 0.5 * land.sigma()(i, i));
  return GrowthEstimate{best, 0.0, Method::limit, 0};
}

namespace detail {

// Orthonormal basis of the zero-sum subspace {v : 1.v = 0}.
inline Mat zero_sum_basis(int n) {
  Mat ones(n, 1);
  ones.setOnes();
  Eigen::HouseholderQR<Mat> qr(ones);
  Mat full = qr.householderQ();
  return full.rightCols(n - 1);
}

}  // namespace detail

// Unique solution of Q^T nu = -(diag(pi) - pi pi^T)(mu - Sigma pi) with
// 1.nu = 0, obtained on the zero-sum subspace where Q^T is invertible.
inline Vec nu_vector(const Mat& q, const Vec& pi, const Vec& mu, const Mat& sigma) {
  const int n = static_cast<int>(q.rows());
  Mat centering = Mat(pi.asDiagonal()) - pi * pi.transpose();
  Vec rhs = -centering * (mu - sigma * pi);
  if (n == 1) return Vec::Zero(1);
  Mat basis = detail::zero_sum_basis(n);
  Mat reduced = basis.transpose() * q.transpose() * basis;
  Vec w = reduced.partialPivLu().solve(basis.transpose() * rhs);
  Vec nu = basis * w;
  double scale = std::max({1.0, rhs.cwiseAbs().maxCoeff(), q.cwiseAbs().maxCoeff()});
  if ((q.transpose() * nu - rhs).cwiseAbs().maxCoeff() > 1e-9 * scale)
    throw Error(ErrorCode::InconsistentSystem,
                "right-hand side is outside the range of Q^T; not a dispersal generator?");
  return nu;
}

struct GramianResult {
  Mat m;
  double trace_sigma = 0.0;
};

// M = integral of exp(Q^T s) C exp(Q s) ds with
// C = (diag(pi) - pi pi^T) Sigma (diag(pi) - pi pi^T), via the deflated
// continuous Lyapunov equation Q^T M + M Q = -C, M 1 = 0.
inline GramianResult gramian(const Mat& q, const Vec& pi, const Mat& sigma) {
  const int n = static_cast<int>(q.rows());
  Mat centering = Mat(pi.asDiagonal()) - pi * pi.transpose();
  Mat c = centering * sigma * centering;
  if (n == 1) return GramianResult{Mat::Zero(1, 1), 0.0};

  Mat basis = detail::zero_sum_basis(n);
  Mat a = basis.transpose() * q.transpose() * basis;
  Mat c_red = basis.transpose() * c * basis;

  const int m = n - 1;
  Mat kron = Mat::Zero(m * m, m * m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) {
      // block (row, col) of I (x) A + A (x) I acting on vec(M)
      for (int k = 0; k < m; ++k) {
        kron(col * m + row, col * m + k) += a(row, k);
        kron(col * m + row, k * m + row) += a(col, k);
      }
    }
  Vec c_vec(m * m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) c_vec[col * m + row] = -c_red(row, col);
  Vec x = kron.partialPivLu().solve(c_vec);
  Mat m_red(m, m);
  for (int col = 0; col < m; ++col)
    for (int row = 0; row < m; ++row) m_red(row, col) = x[col * m + row];
  m_red = 0.5 * (m_red + m_red.transpose());

  GramianResult out;
  out.m = basis * m_red * basis.transpose();
  out.trace_sigma = (out.m * sigma).trace();
  return out;
}

// Same integral through the pi-orthonormal eigenbasis of Q^T; requires
// reversibility. Kept as an independent route for cross-checking.
inline GramianResult gramian_spectral(const DispersalMatrix& d, const Mat& sigma) {
  if (!d.reversible())
    throw Error(ErrorCode::NotReversible, "spectral Gramian route needs a reversible generator");
  const int n = d.n();
  const Vec& pi = d.pi();
  Mat centering = Mat(pi.asDiagonal()) - pi * pi.transpose();
  Mat c = centering * sigma * centering;
  SpectralDecomposition s = pi_spectrum(d);
  Mat pi_inv = pi.cwiseInverse().asDiagonal();
  Mat coeff = s.eigenvectors.transpose() * pi_inv * c * pi_inv * s.eigenvectors;
  Mat scaled = Mat::Zero(n, n);
  for (int j = 0; j < n - 1; ++j)
    for (int k = 0; k < n - 1; ++k)
      scaled(j, k) = coeff(j, k) / (-s.eigenvalues[j] - s.eigenvalues[k]);
  GramianResult out;
  out.m = s.eigenvectors * scaled * s.eigenvectors.transpose();
  out.trace_sigma = (out.m * sigma).trace();
  return out;
}

inline HighDispersalExpansion high_dispersal_expansion(const DispersalMatrix& q,
                                                       const Landscape& land) {
  if (!q.reversible())
    throw Error(ErrorCode::NotReversible,
                "the high-dispersal expansion is established for reversible dispersal only");
  if (q.n() != land.n())
    throw Error(ErrorCode::ModelError, "dispersal and landscape dimensions differ");
  HighDispersalExpansion e;
  const Vec& pi = q.pi();
  e.a = land.mu().dot(pi) - 0.5 * pi.dot(land.sigma() * pi);
  e.nu = nu_vector(q.q(), pi, land.mu(), land.sigma());
  GramianResult g = gramian(q.q(), pi, land.sigma());
  e.gramian = g.m;
  e.gramian_trace = g.trace_sigma;
  e.b = (land.mu() - land.sigma() * pi).dot(e.nu) - 0.5 * g.trace_sigma;
  e.method = ExpansionMethod::general_reversible;
  return e;
}

inline std::pair<GrowthEstimate, HighDispersalExpansion> chi_high_dispersal(
    const DispersalMatrix& q, const Landscape& land, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::ModelError, "delta must be positive");
  HighDispersalExpansion e = high_dispersal_expansion(q, land);
  return {GrowthEstimate{e.a + e.b / delta, 0.0, Method::asymptote, 0}, e};
}

namespace detail {

struct CommonEigenbasis {
  Vec q_eigenvalues;      // ascending, last one is the structural zero
  Vec sigma_eigenvalues;  // paired to the same eigenvectors
  Mat eigenvectors;
};

// Joint eigenbasis of a symmetric Q and a commuting Sigma. Within each
// Q-eigenspace the basis is rotated to diagonalize Sigma, which fixes the
// pairing when Q has repeated eigenvalues.
inline CommonEigenbasis common_eigenbasis(const Mat& q, const Mat& sigma) {
  const int n = static_cast<int>(q.rows());
  double q_scale = std::max(1.0, q.cwiseAbs().maxCoeff());
  double s_scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
  if ((q - q.transpose()).cwiseAbs().maxCoeff() > 1e-10 * q_scale)
    throw Error(ErrorCode::NotSymmetric, "diagonalized route needs a symmetric generator");
  if ((q * sigma - sigma * q).cwiseAbs().maxCoeff() > 1e-10 * q_scale * s_scale)
    throw Error(ErrorCode::NotCommuting, "generator and covariance do not commute");

  Eigen::SelfAdjointEigenSolver<Mat> es(q);
  CommonEigenbasis basis;
  basis.q_eigenvalues = es.eigenvalues();
  basis.eigenvectors = es.eigenvectors();
  basis.sigma_eigenvalues = Vec::Zero(n);

  int start = 0;
  while (start < n) {
    int end = start + 1;
    while (end < n &&
           basis.q_eigenvalues[end] - basis.q_eigenvalues[start] <= 1e-9 * q_scale)
      ++end;
    int width = end - start;
    Mat block = basis.eigenvectors.middleCols(start, width);
    Mat s_block = block.transpose() * sigma * block;
    Eigen::SelfAdjointEigenSolver<Mat> ses(s_block);
    basis.eigenvectors.middleCols(start, width) = block * ses.eigenvectors();
    basis.sigma_eigenvalues.segment(start, width) = ses.eigenvalues();
    start = end;
  }
  return basis;
}

}  // namespace detail

struct DiagonalizedExpansion {
  double a = 0.0;
  double b = 0.0;
};

inline DiagonalizedExpansion diagonalized_expansion(const Mat& q, const Landscape& land) {
  const int n = land.n();
  if (q.rows() != n || q.cols() != n)
    throw Error(ErrorCode::ModelError, "dispersal and landscape dimensions differ");
  if (n == 1) return DiagonalizedExpansion{land.mu()[0] - 0.5 * land.sigma()(0, 0), 0.0};
  detail::CommonEigenbasis basis = detail::common_eigenbasis(q, land.sigma());
  double mu_bar = land.mu().mean();
  double theta_top = basis.sigma_eigenvalues[n - 1];
  DiagonalizedExpansion e;
  e.a = mu_bar - theta_top / (2.0 * n);
  double sum = 0.0;
  for (int k = 0; k < n - 1; ++k) {
    double proj = basis.eigenvectors.col(k).dot(land.mu());
    double theta = basis.sigma_eigenvalues[k];
    sum += (proj * proj - theta * theta / (4.0 * n)) / basis.q_eigenvalues[k];
  }
  e.b = -sum / n;
  return e;
}

inline GrowthEstimate chi_diagonalized(const Mat& q, const Landscape& land, double delta) {
  if (!(delta > 0.0)) throw Error(ErrorCode::ModelError, "delta must be positive");
  DiagonalizedExpansion e = diagonalized_expansion(q, land);
  return GrowthEstimate{e.a + e.b / delta, 0.0, Method::asymptote, 0};
}

// Direction-of-selection tests for diffusive movement in the fully
// connected exchangeable landscape.
struct SelectionPredicates {
  bool decreasing_at_high_delta = false;
  bool high_beats_zero = false;
  bool intermediate_optimal_hint = false;
  bool faster_dispersal_favored = false;
};

inline SelectionPredicates dispersal_selection_predicates(const Vec& mu, double sigma2,
                                                          double rho) {
  const int n = static_cast<int>(mu.size());
  if (n < 2) throw Error(ErrorCode::ModelError, "selection predicates need n >= 2");
  if (rho <= -1.0 / (n - 1) || rho >= 1.0)
    throw Error(ErrorCode::BadCorrelation, "correlation outside the admissible interval");
  double mu_bar = mu.mean();
  double var_mu = mu.squaredNorm() / n - mu_bar * mu_bar;
  double spread = (n / std::sqrt(static_cast<double>(n - 1))) * std::sqrt(std::max(0.0, var_mu));
  double mix = (1.0 - rho) * sigma2 / 2.0;

  SelectionPredicates p;
  p.decreasing_at_high_delta = spread > mix;
  p.high_beats_zero = mix > (mu.maxCoeff() - mu_bar) / (1.0 - 1.0 / n);
  p.intermediate_optimal_hint = p.decreasing_at_high_delta && p.high_beats_zero;
  p.faster_dispersal_favored = mix > spread;
  return p;
}

// General form of the faster-dispersal criterion for commuting symmetric
// systems: noise averaged across modes beats habitat-quality variation.
inline bool selection_for_faster_dispersal(const Mat& q, const Landscape& land) {
  const int n = land.n();
  if (n < 2) throw Error(ErrorCode::ModelError, "selection test needs n >= 2");
  detail::CommonEigenbasis basis = detail::common_eigenbasis(q, land.sigma());
  double noise_side = 0.0, habitat_side = 0.0;
  for (int k = 0; k < n - 1; ++k) {
    double inv = 1.0 / std::abs(basis.q_eigenvalues[k]);
    double proj = basis.eigenvectors.col(k).dot(land.mu());
    double theta = basis.sigma_eigenvalues[k];
    noise_side += inv * theta * theta / (4.0 * n);
    habitat_side += inv * proj * proj;
  }
  return noise_side > habitat_side;
}

}  // namespace patchdrift
