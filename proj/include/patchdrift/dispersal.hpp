#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "patchdrift/errors.hpp"

namespace patchdrift {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

// Point on the probability simplex.
struct PatchDistribution {
  Vec y;

  int n() const { return static_cast<int>(y.size()); }

  static PatchDistribution validated(const Vec& v) {
    for (int i = 0; i < v.size(); ++i) {
      if (v[i] < 0.0)
        throw Error(ErrorCode::ModelError, "patch fraction " + std::to_string(i) + " is negative");
    }
    if (std::abs(v.sum() - 1.0) > 1e-12)
      throw Error(ErrorCode::ModelError, "patch fractions do not sum to 1");
    return PatchDistribution{v};
  }

  bool interior() const {
    for (int i = 0; i < y.size(); ++i)
      if (y[i] <= 0.0) return false;
    return true;
  }
};

namespace detail {

// Strong connectivity of the directed graph of positive off-diagonal rates.
inline bool strongly_connected(const Mat& q) {
  const int n = static_cast<int>(q.rows());
  if (n == 1) return true;
  auto reach_all = [&](bool transpose) {
    std::vector<char> seen(n, 0);
    std::vector<int> stack{0};
    seen[0] = 1;
    int count = 1;
    while (!stack.empty()) {
      int u = stack.back();
      stack.pop_back();
      for (int v = 0; v < n; ++v) {
        if (v == u || seen[v]) continue;
        double rate = transpose ? q(v, u) : q(u, v);
        if (rate > 0.0) {
          seen[v] = 1;
          ++count;
          stack.push_back(v);
        }
      }
    }
    return count == n;
  };
  return reach_all(false) && reach_all(true);
}

// Stationary row vector of an irreducible generator: replace the last
// equation of Q^T pi = 0 with the normalization 1^T pi = 1.
inline Vec stationary_of_generator(const Mat& q) {
  const int n = static_cast<int>(q.rows());
  Eigen::FullPivLU<Mat> rank_check(q.transpose());
  rank_check.setThreshold(1e-12);
  if (rank_check.rank() != n - 1)
    throw Error(ErrorCode::SingularBeyondRankOne,
                "generator null space has dimension != 1 (rank " +
                    std::to_string(rank_check.rank()) + " of " + std::to_string(n) + ")");
  Mat a = q.transpose();
  a.row(n - 1).setOnes();
  Vec b = Vec::Zero(n);
  b[n - 1] = 1.0;
  Vec pi = a.partialPivLu().solve(b);
  double resid = (q.transpose() * pi).cwiseAbs().maxCoeff();
  double scale = q.cwiseAbs().maxCoeff();
  if (resid > 1e-10 * std::max(1.0, scale))
    throw Error(ErrorCode::SingularBeyondRankOne, "stationary solve residual too large");
  for (int i = 0; i < n; ++i) {
    if (pi[i] <= 0.0)
      throw Error(ErrorCode::SingularBeyondRankOne, "stationary vector not in the open simplex");
  }
  return pi;
}

inline bool detailed_balance(const Mat& q, const Vec& pi) {
  const int n = static_cast<int>(q.rows());
  double scale = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j) scale = std::max(scale, std::abs(pi[i] * q(i, j)));
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      double flow_ij = pi[i] * q(i, j);
      double flow_ji = pi[j] * q(j, i);
      if (std::abs(flow_ij - flow_ji) > 1e-10 * std::max(scale, 1e-300)) return false;
    }
  }
  return true;
}

}  // namespace detail

// Generator of the between-patch movement chain: nonnegative off-diagonal
// rates, zero row sums, irreducible. The stationary distribution and the
// detailed-balance flag are computed once at validation.
class DispersalMatrix {
 public:
  const Mat& q() const { return q_; }
  const Vec& pi() const { return pi_; }
  bool reversible() const { return reversible_; }
  int n() const { return static_cast<int>(q_.rows()); }

  DispersalMatrix scaled(double delta) const {
    DispersalMatrix d;
    d.q_ = delta * q_;
    d.pi_ = pi_;
    d.reversible_ = reversible_;
    return d;
  }

  friend DispersalMatrix validate_dispersal(const Mat& q);

 private:
  DispersalMatrix() = default;
  Mat q_;
  Vec pi_;
  bool reversible_ = false;
};

inline DispersalMatrix validate_dispersal(const Mat& q) {
  if (q.rows() != q.cols())
    throw Error(ErrorCode::ModelError, "dispersal matrix must be square");
  const int n = static_cast<int>(q.rows());
  double scale = q.cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      if (i != j && q(i, j) < 0.0)
        throw Error(ErrorCode::NegativeOffDiagonal,
                    "entry (" + std::to_string(i) + "," + std::to_string(j) + ") is negative");
    }
    double row_sum = q.row(i).sum();
    if (std::abs(row_sum) > 1e-12 * std::max(1.0, scale))
      throw Error(ErrorCode::NonZeroRowSum,
                  "row " + std::to_string(i) + " sums to " + std::to_string(row_sum));
  }
  if (!detail::strongly_connected(q))
    throw Error(ErrorCode::Reducible, "movement graph is not strongly connected");

  DispersalMatrix d;
  d.q_ = q;
  d.pi_ = n == 1 ? Vec::Ones(1) : detail::stationary_of_generator(q);
  d.reversible_ = detail::detailed_balance(q, d.pi_);
  return d;
}

inline PatchDistribution stationary_distribution(const DispersalMatrix& d) {
  return PatchDistribution{d.pi()};
}

inline bool is_reversible(const DispersalMatrix& d) { return d.reversible(); }

// Fully connected landscape with unbiased movement: Q = J/n - I.
inline DispersalMatrix build_levins(int n) {
  if (n < 2) throw Error(ErrorCode::ModelError, "fully connected landscape needs n >= 2");
  Mat q = Mat::Constant(n, n, 1.0 / n) - Mat::Identity(n, n);
  return validate_dispersal(q);
}

// Per-row emigration at one of two rates; an exiting individual picks a
// destination uniformly among the other patches.
inline DispersalMatrix build_two_rate_dispersal(int n, const std::vector<int>& fast_patches,
                                                double slow_rate, double fast_rate) {
  if (n < 2) throw Error(ErrorCode::ModelError, "two-rate landscape needs n >= 2");
  if (slow_rate <= 0.0 || fast_rate <= 0.0)
    throw Error(ErrorCode::ModelError, "two-rate landscape needs positive rates");
  std::vector<char> fast(n, 0);
  for (int i : fast_patches) {
    if (i < 0 || i >= n) throw Error(ErrorCode::ModelError, "fast patch index out of range");
    fast[i] = 1;
  }
  Mat q(n, n);
  for (int i = 0; i < n; ++i) {
    double rate = fast[i] ? fast_rate : slow_rate;
    for (int j = 0; j < n; ++j) q(i, j) = (i == j) ? -rate * (n - 1) : rate;
  }
  return validate_dispersal(q);
}

// Q = 1 pi^T - I: every move resamples the target patch from pi, so pi is
// the stationary distribution by construction.
inline DispersalMatrix build_resampling_dispersal(const Vec& pi) {
  const int n = static_cast<int>(pi.size());
  if (n < 2) throw Error(ErrorCode::ModelError, "resampling landscape needs n >= 2");
  PatchDistribution p = PatchDistribution::validated(pi);
  if (!p.interior())
    throw Error(ErrorCode::ModelError, "resampling landscape needs pi in the open simplex");
  Mat q = Vec::Ones(n) * pi.transpose() - Mat::Identity(n, n);
  return validate_dispersal(q);
}

// Eigensystem of v -> Q^T v, orthonormal in the pi-weighted inner product
// <u,v> = sum_i u_i v_i / pi_i. Eigenvalues ascend, the structural zero
// comes last with eigenvector pi.
struct SpectralDecomposition {
  Vec eigenvalues;
  Mat eigenvectors;  // columns xi_1..xi_n
};

inline SpectralDecomposition pi_spectrum(const DispersalMatrix& d) {
  if (!d.reversible())
    throw Error(ErrorCode::NotReversible, "pi-spectrum requires a reversible dispersal matrix");
  const int n = d.n();
  const Vec& pi = d.pi();
  Vec sqrt_pi = pi.cwiseSqrt();
  // diag(pi)^{-1/2} Q^T diag(pi)^{1/2} is symmetric under detailed balance.
  Mat w = sqrt_pi.cwiseInverse().asDiagonal() * d.q().transpose() * sqrt_pi.asDiagonal();
  w = 0.5 * (w + w.transpose());
  Eigen::SelfAdjointEigenSolver<Mat> es(w);
  if (es.info() != Eigen::Success)
    throw Error(ErrorCode::ModelError, "eigensolver failed on symmetrized generator");
  SpectralDecomposition s;
  s.eigenvalues = es.eigenvalues();
  s.eigenvectors = sqrt_pi.asDiagonal() * es.eigenvectors();
  // Pin the structural zero mode exactly: lambda_n = 0, xi_n = pi.
  s.eigenvalues[n - 1] = 0.0;
  s.eigenvectors.col(n - 1) = pi;
  return s;
}

}  // namespace patchdrift
