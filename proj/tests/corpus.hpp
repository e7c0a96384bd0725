#pragma once

// Shared test fixtures: a small corpus of scenarios exercised by the
// cross-method consistency and bound checks, plus deterministic random
// model generators.

#include <random>
#include <string>
#include <vector>

#include "patchdrift/dispersal.hpp"
#include "patchdrift/landscape.hpp"
#include "patchdrift/sde.hpp"

namespace corpus {

using patchdrift::DispersalMatrix;
using patchdrift::Landscape;
using patchdrift::Mat;
using patchdrift::Vec;

struct Scenario {
  std::string name;
  Landscape landscape;
  DispersalMatrix unit_dispersal;
  double delta;
};

inline Vec make_vec(std::initializer_list<double> v) {
  Vec out(static_cast<int>(v.size()));
  int i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline Mat ring_generator(int n, double rate = 0.5) {
  Mat q = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    q(i, (i + 1) % n) = rate;
    q(i, (i + n - 1) % n) = rate;
    q(i, i) = -2.0 * rate;
  }
  return q;
}

inline Mat example2_mu_sigma_n(int n, Vec& mu) {
  mu = Vec::Ones(n);
  for (int i = 0; i < n / 4; ++i) mu[i] = 10.0;
  return 16.0 * Mat::Identity(n, n);
}

inline DispersalMatrix example2_adaptive_dispersal(int n) {
  std::vector<int> fast;
  for (int i = n / 4; i < n; ++i) fast.push_back(i);
  return patchdrift::build_two_rate_dispersal(n, fast, 1.0, 10.0);
}

// Five scenarios spanning n in {2, 3, 8}; deltas sit where the dynamics
// are neither frozen nor fully mixed.
inline std::vector<Scenario> consistency_corpus() {
  std::vector<Scenario> list;

  list.push_back({"twopatch_symmetric",
                  Landscape(make_vec({0.3, 0.3}), patchdrift::build_exchangeable_sigma(2, 1.0, 0.0)),
                  patchdrift::build_levins(2), 1.0});

  {
    Vec variances = make_vec({1.0, 0.5});
    Mat sigma = variances.asDiagonal();
    list.push_back({"twopatch_asymmetric", Landscape(make_vec({0.4, 0.1}), sigma),
                    patchdrift::build_levins(2), 2.0});
  }

  list.push_back({"three_patch_resampler",
                  Landscape(make_vec({0.2, 0.3, 0.4}),
                            patchdrift::build_exchangeable_sigma(3, 1.0, 0.3)),
                  patchdrift::build_resampling_dispersal(make_vec({0.2, 0.3, 0.5})), 1.0});

  list.push_back({"three_patch_ring",
                  Landscape(make_vec({0.5, 0.2, 0.35}),
                            patchdrift::build_exchangeable_sigma(3, 0.8, 0.0)),
                  patchdrift::validate_dispersal(ring_generator(3)), 2.0});

  {
    Vec mu;
    Mat sigma = example2_mu_sigma_n(8, mu);
    list.push_back({"example2_adaptive_n8", Landscape(mu, sigma),
                    example2_adaptive_dispersal(8), 5.0});
  }
  return list;
}

// Deterministic random generators for property-style tests.

inline Vec random_interior_simplex(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vec p(n);
  for (int i = 0; i < n; ++i) p[i] = u(gen);
  return p / p.sum();
}

inline Mat random_irreducible_generator(std::mt19937& gen, int n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  Mat q(n, n);
  for (int i = 0; i < n; ++i) {
    double row = 0.0;
    for (int j = 0; j < n; ++j) {
      if (i == j) continue;
      q(i, j) = u(gen);
      row += q(i, j);
    }
    q(i, i) = -row;
  }
  return q;
}

// Detailed balance by construction: rates w_ij / pi_i with symmetric w.
inline Mat random_reversible_generator(std::mt19937& gen, int n, Vec* pi_out = nullptr) {
  std::uniform_real_distribution<double> u(0.2, 1.0);
  Vec pi = random_interior_simplex(gen, n);
  Mat q = Mat::Zero(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      double w = u(gen);
      q(i, j) = w / pi[i];
      q(j, i) = w / pi[j];
    }
  for (int i = 0; i < n; ++i) q(i, i) = -q.row(i).sum() + q(i, i);
  if (pi_out) *pi_out = pi;
  return q;
}

inline Mat random_spd_matrix(std::mt19937& gen, int n, double floor = 0.05) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat a(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) a(i, j) = g(gen);
  return a.transpose() * a + floor * Mat::Identity(n, n);
}

inline Vec random_mu(std::mt19937& gen, int n, double lo = -0.5, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Vec mu(n);
  for (int i = 0; i < n; ++i) mu[i] = u(gen);
  return mu;
}

}  // namespace corpus
