#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "patchdrift/quadrature.hpp"
#include "patchdrift/twopatch.hpp"

using namespace patchdrift;

TEST_CASE("adaptive quadrature on reference integrals") {
  auto poly = [](double x) { return x * x * x * x; };
  CHECK(integrate_adaptive(poly, 0.0, 1.0, 1e-12).value == Catch::Approx(0.2).epsilon(1e-13));

  auto expf = [](double x) { return std::exp(x); };
  CHECK(integrate_adaptive(expf, 0.0, 1.0, 1e-12).value ==
        Catch::Approx(std::exp(1.0) - 1.0).epsilon(1e-12));

  // Integrable endpoint singularity; forces adaptive splitting.
  auto inv_sqrt = [](double x) { return x > 0.0 ? 1.0 / std::sqrt(x) : 0.0; };
  CHECK(integrate_adaptive(inv_sqrt, 0.0, 1.0, 1e-9, 0.0, {1e-8, 1e-4, 1e-2}).value ==
        Catch::Approx(2.0).epsilon(1e-8));

  auto osc = [](double x) { return std::sin(10.0 * x); };
  CHECK(integrate_adaptive(osc, 0.0, 1.0, 1e-12).value ==
        Catch::Approx((1.0 - std::cos(10.0)) / 10.0).epsilon(1e-11));
}

TEST_CASE("stationary density normalizes across the parameter corpus") {
  std::vector<TwoPatchParams> corpus{
      symmetric_two_patch(0.3, 1.0, 1.0),
      symmetric_two_patch(0.3, 1.0, 0.05),
      symmetric_two_patch(0.3, 1.0, 40.0),
      TwoPatchParams{0.4, 0.1, 1.0, 0.5, 0.7, 0.2},
      TwoPatchParams{-0.2, 0.5, 2.0, 0.3, 3.0, 0.4},
  };
  for (const auto& p : corpus) {
    StationaryDensity rho(p);
    auto f = [&](double y) { return rho(y); };
    double total = integrate_adaptive(f, 0.0, 1.0, 1e-11, 0.0,
                                      {1e-10, 1e-6, 1e-3, 0.05, 0.5, 0.95, 1.0 - 1e-3,
                                       1.0 - 1e-6, 1.0 - 1e-10})
                       .value;
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
}

TEST_CASE("symmetric density has exchange symmetry and the known closed form") {
  const double mu = 0.3, sigma2 = 1.0, delta = 2.0;
  StationaryDensity rho(symmetric_two_patch(mu, sigma2, delta));

  // rho(y) = C y^{-1}(1-y)^{-1} exp(-delta/(2 sigma^2 y(1-y))) for this family.
  auto closed_log = [&](double y) {
    return -std::log(y) - std::log(1.0 - y) - delta / (2.0 * sigma2 * y * (1.0 - y));
  };
  double ref_ratio = std::log(rho(0.5)) - closed_log(0.5);
  for (double y : {0.05, 0.2, 0.35, 0.5, 0.72, 0.9, 0.97}) {
    CHECK(rho(y) == Catch::Approx(rho(1.0 - y)).epsilon(1e-11));
    CHECK(std::log(rho(y)) - closed_log(y) == Catch::Approx(ref_ratio).margin(1e-9));
  }
}

TEST_CASE("growth rate from quadrature: symmetric family behavior") {
  const double mu = 0.3, sigma2 = 1.0;
  double prev = -1e9;
  for (double delta : {0.1, 0.3, 1.0, 3.0, 10.0, 100.0}) {
    double chi = chi_quadrature(symmetric_two_patch(mu, sigma2, delta)).chi;
    CHECK(chi > prev);
    prev = chi;
  }
  // Large dispersal approaches mu - sigma^2/4.
  double chi_large = chi_quadrature(symmetric_two_patch(mu, sigma2, 1000.0)).chi;
  CHECK(std::abs(chi_large - (mu - sigma2 / 4.0)) < 1e-3);
}

TEST_CASE("symmetric asymptote values") {
  GrowthEstimate a = chi_symmetric_asymptote(10.0, 0.3, 1.0);
  CHECK(a.chi == Catch::Approx(0.04375).margin(1e-15));
  CHECK(a.method == Method::asymptote);
  CHECK(chi_symmetric_asymptote(1e12, 0.3, 1.0).chi == Catch::Approx(0.05).margin(1e-9));
}

TEST_CASE("asymptote error decays at the next order in 1/delta") {
  const double mu = 0.3, sigma2 = 1.0;
  auto err = [&](double delta) {
    double chi = chi_quadrature(symmetric_two_patch(mu, sigma2, delta)).chi;
    return std::abs(chi - chi_symmetric_asymptote(delta, mu, sigma2).chi);
  };
  double e20 = err(20.0), e40 = err(40.0), e80 = err(80.0);
  CHECK(e40 / e20 > 0.15);
  CHECK(e40 / e20 < 0.4);
  CHECK(e80 / e40 > 0.15);
  CHECK(e80 / e40 < 0.4);
}

TEST_CASE("strongly biased movement pins the population in one patch") {
  TwoPatchParams p;
  p.mu1 = 0.4;
  p.mu2 = -0.1;
  p.s1sq = 0.8;
  p.s2sq = 1.2;
  p.d12 = 1e-3;
  p.d21 = 1.0;  // into patch 1 a thousand times faster
  double chi = chi_quadrature(p).chi;
  CHECK(std::abs(chi - (p.mu1 - 0.5 * p.s1sq)) < 1e-2);
}

TEST_CASE("critical dispersal exists only at intermediate noise") {
  // 2 mu < sigma^2 < 4 mu: a sign change exists.
  auto root = critical_dispersal(symmetric_two_patch(0.3, 1.0, 1.0));
  REQUIRE(root.has_value());
  double chi_at_root = chi_quadrature(symmetric_two_patch(0.3, 1.0, *root)).chi;
  CHECK(std::abs(chi_at_root) < 1e-7);
  CHECK(chi_quadrature(symmetric_two_patch(0.3, 1.0, *root * 0.5)).chi < 0.0);
  CHECK(chi_quadrature(symmetric_two_patch(0.3, 1.0, *root * 2.0)).chi > 0.0);

  // Weak noise: positive growth at every dispersal rate.
  auto none_weak = critical_dispersal(symmetric_two_patch(0.3, 0.5, 1.0));
  CHECK_FALSE(none_weak.has_value());
  for (double d : {0.05, 1.0, 100.0})
    CHECK(chi_quadrature(symmetric_two_patch(0.3, 0.5, d)).chi > 0.0);

  // Strong noise: negative growth at every dispersal rate.
  auto none_strong = critical_dispersal(symmetric_two_patch(0.1, 1.0, 1.0));
  CHECK_FALSE(none_strong.has_value());
  for (double d : {0.05, 1.0, 100.0})
    CHECK(chi_quadrature(symmetric_two_patch(0.1, 1.0, d)).chi < 0.0);
}

TEST_CASE("relabeling the patches leaves the growth rate unchanged") {
  TwoPatchParams p{0.4, 0.1, 1.0, 0.5, 0.7, 0.2};
  TwoPatchParams swapped{p.mu2, p.mu1, p.s2sq, p.s1sq, p.d21, p.d12};
  CHECK(std::abs(chi_quadrature(p).chi - chi_quadrature(swapped).chi) < 1e-12);
}

TEST_CASE("two-patch parameter validation") {
  TwoPatchParams p = symmetric_two_patch(0.3, 1.0, 1.0);
  p.d12 = 0.0;
  CHECK_THROWS_AS(chi_quadrature(p), Error);
  p = symmetric_two_patch(0.3, 1.0, 1.0);
  p.s1sq = -1.0;
  CHECK_THROWS_AS(stationary_density(p), Error);
}
