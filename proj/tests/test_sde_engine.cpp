#include <catch2/catch_amalgamated.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <map>

#include "patchdrift/sde.hpp"
#include "patchdrift/twopatch.hpp"

#include "corpus.hpp"

using namespace patchdrift;
using corpus::make_vec;

namespace {

SimConfig quick_config(double horizon = 400.0, int replicates = 8) {
  SimConfig cfg;
  cfg.horizon = horizon;
  cfg.burn_in = 50.0;
  cfg.replicates = replicates;
  cfg.segments = 10;
  cfg.seed = 20260809;
  return cfg;
}

double combined_3se(const GrowthEstimate& a, const GrowthEstimate& b) {
  return 3.0 * std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace

TEST_CASE("single patch recovers mu - sigma^2/2") {
  Landscape land(make_vec({0.3}), Mat::Identity(1, 1));
  Mat d = Mat::Zero(1, 1);
  GrowthEstimate est = estimate_chi_mc(land, d, quick_config(1000.0));
  CHECK(std::abs(est.chi - (-0.2)) <= 3.0 * est.std_error);
  CHECK(est.method == Method::mc_logS);
  CHECK(est.segments >= 10);
}

TEST_CASE("without movement the best patch dominates") {
  Landscape land(make_vec({0.3, 0.1}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat d = Mat::Zero(2, 2);
  GrowthEstimate est = estimate_chi_mc(land, d, quick_config(1000.0));
  double expected = 0.3 - 0.5;  // both patches shrink; the larger drift wins
  CHECK(std::abs(est.chi - expected) <= 3.0 * est.std_error);
}

TEST_CASE("vanishing noise reduces to the deterministic growth eigenvalue") {
  Vec mu = make_vec({0.5, 0.1, 0.3});
  Mat sigma = 1e-8 * Mat::Identity(3, 3);
  Landscape land(mu, sigma);
  Mat q = corpus::ring_generator(3);
  SimConfig cfg;
  cfg.dt = 1e-4;
  cfg.horizon = 60.0;
  cfg.burn_in = 10.0;
  cfg.replicates = 2;
  cfg.segments = 10;
  GrowthEstimate est = estimate_chi_mc(land, q, cfg);

  Eigen::EigenSolver<Mat> es(Mat(mu.asDiagonal()) + q.transpose());
  double lead = -1e9;
  for (int k = 0; k < 3; ++k) lead = std::max(lead, es.eigenvalues()[k].real());
  CHECK(std::abs(est.chi - lead) < 2e-3);
}

TEST_CASE("identical seeds give bit-identical estimates at any thread count") {
  Landscape land(make_vec({10.0, 1.0, 1.0, 1.0}), 16.0 * Mat::Identity(4, 4));
  std::mt19937 gen(3);
  Mat q = corpus::random_irreducible_generator(gen, 4);
  SimConfig cfg = quick_config(150.0, 5);
  GrowthEstimate one = estimate_chi_mc(land, q, cfg, 1);
  GrowthEstimate two = estimate_chi_mc(land, q, cfg, 2);
  GrowthEstimate four = estimate_chi_mc(land, q, cfg, 4);
  CHECK(one.chi == two.chi);
  CHECK(one.std_error == two.std_error);
  CHECK(one.chi == four.chi);

  cfg.seed += 1;
  GrowthEstimate other = estimate_chi_mc(land, q, cfg, 2);
  CHECK(one.chi != other.chi);
}

TEST_CASE("fraction paths stay on the simplex after projection") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat d = build_levins(2).q();
  SimConfig cfg = quick_config(20.0, 1);
  cfg.burn_in = 2.0;
  cfg.path_stride = 10;
  SimPath path = simulate_fractions(land, d, cfg);
  REQUIRE(!path.points.empty());
  for (const auto& pt : path.points) {
    double sum = 0.0;
    for (int i = 0; i < pt.y.size(); ++i) {
      CHECK(pt.y[i] >= 0.0);
      sum += pt.y[i];
    }
    CHECK(std::abs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("projection displacement guard reports a too-coarse step") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat d = 100.0 * build_levins(2).q();
  SimConfig cfg = quick_config(20.0, 1);
  cfg.burn_in = 2.0;
  cfg.dt = 0.05;
  cfg.scheme = Scheme::Fraction;
  REQUIRE_THROWS_MATCHES(occupation_moments(land, d, cfg), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::StepTooLarge;
                         }));
}

TEST_CASE("occupation moments refuse a landscape without movement") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  REQUIRE_THROWS_MATCHES(occupation_moments(land, Mat::Zero(2, 2), quick_config()), Error,
                         Catch::Matchers::Predicate<Error>([](const Error& e) {
                           return e.code() == ErrorCode::DegenerateNoDispersal;
                         }));
}

TEST_CASE("two symmetric patches split evenly on average") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat d = build_levins(2).q();
  for (Scheme scheme : {Scheme::LogAbundance, Scheme::Fraction}) {
    SimConfig cfg = quick_config(600.0, 4);
    cfg.scheme = scheme;
    OccupationMoments m = occupation_moments(land, d, cfg);
    double se = 0.0;
    {
      double mean = 0.0;
      for (const auto& s : m.segment_mean) mean += s[0];
      mean /= m.segment_mean.size();
      double var = 0.0;
      for (const auto& s : m.segment_mean) var += (s[0] - mean) * (s[0] - mean);
      se = std::sqrt(var / (m.segment_mean.size() - 1) / m.segment_mean.size());
    }
    CHECK(std::abs(m.mean[0] - 0.5) <= 3.0 * se + 1e-4);
    CHECK(std::abs(m.mean.sum() - 1.0) < 1e-9);
    CHECK((m.second - m.second.transpose()).cwiseAbs().maxCoeff() < 1e-14);
    for (int i = 0; i < 2; ++i) CHECK(m.second(i, i) <= m.mean[i] + 3.0 * se);
  }
}

TEST_CASE("fast mixing drives the occupation mean to the stationary distribution") {
  Vec pi = make_vec({0.2, 0.3, 0.5});
  DispersalMatrix q = build_resampling_dispersal(pi);
  Landscape land(make_vec({0.2, 0.3, 0.4}), build_exchangeable_sigma(3, 1.0, 0.3));
  SimConfig cfg = quick_config(300.0, 4);
  OccupationMoments m = occupation_moments(land, 50.0 * q.q(), cfg);
  for (int i = 0; i < 3; ++i) CHECK(std::abs(m.mean[i] - pi[i]) < 0.01);
  Mat outer = pi * pi.transpose();
  CHECK((m.second - outer).cwiseAbs().maxCoeff() < 0.01);
}

TEST_CASE("the co-occupancy term grows with the dispersal rate") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat q = build_levins(2).q();
  double prev = -1.0;
  for (double delta : {0.5, 2.0, 8.0}) {
    OccupationMoments m = occupation_moments(land, delta * q, quick_config(400.0, 4));
    // E[Y(1-Y)] = E[Y] - E[Y^2] rises toward 1/4 as mixing strengthens.
    double spread = m.mean[0] - m.second(0, 0);
    CHECK(spread > prev);
    prev = spread;
  }
  CHECK(prev < 0.25 + 1e-6);
}

TEST_CASE("moment identity and slope estimator agree on paired runs") {
  auto scenarios = corpus::consistency_corpus();
  for (std::size_t idx : {std::size_t(0), std::size_t(2)}) {
    const auto& sc = scenarios[idx];
    SimConfig cfg = quick_config(400.0, 8);
    McBundle bundle = mc_bundle(sc.landscape, sc.delta * sc.unit_dispersal.q(), cfg);
    GrowthEstimate from_moments = chi_from_moments(sc.landscape, bundle.moments);
    CHECK(std::abs(bundle.chi.chi - from_moments.chi) <=
          combined_3se(bundle.chi, from_moments));
  }
}

TEST_CASE("moment identity on exact inputs") {
  Vec pi = make_vec({0.2, 0.3, 0.5});
  Landscape land(make_vec({0.2, 0.3, 0.4}), build_exchangeable_sigma(3, 1.0, 0.3));
  OccupationMoments m;
  m.mean = pi;
  m.second = pi * pi.transpose();
  m.sample_time = 1.0;
  GrowthEstimate est = chi_from_moments(land, m);
  double expected = land.mu().dot(pi) - 0.5 * pi.dot(land.sigma() * pi);
  CHECK(est.chi == Catch::Approx(expected).margin(1e-15));
  CHECK(est.method == Method::mc_moments);
}

TEST_CASE("halving the step leaves the estimate within tolerance") {
  Landscape land(make_vec({0.3, 0.3}), build_exchangeable_sigma(2, 1.0, 0.0));
  Mat d = build_levins(2).q();
  SimConfig cfg = quick_config(400.0, 8);
  cfg.dt = 2e-3;
  GrowthEstimate coarse = estimate_chi_mc(land, d, cfg);
  cfg.dt = 1e-3;
  GrowthEstimate fine = estimate_chi_mc(land, d, cfg);
  CHECK(std::abs(coarse.chi - fine.chi) <= std::max(combined_3se(coarse, fine), 5e-3));
}

TEST_CASE("empirical fraction density matches the analytic stationary density") {
  const double mu = 0.3, sigma2 = 1.0, delta = 1.0;
  Landscape land(make_vec({mu, mu}), build_exchangeable_sigma(2, sigma2, 0.0));
  Mat d = delta * build_levins(2).q();

  SimConfig cfg = quick_config(500.0, 4);
  cfg.path_stride = 5;
  const int bins = 40;
  std::vector<double> histogram(bins, 0.0);
  long samples = 0;
  for (int rep = 0; rep < cfg.replicates; ++rep) {
    SimPath path = simulate_fractions(land, d, cfg, rep);
    for (const auto& pt : path.points) {
      if (pt.t <= cfg.burn_in) continue;
      int b = std::min(bins - 1, static_cast<int>(pt.y[0] * bins));
      histogram[b] += 1.0;
      ++samples;
    }
  }

  StationaryDensity rho(symmetric_two_patch(mu, sigma2, delta));
  double l1 = 0.0;
  for (int b = 0; b < bins; ++b) {
    double lo = static_cast<double>(b) / bins;
    double hi = static_cast<double>(b + 1) / bins;
    auto f = [&](double y) { return rho(y); };
    double mass = integrate_adaptive(f, lo, hi, 1e-9, 1e-12).value;
    l1 += std::abs(histogram[b] / samples - mass);
  }
  CHECK(l1 <= 0.05);
}

TEST_CASE("log-abundance paths carry finite total abundance and fractions") {
  Landscape land(make_vec({0.5, -0.4}), build_exchangeable_sigma(2, 0.5, 0.0));
  Mat d = 0.3 * build_levins(2).q();
  SimConfig cfg = quick_config(50.0, 1);
  cfg.burn_in = 5.0;
  cfg.path_stride = 25;
  SimPath path = simulate_log_abundances(land, d, cfg);
  REQUIRE(path.points.size() > 10);
  for (const auto& pt : path.points) {
    CHECK(std::isfinite(pt.log_total));
    CHECK(std::abs(pt.y.sum() - 1.0) < 1e-12);
  }
}

TEST_CASE("config validation rejects inconsistent settings") {
  SimConfig cfg;
  cfg.dt = 0.0;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.burn_in = cfg.horizon;
  CHECK_THROWS_AS(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.replicates = 0;
  CHECK_THROWS_AS(cfg.validate(), Error);
}
