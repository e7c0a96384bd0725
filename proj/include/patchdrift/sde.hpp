#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <thread>
#include <vector>

#include "patchdrift/dispersal.hpp"
#include "patchdrift/errors.hpp"
#include "patchdrift/estimates.hpp"
#include "patchdrift/landscape.hpp"
#include "patchdrift/rng.hpp"

namespace patchdrift {

enum class Scheme {
  LogAbundance,  // exact noise/growth flow composed with the exact dispersal semigroup
  Fraction,      // Euler-Maruyama on the patch-fraction equation with simplex projection
};

struct SimConfig {
  double dt = 1e-3;
  double horizon = 2000.0;
  double burn_in = 100.0;
  int replicates = 16;
  int segments = 20;
  std::uint64_t seed = 12345;
  Scheme scheme = Scheme::LogAbundance;
  long path_stride = 0;  // record every k-th step; 0 disables path output

  void validate() const {
    if (!(dt > 0.0)) throw Error(ErrorCode::ModelError, "dt must be positive");
    if (!(burn_in >= 0.0) || !(burn_in < horizon))
      throw Error(ErrorCode::ModelError, "burn-in must lie in [0, horizon)");
    if (replicates < 1) throw Error(ErrorCode::ModelError, "need at least one replicate");
    if (segments < 1) throw Error(ErrorCode::ModelError, "need at least one segment");
  }
};

struct PathPoint {
  double t;
  double log_total;
  Vec y;
};

struct SimPath {
  std::vector<PathPoint> points;
};

struct OccupationMoments {
  Vec mean;
  Mat second;
  double sample_time = 0.0;
  std::vector<Vec> segment_mean;
  std::vector<Mat> segment_second;
};

inline int resolve_threads(int requested = 0) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("PATCHDRIFT_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

namespace detail {

inline void check_generator_shape(const Mat& d, int n) {
  if (d.rows() != n || d.cols() != n)
    throw Error(ErrorCode::ModelError, "dispersal matrix dimension does not match landscape");
  double scale = d.cwiseAbs().maxCoeff();
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j)
      if (i != j && d(i, j) < 0.0)
        throw Error(ErrorCode::NegativeOffDiagonal, "dispersal rate is negative");
    if (std::abs(d.row(i).sum()) > 1e-12 * std::max(1.0, scale))
      throw Error(ErrorCode::NonZeroRowSum, "dispersal row sums must vanish");
  }
}

inline bool has_movement(const Mat& d) {
  const int n = static_cast<int>(d.rows());
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      if (i != j && d(i, j) > 0.0) return true;
  return false;
}

// Initial fractions: the stationary distribution when the movement graph
// supports one, uniform otherwise.
inline Vec initial_fractions(const Mat& d) {
  const int n = static_cast<int>(d.rows());
  if (n > 1 && strongly_connected(d)) return stationary_of_generator(d);
  return Vec::Constant(n, 1.0 / n);
}

struct StepGrid {
  long burn_steps;
  long seg_steps;
  long total_steps;
};

inline StepGrid make_grid(const SimConfig& cfg) {
  long burn = std::lround(cfg.burn_in / cfg.dt);
  long active = std::lround((cfg.horizon - cfg.burn_in) / cfg.dt);
  long seg = active / cfg.segments;
  if (seg < 1)
    throw Error(ErrorCode::ModelError, "horizon too short for the requested segment count");
  return StepGrid{burn, seg, burn + seg * cfg.segments};
}

// Accumulators for one replicate. Segment boundaries are step counts, so
// the same trajectory yields the same statistics on any thread.
struct ReplicateStats {
  std::vector<double> seg_chi;
  std::vector<Vec> seg_mean;
  std::vector<Mat> seg_second;
  SimPath path;
};

class LogAbundanceWorker {
 public:
  LogAbundanceWorker(const Landscape& land, const Mat& d, const SimConfig& cfg)
      : land_(land), cfg_(cfg), grid_(make_grid(cfg)), y0_(initial_fractions(d)) {
    drift_ = (land.mu() - 0.5 * land.sigma().diagonal()) * cfg.dt;
    transition_ = (cfg.dt * d).exp().transpose();  // column-stochastic step map
    identity_step_ = !has_movement(d);
    sqrt_dt_ = std::sqrt(cfg.dt);
  }

  ReplicateStats run(int replicate) const {
    const int n = land_.n();
    NormalStream rng(cfg_.seed, static_cast<std::uint64_t>(replicate));
    Vec h = y0_.array().log().matrix();
    double offset = 0.0;

    ReplicateStats out;
    out.seg_chi.reserve(cfg_.segments);

    Vec z(n), noise(n), w(n), mixed(n);
    Vec seg_sum = Vec::Zero(n);
    Mat seg_outer = Mat::Zero(n, n);
    Vec y(n);

    auto log_total = [&](const Vec& hv) {
      double m = hv.maxCoeff();
      double s = 0.0;
      for (int i = 0; i < n; ++i) s += std::exp(hv[i] - m);
      return offset + m + std::log(s);
    };
    auto fractions = [&](const Vec& hv, Vec& out_y) {
      double m = hv.maxCoeff();
      double s = 0.0;
      for (int i = 0; i < n; ++i) {
        out_y[i] = std::exp(hv[i] - m);
        s += out_y[i];
      }
      out_y /= s;
    };

    double prev_boundary_logS = 0.0;
    if (grid_.burn_steps == 0) prev_boundary_logS = log_total(h);

    for (long step = 0; step < grid_.total_steps; ++step) {
      for (int i = 0; i < n; ++i) z[i] = rng.next();
      noise.noalias() = land_.gamma_t() * z;
      h += drift_;
      h += sqrt_dt_ * noise;

      if (!identity_step_) {
        double m = h.maxCoeff();
        for (int i = 0; i < n; ++i) w[i] = std::exp(h[i] - m);
        mixed.noalias() = transition_ * w;
        for (int i = 0; i < n; ++i) h[i] = m + std::log(mixed[i]);
      }

      // Keep the working range of h bounded; the discarded level is
      // carried in the log-total offset.
      double m = h.maxCoeff();
      if (m > 600.0 || m < -600.0) {
        h.array() -= m;
        offset += m;
      }

      long done = step + 1;
      bool in_segments = done > grid_.burn_steps;
      if (in_segments) {
        fractions(h, y);
        seg_sum += y;
        seg_outer.noalias() += y * y.transpose();
      }

      if (cfg_.path_stride > 0 && done % cfg_.path_stride == 0) {
        fractions(h, y);
        out.path.points.push_back(PathPoint{done * cfg_.dt, log_total(h), y});
      }

      if (done == grid_.burn_steps) {
        prev_boundary_logS = log_total(h);
      } else if (in_segments && (done - grid_.burn_steps) % grid_.seg_steps == 0) {
        double boundary_logS = log_total(h);
        out.seg_chi.push_back((boundary_logS - prev_boundary_logS) /
                              (grid_.seg_steps * cfg_.dt));
        prev_boundary_logS = boundary_logS;
        out.seg_mean.push_back(seg_sum / static_cast<double>(grid_.seg_steps));
        out.seg_second.push_back(seg_outer / static_cast<double>(grid_.seg_steps));
        seg_sum.setZero();
        seg_outer.setZero();
      }
    }
    return out;
  }

 private:
  const Landscape& land_;
  SimConfig cfg_;
  StepGrid grid_;
  Vec y0_;
  Vec drift_;
  Mat transition_;
  bool identity_step_ = false;
  double sqrt_dt_ = 0.0;
};

class FractionWorker {
 public:
  FractionWorker(const Landscape& land, const Mat& d, const SimConfig& cfg)
      : land_(land), d_t_(d.transpose()), cfg_(cfg), grid_(make_grid(cfg)),
        y0_(initial_fractions(d)) {
    sqrt_dt_ = std::sqrt(cfg.dt);
  }

  ReplicateStats run(int replicate) const {
    const int n = land_.n();
    NormalStream rng(cfg_.seed, static_cast<std::uint64_t>(replicate));
    Vec y = y0_;

    ReplicateStats out;
    Vec z(n), noise(n), grad(n), raw(n);
    Vec seg_sum = Vec::Zero(n);
    Mat seg_outer = Mat::Zero(n, n);

    for (long step = 0; step < grid_.total_steps; ++step) {
      for (int i = 0; i < n; ++i) z[i] = rng.next();
      noise.noalias() = land_.gamma_t() * z;
      grad = land_.mu() - land_.sigma() * y;
      double y_dot_noise = y.dot(noise);
      double y_dot_grad = y.dot(grad);
      // (diag(y) - y y^T) applied to the noise and drift directions.
      raw = y + cfg_.dt * (d_t_ * y) +
            cfg_.dt * (y.cwiseProduct(grad) - y_dot_grad * y) +
            sqrt_dt_ * (y.cwiseProduct(noise) - y_dot_noise * y);

      Vec clipped = raw.cwiseMax(0.0);
      double s = clipped.sum();
      if (!(s > 0.0))
        throw Error(ErrorCode::StepTooLarge, "all fractions clipped to zero in one step");
      Vec projected = clipped / s;
      if ((projected - raw).cwiseAbs().maxCoeff() > 0.1)
        throw Error(ErrorCode::StepTooLarge,
                    "simplex projection moved the state by more than 0.1; reduce dt");
      y = projected;

      long done = step + 1;
      bool in_segments = done > grid_.burn_steps;
      if (in_segments) {
        seg_sum += y;
        seg_outer.noalias() += y * y.transpose();
        if ((done - grid_.burn_steps) % grid_.seg_steps == 0) {
          out.seg_mean.push_back(seg_sum / static_cast<double>(grid_.seg_steps));
          out.seg_second.push_back(seg_outer / static_cast<double>(grid_.seg_steps));
          seg_sum.setZero();
          seg_outer.setZero();
        }
      }
      if (cfg_.path_stride > 0 && done % cfg_.path_stride == 0)
        out.path.points.push_back(PathPoint{done * cfg_.dt,
                                            std::numeric_limits<double>::quiet_NaN(), y});
    }
    return out;
  }

 private:
  const Landscape& land_;
  Mat d_t_;
  SimConfig cfg_;
  StepGrid grid_;
  Vec y0_;
  double sqrt_dt_ = 0.0;
};

template <typename Worker>
std::vector<ReplicateStats> run_all_replicates(const Worker& worker, int replicates,
                                               int threads) {
  std::vector<ReplicateStats> results(replicates);
  int workers = std::min(resolve_threads(threads), replicates);
  if (workers <= 1) {
    for (int r = 0; r < replicates; ++r) results[r] = worker.run(r);
    return results;
  }
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(workers);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&, w]() {
      try {
        for (int r = next.fetch_add(1); r < replicates; r = next.fetch_add(1))
          results[r] = worker.run(r);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  return results;
}

}  // namespace detail

// Trajectory of the log-abundance system; fractions and log-total are
// sampled every path_stride steps.
inline SimPath simulate_log_abundances(const Landscape& land, const Mat& dispersal,
                                       SimConfig cfg, int replicate = 0) {
  cfg.validate();
  detail::check_generator_shape(dispersal, land.n());
  if (cfg.path_stride <= 0) cfg.path_stride = 1;
  detail::LogAbundanceWorker worker(land, dispersal, cfg);
  return worker.run(replicate).path;
}

inline SimPath simulate_fractions(const Landscape& land, const Mat& dispersal, SimConfig cfg,
                                  int replicate = 0) {
  cfg.validate();
  detail::check_generator_shape(dispersal, land.n());
  if (cfg.path_stride <= 0) cfg.path_stride = 1;
  detail::FractionWorker worker(land, dispersal, cfg);
  return worker.run(replicate).path;
}

// Growth rate from the slope of log total abundance, with the standard
// error taken across non-overlapping time segments pooled over replicates.
inline GrowthEstimate estimate_chi_mc(const Landscape& land, const Mat& dispersal,
                                      SimConfig cfg, int threads = 0) {
  cfg.validate();
  detail::check_generator_shape(dispersal, land.n());
  cfg.path_stride = 0;
  cfg.scheme = Scheme::LogAbundance;
  detail::LogAbundanceWorker worker(land, dispersal, cfg);
  auto stats = detail::run_all_replicates(worker, cfg.replicates, threads);

  std::vector<double> seg;
  for (const auto& s : stats) seg.insert(seg.end(), s.seg_chi.begin(), s.seg_chi.end());
  const int n_seg = static_cast<int>(seg.size());
  double mean = 0.0;
  for (double v : seg) mean += v;
  mean /= n_seg;
  double var = 0.0;
  for (double v : seg) var += (v - mean) * (v - mean);
  double se = n_seg > 1 ? std::sqrt(var / (n_seg - 1) / n_seg) : 0.0;
  return GrowthEstimate{mean, se, Method::mc_logS, n_seg};
}

// Time averages of Y and YY^T after burn-in, pooled over replicates.
inline OccupationMoments occupation_moments(const Landscape& land, const Mat& dispersal,
                                            SimConfig cfg, int threads = 0) {
  cfg.validate();
  detail::check_generator_shape(dispersal, land.n());
  if (!detail::has_movement(dispersal))
    throw Error(ErrorCode::DegenerateNoDispersal,
                "occupation moments are degenerate without movement");
  cfg.path_stride = 0;

  std::vector<detail::ReplicateStats> stats;
  if (cfg.scheme == Scheme::Fraction) {
    detail::FractionWorker worker(land, dispersal, cfg);
    stats = detail::run_all_replicates(worker, cfg.replicates, threads);
  } else {
    detail::LogAbundanceWorker worker(land, dispersal, cfg);
    stats = detail::run_all_replicates(worker, cfg.replicates, threads);
  }

  OccupationMoments m;
  m.mean = Vec::Zero(land.n());
  m.second = Mat::Zero(land.n(), land.n());
  for (const auto& s : stats) {
    for (std::size_t k = 0; k < s.seg_mean.size(); ++k) {
      m.segment_mean.push_back(s.seg_mean[k]);
      m.segment_second.push_back(s.seg_second[k]);
      m.mean += s.seg_mean[k];
      m.second += s.seg_second[k];
    }
  }
  const double count = static_cast<double>(m.segment_mean.size());
  m.mean /= count;
  m.second /= count;
  m.second = 0.5 * (m.second + m.second.transpose());
  m.sample_time = (cfg.horizon - cfg.burn_in) * cfg.replicates;
  return m;
}

// Slope estimate and occupation moments from one set of trajectories, so
// the two growth-rate routes are paired sample by sample.
struct McBundle {
  GrowthEstimate chi;
  OccupationMoments moments;
};

inline McBundle mc_bundle(const Landscape& land, const Mat& dispersal, SimConfig cfg,
                          int threads = 0) {
  cfg.validate();
  detail::check_generator_shape(dispersal, land.n());
  cfg.path_stride = 0;
  detail::LogAbundanceWorker worker(land, dispersal, cfg);
  auto stats = detail::run_all_replicates(worker, cfg.replicates, threads);

  McBundle out;
  std::vector<double> seg;
  out.moments.mean = Vec::Zero(land.n());
  out.moments.second = Mat::Zero(land.n(), land.n());
  for (const auto& s : stats) {
    seg.insert(seg.end(), s.seg_chi.begin(), s.seg_chi.end());
    for (std::size_t k = 0; k < s.seg_mean.size(); ++k) {
      out.moments.segment_mean.push_back(s.seg_mean[k]);
      out.moments.segment_second.push_back(s.seg_second[k]);
      out.moments.mean += s.seg_mean[k];
      out.moments.second += s.seg_second[k];
    }
  }
  const int n_seg = static_cast<int>(seg.size());
  double mean = 0.0;
  for (double v : seg) mean += v;
  mean /= n_seg;
  double var = 0.0;
  for (double v : seg) var += (v - mean) * (v - mean);
  double se = n_seg > 1 ? std::sqrt(var / (n_seg - 1) / n_seg) : 0.0;
  out.chi = GrowthEstimate{mean, se, Method::mc_logS, n_seg};

  const double count = static_cast<double>(out.moments.segment_mean.size());
  out.moments.mean /= count;
  out.moments.second /= count;
  out.moments.second = 0.5 * (out.moments.second + out.moments.second.transpose());
  out.moments.sample_time = (cfg.horizon - cfg.burn_in) * cfg.replicates;
  return out;
}

// Growth rate via the moment identity: chi = mu.E[Y] - Tr(E[YY^T] Sigma)/2.
inline GrowthEstimate chi_from_moments(const Landscape& land, const OccupationMoments& m) {
  auto chi_of = [&](const Vec& mean, const Mat& second) {
    return land.mu().dot(mean) - 0.5 * (second * land.sigma()).trace();
  };
  const int n_seg = static_cast<int>(m.segment_mean.size());
  if (n_seg == 0) {
    return GrowthEstimate{chi_of(m.mean, m.second), 0.0, Method::mc_moments, 0};
  }
  double mean = 0.0;
  std::vector<double> vals(n_seg);
  for (int k = 0; k < n_seg; ++k) {
    vals[k] = chi_of(m.segment_mean[k], m.segment_second[k]);
    mean += vals[k];
  }
  mean /= n_seg;
  double var = 0.0;
  for (double v : vals) var += (v - mean) * (v - mean);
  double se = n_seg > 1 ? std::sqrt(var / (n_seg - 1) / n_seg) : 0.0;
  return GrowthEstimate{mean, se, Method::mc_moments, n_seg};
}

}  // namespace patchdrift
