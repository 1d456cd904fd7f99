#ifndef GLCM_SCHEDULER_HPP
#define GLCM_SCHEDULER_HPP

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "glcm/error.hpp"

namespace glcm {

// Default scale of the consistency-coefficient time variable, tau(t) = scale * t / T.
// At 5e4 and T = 50 the last evaluated step sits at tau(1) = 1000, where
// c_skip(1) = 2.5e-7 and the t = 1 output is the consistency estimate itself.
inline constexpr double kDefaultTimestepScale = 5.0e4;
inline constexpr double kDefaultSigmaData = 0.5;

// Timestep-indexed noise quantities. Timesteps are 1-based, t = 1..T; t = 0 only exists
// for the c_skip / c_out boundary.
struct Schedule {
  int T = 0;
  std::vector<double> betas;       // betas[t-1]
  std::vector<double> alphas;      // alphas[t-1] = 1 - betas[t-1]
  std::vector<double> alpha_bars;  // cumulative product
  double sigma_data = kDefaultSigmaData;
  double timestep_scale = kDefaultTimestepScale;

  double beta(int t) const { return betas.at(static_cast<std::size_t>(check(t) - 1)); }
  double alpha(int t) const { return alphas.at(static_cast<std::size_t>(check(t) - 1)); }
  double alpha_bar(int t) const { return alpha_bars.at(static_cast<std::size_t>(check(t) - 1)); }

  // alpha and alpha_bar extended to t = 0 (alpha_0 = alpha_bar_0 = 1).
  double alpha_or_one(int t) const { return t == 0 ? 1.0 : alpha(t); }
  double alpha_bar_or_one(int t) const { return t == 0 ? 1.0 : alpha_bar(t); }

  friend bool operator==(const Schedule&, const Schedule&) = default;

private:
  int check(int t) const {
    if (t < 1 || t > T)
      throw ConfigError("timestep " + std::to_string(t) + " outside 1.." + std::to_string(T));
    return t;
  }
};

// Scaled-linear schedule: beta interpolated linearly in sqrt space between the endpoints.
inline Schedule make_schedule(int T, double beta_start, double beta_end,
                              double sigma_data = kDefaultSigmaData,
                              double timestep_scale = kDefaultTimestepScale) {
  if (T < 1) throw ConfigError("schedule needs T >= 1, got " + std::to_string(T));
  if (!(beta_start > 0.0 && beta_start < 1.0) || !(beta_end > 0.0 && beta_end < 1.0))
    throw ConfigError("beta endpoints must lie in (0,1)");
  if (beta_start > beta_end)
    throw ConfigError("beta_start (" + std::to_string(beta_start) + ") exceeds beta_end (" +
                      std::to_string(beta_end) + ")");
  if (!(sigma_data > 0.0) || !std::isfinite(sigma_data))
    throw ConfigError("sigma_data must be positive");
  if (!(timestep_scale > 0.0) || !std::isfinite(timestep_scale))
    throw ConfigError("timestep_scale must be positive");

  Schedule s;
  s.T = T;
  s.sigma_data = sigma_data;
  s.timestep_scale = timestep_scale;
  s.betas.resize(T);
  const double lo = std::sqrt(beta_start);
  const double hi = std::sqrt(beta_end);
  for (int i = 0; i < T; ++i) {
    const double frac = T == 1 ? 0.0 : static_cast<double>(i) / (T - 1);
    const double r = lo + frac * (hi - lo);
    s.betas[i] = r * r;
  }
  // Endpoints are pinned so round-tripping through sqrt cannot perturb them.
  s.betas.front() = beta_start;
  if (T > 1) s.betas.back() = beta_end;

  s.alphas.resize(T);
  s.alpha_bars.resize(T);
  double acc = 1.0;
  for (int i = 0; i < T; ++i) {
    s.alphas[i] = 1.0 - s.betas[i];
    acc *= s.alphas[i];
    s.alpha_bars[i] = acc;
  }
  return s;
}

namespace detail {
inline double consistency_tau(const Schedule& s, int t) {
  if (t < 0 || t > s.T)
    throw ConfigError("consistency timestep " + std::to_string(t) + " outside 0.." +
                      std::to_string(s.T));
  return s.timestep_scale * static_cast<double>(t) / s.T;
}
}  // namespace detail

// c_skip(t) = sigma^2 / (tau^2 + sigma^2); exactly 1 at t = 0.
inline double c_skip(const Schedule& s, int t) {
  const double tau = detail::consistency_tau(s, t);
  const double s2 = s.sigma_data * s.sigma_data;
  return s2 / (tau * tau + s2);
}

// c_out(t) = tau / sqrt(tau^2 + sigma^2); exactly 0 at t = 0.
inline double c_out(const Schedule& s, int t) {
  const double tau = detail::consistency_tau(s, t);
  return tau / std::sqrt(tau * tau + s.sigma_data * s.sigma_data);
}

// Plain-text table: t, beta, alpha, alpha_bar, c_skip, c_out. Row t = 0 carries the boundary.
inline void dump_schedule(std::ostream& os, const Schedule& s) {
  char line[256];
  std::snprintf(line, sizeof line, "# T=%d sigma_data=%.17g timestep_scale=%.17g\n", s.T,
                s.sigma_data, s.timestep_scale);
  os << line;
  os << "t\tbeta\talpha\talpha_bar\tc_skip\tc_out\n";
  std::snprintf(line, sizeof line, "0\t0\t1\t1\t%.17g\t%.17g\n", c_skip(s, 0), c_out(s, 0));
  os << line;
  for (int t = 1; t <= s.T; ++t) {
    std::snprintf(line, sizeof line, "%d\t%.17g\t%.17g\t%.17g\t%.17g\t%.17g\n", t, s.beta(t),
                  s.alpha(t), s.alpha_bar(t), c_skip(s, t), c_out(s, t));
    os << line;
  }
}

}  // namespace glcm

#endif  // GLCM_SCHEDULER_HPP
