#ifndef GLCM_SAMPLER_HPP
#define GLCM_SAMPLER_HPP

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>

#include "glcm/denoiser.hpp"
#include "glcm/error.hpp"
#include "glcm/rng.hpp"
#include "glcm/scheduler.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

enum class SamplePath { global, local, dual, fused };

// Which quantity the reverse step feeds through c_out.
enum class InnerTerm {
  // (z_t - (1 - alpha_t) / sqrt(1 - abar_t) * eps) / sqrt(alpha_t)
  posterior_mean,
  // (z_t - sqrt(1 - abar_t) * eps) / sqrt(abar_t)
  x0_prediction,
};

inline constexpr double kDefaultAlphaL = 3.0;

struct SamplerConfig {
  int steps = 50;
  double alpha_l = kDefaultAlphaL;
  std::uint64_t seed = 0;
  SamplePath path = SamplePath::dual;
  InnerTerm inner = InnerTerm::posterior_mean;
  // Both paths draw from the same noise stream instead of (seed, seed ^ 1).
  bool shared_noise = false;
};

struct ConditionSpec {
  Latent global;               // encode(cxr)
  std::optional<Latent> local; // encode(cxr * mask)
};

struct DualResult {
  Latent global_latent;
  Latent local_latent;
};

inline SamplePath parse_sample_path(const std::string& s) {
  if (s == "global") return SamplePath::global;
  if (s == "local") return SamplePath::local;
  if (s == "dual") return SamplePath::dual;
  if (s == "fused") return SamplePath::fused;
  throw ConfigError("unknown sampling path '" + s + "' (global|local|dual|fused)");
}

inline const char* to_string(SamplePath p) {
  switch (p) {
    case SamplePath::global: return "global";
    case SamplePath::local: return "local";
    case SamplePath::dual: return "dual";
    case SamplePath::fused: return "fused";
  }
  return "?";
}

inline InnerTerm parse_inner_term(const std::string& s) {
  if (s == "posterior_mean") return InnerTerm::posterior_mean;
  if (s == "x0_prediction") return InnerTerm::x0_prediction;
  throw ConfigError("unknown inner term '" + s + "' (posterior_mean|x0_prediction)");
}

inline const char* to_string(InnerTerm i) {
  return i == InnerTerm::posterior_mean ? "posterior_mean" : "x0_prediction";
}

// alpha_l * eps_local + (1 - alpha_l) * eps_global.
inline Latent leg_mix(const Latent& eps_local, const Latent& eps_global, double alpha_l) {
  require_same_shape(eps_local, eps_global, "leg_mix");
  detail::require(std::isfinite(alpha_l), "leg_mix: alpha_l must be finite");
  Latent out(eps_local.channels, eps_local.height, eps_local.width);
  const double wg = 1.0 - alpha_l;
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] = alpha_l * eps_local.values[i] + wg * eps_global.values[i];
  return out;
}

// The quantity m scaled by c_out in the reverse step.
inline Latent reverse_inner(const Latent& z_t, int t, const Latent& eps_hat,
                            const Schedule& schedule, InnerTerm inner = InnerTerm::posterior_mean) {
  require_same_shape(z_t, eps_hat, "reverse_step");
  const double ab = schedule.alpha_bar(t);
  double a_z, a_e;
  if (inner == InnerTerm::posterior_mean) {
    const double at = schedule.alpha(t);
    const double k = (1.0 - at) / std::sqrt(1.0 - ab);
    a_z = 1.0 / std::sqrt(at);
    a_e = -k / std::sqrt(at);
  } else {
    a_z = 1.0 / std::sqrt(ab);
    a_e = -std::sqrt(1.0 - ab) / std::sqrt(ab);
  }
  Latent m(z_t.channels, z_t.height, z_t.width);
  for (std::size_t i = 0; i < m.size(); ++i)
    m.values[i] = a_z * z_t.values[i] + a_e * eps_hat.values[i];
  return m;
}

// One multi-step consistency update from z_t to z_{t-1}. `noise` is only read for t > 1.
inline Latent reverse_step(const Latent& z_t, int t, const Latent& eps_hat, const Schedule& schedule,
                           const Latent& noise, InnerTerm inner = InnerTerm::posterior_mean) {
  const Latent m = reverse_inner(z_t, t, eps_hat, schedule, inner);
  const double co = c_out(schedule, t);
  const double cs = c_skip(schedule, t);
  Latent out(z_t.channels, z_t.height, z_t.width);
  if (t == 1) {
    for (std::size_t i = 0; i < out.size(); ++i)
      out.values[i] = co * m.values[i] + cs * z_t.values[i];
    return out;
  }
  require_same_shape(z_t, noise, "reverse_step noise");
  const double a_prev = schedule.alpha(t - 1);
  const double scale = std::sqrt(a_prev);
  const double sigma = (1.0 - a_prev) / std::sqrt(1.0 - schedule.alpha_bar(t - 1));
  for (std::size_t i = 0; i < out.size(); ++i)
    out.values[i] =
        scale * (co * m.values[i] + cs * z_t.values[i]) + sigma * noise.values[i];
  return out;
}

namespace detail {
inline Latent draw_normal(const NoiseStream& stream, std::uint64_t tag, int c, int h, int w) {
  Latent z(c, h, w);
  stream.substream(tag).fill_normal(z.values);
  return z;
}
}  // namespace detail

// Step-t noise of a stream (tag t); tag 0 is reserved for z_T.
inline Latent step_noise(const NoiseStream& stream, int t, const Latent& like) {
  return detail::draw_normal(stream, static_cast<std::uint64_t>(t), like.channels, like.height,
                             like.width);
}

inline Latent reverse_step(const Latent& z_t, int t, const Latent& eps_hat, const Schedule& schedule,
                           const NoiseStream& stream, InnerTerm inner = InnerTerm::posterior_mean) {
  if (t == 1) return reverse_step(z_t, t, eps_hat, schedule, z_t, inner);
  return reverse_step(z_t, t, eps_hat, schedule, step_noise(stream, t, z_t), inner);
}

// Runs the reverse chain from z_T ~ N(0, I) (stream key = config.seed) down to t = 1.
// config.path selects global conditioning or LEG-mixed local conditioning.
inline Latent sample(const NoiseEstimator& denoiser, const ConditionSpec& cond,
                     const Schedule& schedule, const SamplerConfig& config) {
  detail::require(config.steps == schedule.T, "sampler steps (" + std::to_string(config.steps) +
                                                  ") do not match schedule T (" +
                                                  std::to_string(schedule.T) + ")");
  detail::require(std::isfinite(config.alpha_l), "alpha_l must be finite");
  detail::require(config.path == SamplePath::global || config.path == SamplePath::local,
                  "sample() runs a single path; use dual_path_sample for both");
  const bool local = config.path == SamplePath::local;
  detail::require(!local || cond.local.has_value(), "local path needs a local condition");
  if (local) require_same_shape(cond.global, *cond.local, "sample conditions");

  const Condition global_c{cond.global, ConditionKind::global};
  const Condition local_c{local ? *cond.local : Latent{}, ConditionKind::local};

  const NoiseStream stream(config.seed);
  const Latent& shape = cond.global;
  Latent z = detail::draw_normal(stream, 0, shape.channels, shape.height, shape.width);
  for (int t = schedule.T; t >= 1; --t) {
    Latent eps;
    if (!local) {
      eps = denoiser.predict_noise(z, t, global_c);
    } else if (config.alpha_l == 1.0) {
      eps = denoiser.predict_noise(z, t, local_c);
    } else if (config.alpha_l == 0.0) {
      eps = denoiser.predict_noise(z, t, global_c);
    } else {
      eps = leg_mix(denoiser.predict_noise(z, t, local_c), denoiser.predict_noise(z, t, global_c),
                    config.alpha_l);
    }
    z = reverse_step(z, t, eps, schedule, stream, config.inner);
  }
  return z;
}

// Global path on stream `seed`, LEG local path on stream `seed ^ 1` (or `seed` when shared).
inline DualResult dual_path_sample(const NoiseEstimator& denoiser, const Latent& global_cond,
                                   const Latent& local_cond, const Schedule& schedule,
                                   const SamplerConfig& config) {
  require_same_shape(global_cond, local_cond, "dual_path_sample conditions");
  const ConditionSpec spec{global_cond, local_cond};
  SamplerConfig g = config;
  g.path = SamplePath::global;
  SamplerConfig l = config;
  l.path = SamplePath::local;
  if (!config.shared_noise) l.seed = config.seed ^ 1ULL;
  return {sample(denoiser, spec, schedule, g), sample(denoiser, spec, schedule, l)};
}

}  // namespace glcm

#endif  // GLCM_SAMPLER_HPP
