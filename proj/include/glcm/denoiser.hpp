#ifndef GLCM_DENOISER_HPP
#define GLCM_DENOISER_HPP

#include <cmath>
#include <optional>
#include <string>

#include "glcm/error.hpp"
#include "glcm/scheduler.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

enum class ConditionKind { global, local };

inline const char* to_string(ConditionKind k) { return k == ConditionKind::global ? "global" : "local"; }

// Encoded conditioning image. It is concatenated channel-wise with z_t, so its shape
// must equal the sample latent's.
struct Condition {
  Latent latent;
  ConditionKind kind = ConditionKind::global;
};

// Noise estimator eps(z_t, t, condition).
class NoiseEstimator {
public:
  virtual ~NoiseEstimator() = default;
  virtual Latent predict_noise(const Latent& z_t, int t, const Condition& cond) const = 0;
};

// Forward process: sqrt(abar_t) z0 + sqrt(1 - abar_t) eps.
inline Latent forward_noise(const Latent& z0, int t, const Latent& eps, const Schedule& schedule) {
  require_same_shape(z0, eps, "forward_noise");
  const double ab = schedule.alpha_bar(t);
  const double a = std::sqrt(ab);
  const double b = std::sqrt(1.0 - ab);
  Latent z(z0.channels, z0.height, z0.width);
  for (std::size_t i = 0; i < z.size(); ++i) z.values[i] = a * z0.values[i] + b * eps.values[i];
  return z;
}

// Analytic estimator for a known clean target: inverts the forward process exactly.
// Holds one target per condition kind; the local target defaults to the global one.
class OracleDenoiser final : public NoiseEstimator {
public:
  OracleDenoiser(Schedule schedule, Latent global_target, std::optional<Latent> local_target = {})
      : schedule_(std::move(schedule)), global_(std::move(global_target)),
        local_(local_target ? std::move(*local_target) : global_) {
    require_same_shape(global_, local_, "OracleDenoiser");
  }

  const Latent& target(ConditionKind kind) const {
    return kind == ConditionKind::global ? global_ : local_;
  }

  Latent predict_noise(const Latent& z_t, int t, const Condition& cond) const override {
    const Latent& z0 = target(cond.kind);
    require_same_shape(z_t, z0, "OracleDenoiser::predict_noise");
    require_same_shape(z_t, cond.latent, "OracleDenoiser::predict_noise condition");
    const double ab = schedule_.alpha_bar(t);
    const double a = std::sqrt(ab);
    const double inv = 1.0 / std::sqrt(1.0 - ab);
    Latent eps(z_t.channels, z_t.height, z_t.width);
    for (std::size_t i = 0; i < eps.size(); ++i)
      eps.values[i] = (z_t.values[i] - a * z0.values[i]) * inv;
    return eps;
  }

private:
  Schedule schedule_;
  Latent global_;
  Latent local_;
};

}  // namespace glcm

#endif  // GLCM_DENOISER_HPP
