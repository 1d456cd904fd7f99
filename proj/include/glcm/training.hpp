#ifndef GLCM_TRAINING_HPP
#define GLCM_TRAINING_HPP

#include <algorithm>
#include <cmath>
#include <concepts>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include "glcm/denoiser.hpp"
#include "glcm/error.hpp"
#include "glcm/rng.hpp"
#include "glcm/scheduler.hpp"
#include "glcm/toy_denoiser.hpp"

namespace glcm {

// A clean pair before noising: target latent z0 and its condition.
struct TrainingExample {
  Latent target;
  Condition cond;
};

// Draws t ~ U{1..T} then eps ~ N(0, I) for each item, in order, and noises the target.
inline std::vector<NoisyExample> noise_batch(std::span<const TrainingExample> batch,
                                             const Schedule& schedule, Rng& rng) {
  std::vector<NoisyExample> out;
  out.reserve(batch.size());
  for (const auto& ex : batch) {
    NoisyExample n;
    n.t = rng.uniform_int(1, schedule.T);
    n.eps = Latent(ex.target.channels, ex.target.height, ex.target.width);
    for (double& v : n.eps.values) v = rng.normal();
    n.z_t = forward_noise(ex.target, n.t, n.eps, schedule);
    n.cond = ex.cond;
    out.push_back(std::move(n));
  }
  return out;
}

// Noise-prediction loss of any estimator on a freshly noised batch (no update).
inline double noise_prediction_loss(const NoiseEstimator& model,
                                     std::span<const TrainingExample> batch,
                                     const Schedule& schedule, Rng& rng) {
  detail::require(!batch.empty(), "noise_prediction_loss: empty batch");
  double total = 0.0;
  std::size_t n = 0;
  for (const auto& ex : noise_batch(batch, schedule, rng)) {
    const Latent pred = model.predict_noise(ex.z_t, ex.t, ex.cond);
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double d = pred.values[i] - ex.eps.values[i];
      total += d * d;
    }
    n += pred.size();
  }
  return total / static_cast<double>(n);
}

// One SGD step on the noise-prediction loss. Returns the pre-update loss.
inline double train_step(ToyDenoiser& model, std::span<const TrainingExample> batch,
                         const Schedule& schedule, Rng& rng, double lr) {
  detail::require(!batch.empty(), "train_step: empty batch");
  detail::require(model.architecture().timesteps == schedule.T,
                  "train_step: model timestep table does not match schedule T");
  const auto noisy = noise_batch(batch, schedule, rng);
  std::vector<double> grad(model.parameters().size());
  const double loss = model.loss_and_gradient(noisy, grad);
  if (!std::isfinite(loss) || !all_finite(grad)) {
    std::ostringstream msg;
    msg << "non-finite training loss (" << loss << ") on batch of " << batch.size()
        << " items; timesteps:";
    for (const auto& n : noisy) msg << ' ' << n.t;
    throw NumericError(msg.str());
  }
  auto theta = model.parameters();
  for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * grad[i];
  return loss;
}

struct TrainOptions {
  int epochs = 25;
  int batch_size = 8;
  double lr = 1e-2;
  std::uint64_t seed = 7;
  // Stop after this many steps when > 0, regardless of epochs.
  int max_steps = 0;
};

// Epoch loop with a seeded shuffle per epoch. Returns the per-step pre-update losses.
inline std::vector<double> train(ToyDenoiser& model, std::span<const TrainingExample> data,
                                 const Schedule& schedule, const TrainOptions& opt) {
  detail::require(!data.empty(), "train: empty dataset");
  detail::require(opt.batch_size >= 1, "train: batch_size must be >= 1");
  detail::require(opt.lr > 0.0 && std::isfinite(opt.lr), "train: lr must be positive");
  Rng rng(opt.seed);
  std::vector<std::size_t> order(data.size());
  std::vector<double> losses;
  std::vector<TrainingExample> batch;
  for (int epoch = 0; epoch < opt.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[rng.next_u64() % i]);
    for (std::size_t start = 0; start < order.size(); start += opt.batch_size) {
      const std::size_t stop = std::min(order.size(), start + opt.batch_size);
      batch.clear();
      for (std::size_t i = start; i < stop; ++i) batch.push_back(data[order[i]]);
      losses.push_back(train_step(model, batch, schedule, rng, opt.lr));
      if (opt.max_steps > 0 && static_cast<int>(losses.size()) >= opt.max_steps) return losses;
    }
  }
  return losses;
}

// Anything with a flat parameter vector and an analytic loss gradient.
template <class M, class Probe>
concept DifferentiableModel = requires(M& m, const M& cm, const Probe& p, std::span<double> g) {
  { m.parameters() } -> std::convertible_to<std::span<double>>;
  { cm.loss(p) } -> std::convertible_to<double>;
  { cm.loss_and_gradient(p, g) } -> std::convertible_to<double>;
};

// Relative error floor: components with |analytic|,|numeric| below it compare absolutely.
inline constexpr double kGradientCheckFloor = 1e-6;

// Max relative error between analytic gradients and central finite differences.
template <class M, class Probe>
  requires DifferentiableModel<M, Probe>
double gradient_check(M& model, const Probe& probe, double step = 1e-4) {
  auto theta = model.parameters();
  std::vector<double> analytic(theta.size());
  model.loss_and_gradient(probe, std::span<double>(analytic));
  double worst = 0.0;
  for (std::size_t i = 0; i < theta.size(); ++i) {
    const double saved = theta[i];
    theta[i] = saved + step;
    const double up = model.loss(probe);
    theta[i] = saved - step;
    const double down = model.loss(probe);
    theta[i] = saved;
    const double numeric = (up - down) / (2.0 * step);
    const double denom =
        std::max({std::abs(analytic[i]), std::abs(numeric), kGradientCheckFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace glcm

#endif  // GLCM_TRAINING_HPP
