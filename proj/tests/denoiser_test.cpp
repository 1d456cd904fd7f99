#include <gtest/gtest.h>

#include <cmath>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "glcm/codec.hpp"
#include "glcm/denoiser.hpp"
#include "glcm/phantom.hpp"
#include "glcm/segmentation.hpp"
#include "glcm/toy_denoiser.hpp"
#include "glcm/training.hpp"

namespace glcm {
namespace {

Schedule default_schedule() { return make_schedule(50, 0.00085, 0.012); }

Latent random_latent(int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  Latent z(c, h, w);
  Rng rng(seed);
  for (double& v : z.values) v = scale * rng.normal();
  return z;
}

TEST(Oracle, InvertsForwardProcess) {
  const Schedule s = default_schedule();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Latent z0 = random_latent(2, 5, 7, seed, 0.3);
    const Latent eps = random_latent(2, 5, 7, seed + 100);
    const OracleDenoiser oracle(s, z0);
    for (int t : {1, 2, 17, 50}) {
      const Latent zt = forward_noise(z0, t, eps, s);
      const Latent got = oracle.predict_noise(zt, t, {z0, ConditionKind::global});
      EXPECT_LE(max_abs_diff(got, eps), 1e-10) << "t=" << t;
    }
  }
}

TEST(Oracle, ZeroNoiseGivesZero) {
  const Schedule s = default_schedule();
  const Latent z0 = random_latent(1, 4, 4, 3, 0.4);
  Latent zt = z0;
  for (double& v : zt.values) v *= std::sqrt(s.alpha_bar(20));
  const Latent got = OracleDenoiser(s, z0).predict_noise(zt, 20, {z0, ConditionKind::local});
  for (double v : got.values) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(Oracle, RejectsBadInputs) {
  const Schedule s = default_schedule();
  const Latent z0(1, 4, 4);
  const OracleDenoiser oracle(s, z0);
  EXPECT_THROW(oracle.predict_noise(z0, 0, {z0}), ConfigError);
  EXPECT_THROW(oracle.predict_noise(z0, 51, {z0}), ConfigError);
  EXPECT_THROW(oracle.predict_noise(Latent(1, 4, 5), 3, {z0}), ConfigError);
}

TEST(Oracle, TrainingLossIsZero) {
  const Schedule s = default_schedule();
  const Latent z0 = random_latent(1, 6, 6, 8, 0.2);
  std::vector<TrainingExample> batch(4, TrainingExample{z0, {z0, ConditionKind::global}});
  Rng rng(1);
  EXPECT_LE(noise_prediction_loss(OracleDenoiser(s, z0), batch, s, rng), 1e-20);
}

TEST(ToyDenoiser, ParameterCountMatchesDescriptor) {
  const ToyArchitecture a;
  // (3*9 + 1)*8 + (8*9 + 1)*8 + (8*9 + 1)*1 + 50*8
  EXPECT_EQ(a.parameter_count(), 224u + 584u + 73u + 400u);
  EXPECT_EQ(ToyDenoiser(a).parameters().size(), a.parameter_count());
}

TEST(ToyDenoiser, ZeroParametersPredictZeroAndLossIsUnitVariance) {
  const Schedule s = default_schedule();
  ToyDenoiser m{ToyArchitecture{}};
  std::vector<TrainingExample> batch;
  for (int i = 0; i < 16; ++i) {
    const Latent z = random_latent(1, 16, 16, 40 + i, 0.2);
    batch.push_back({z, {z, ConditionKind::global}});
  }
  Rng rng(5);
  const double loss = noise_prediction_loss(m, batch, s, rng);
  // 4096 standard-normal squares: mean 1, standard error ~0.022.
  EXPECT_NEAR(loss, 1.0, 0.1);
}

TEST(ToyDenoiser, DeterministicGoldenOutput) {
  const auto m = ToyDenoiser::initialized(ToyArchitecture{}, 3);
  const Latent z = random_latent(1, 4, 4, 11);
  const Latent c = random_latent(1, 4, 4, 12, 0.3);
  const Latent a = m.predict_noise(z, 7, {c, ConditionKind::local});
  const Latent b = m.predict_noise(z, 7, {c, ConditionKind::local});
  EXPECT_EQ(a, b);
  EXPECT_TRUE(all_finite(a.values));
  const Latent g = m.predict_noise(z, 7, {c, ConditionKind::global});
  EXPECT_NE(a, g);  // the kind flag reaches the output
}

TEST(ToyDenoiser, RejectsBadInputs) {
  const ToyDenoiser m{ToyArchitecture{}};
  const Latent z(1, 4, 4);
  EXPECT_THROW(m.predict_noise(z, 0, {z}), ConfigError);
  EXPECT_THROW(m.predict_noise(z, 51, {z}), ConfigError);
  EXPECT_THROW(m.predict_noise(z, 3, {Latent(1, 4, 3)}), ConfigError);
  EXPECT_THROW(m.predict_noise(Latent(2, 4, 4), 3, {Latent(2, 4, 4)}), ConfigError);
}

std::vector<NoisyExample> probe_batch(int channels, std::uint64_t seed) {
  const Schedule s = default_schedule();
  std::vector<NoisyExample> out;
  for (int i = 0; i < 3; ++i) {
    NoisyExample ex;
    ex.t = 1 + static_cast<int>((seed * 7 + i * 13) % 50);
    ex.eps = random_latent(channels, 6, 5, seed * 10 + i);
    const Latent z0 = random_latent(channels, 6, 5, seed * 20 + i, 0.3);
    ex.z_t = forward_noise(z0, ex.t, ex.eps, s);
    ex.cond = {random_latent(channels, 6, 5, seed * 30 + i, 0.3),
               i % 2 ? ConditionKind::local : ConditionKind::global};
    out.push_back(std::move(ex));
  }
  return out;
}

TEST(GradientCheck, LinearModel) {
  ToyArchitecture a;
  a.hidden = {};
  auto m = ToyDenoiser::initialized(a, 2);
  for (double& v : m.parameters()) v += 0.01;  // non-zero timestep table too
  EXPECT_LE(gradient_check(m, probe_batch(1, 2)), 1e-5);
}

TEST(GradientCheck, ConvModel) {
  auto m = ToyDenoiser::initialized(ToyArchitecture{}, 3);
  Rng rng(3);
  for (double& v : m.parameters()) v += 0.05 * rng.normal();
  EXPECT_LE(gradient_check(m, probe_batch(1, 3)), 1e-4);
}

TEST(GradientCheck, MultiChannelIdentityActivation) {
  ToyArchitecture a;
  a.latent_channels = 4;
  a.hidden = {5};
  a.activation = Activation::identity;
  auto m = ToyDenoiser::initialized(a, 4);
  EXPECT_LE(gradient_check(m, probe_batch(4, 4)), 1e-5);
}

// Output ignores its only parameter.
struct ConstantModel {
  std::vector<double> theta{0.7};
  std::span<double> parameters() { return theta; }
  double loss(int) const { return 2.5; }
  double loss_and_gradient(int, std::span<double> g) const {
    g[0] = 0.0;
    return 2.5;
  }
};

TEST(GradientCheck, ConstantModelHasZeroError) {
  ConstantModel m;
  EXPECT_EQ(gradient_check(m, 0), 0.0);
}

std::vector<TrainingExample> phantom_examples(int count, int size) {
  const PatchCodec codec(1);
  std::vector<TrainingExample> out;
  for (const auto& s : generate_phantoms(7, count, size)) {
    out.push_back({codec.encode(s.soft), {codec.encode(s.cxr), ConditionKind::global}});
    out.push_back({codec.encode(s.soft),
                   {codec.encode(apply_mask(s.cxr, s.lung_mask)), ConditionKind::local}});
  }
  return out;
}

TEST(Training, StepReturnsPreUpdateLossAndMovesParameters) {
  const Schedule s = default_schedule();
  auto m = ToyDenoiser::initialized(ToyArchitecture{}, 1);
  const auto data = phantom_examples(2, 32);
  const std::vector<double> before(m.parameters().begin(), m.parameters().end());
  Rng a(9), b(9);
  const double expected = m.loss(noise_batch(data, s, a));
  const double got = train_step(m, data, s, b, 1e-2);
  EXPECT_DOUBLE_EQ(got, expected);
  EXPECT_NE(before, std::vector<double>(m.parameters().begin(), m.parameters().end()));
}

TEST(Training, NonFiniteLossAborts) {
  const Schedule s = default_schedule();
  auto m = ToyDenoiser::initialized(ToyArchitecture{}, 1);
  m.parameters()[0] = std::numeric_limits<double>::quiet_NaN();
  const auto data = phantom_examples(1, 32);
  Rng rng(1);
  EXPECT_THROW(train_step(m, data, s, rng, 1e-2), NumericError);
}

TEST(Training, SeededRunIsReproducibleAndLossDrops) {
  const Schedule s = default_schedule();
  const auto data = phantom_examples(8, 32);
  TrainOptions opt;
  opt.epochs = 30;
  opt.lr = 0.05;
  opt.seed = 4;
  auto m1 = ToyDenoiser::initialized(ToyArchitecture{}, 4);
  auto m2 = ToyDenoiser::initialized(ToyArchitecture{}, 4);
  const auto l1 = train(m1, data, s, opt);
  const auto l2 = train(m2, data, s, opt);
  EXPECT_EQ(l1, l2);
  ASSERT_EQ(l1.size(), 60u);
  const double head = std::accumulate(l1.begin(), l1.begin() + 10, 0.0) / 10;
  const double tail = std::accumulate(l1.end() - 10, l1.end(), 0.0) / 10;
  EXPECT_LT(tail, head);
}

TEST(Training, SmoothedLossDoesNotClimb) {
  const Schedule s = default_schedule();
  const auto data = phantom_examples(16, 32);
  TrainOptions opt;
  opt.epochs = 1000;
  opt.max_steps = 300;
  opt.lr = 0.05;
  auto m = ToyDenoiser::initialized(ToyArchitecture{}, 7);
  const auto losses = train(m, data, s, opt);
  std::vector<double> windows;
  for (std::size_t i = 0; i + 50 <= losses.size(); i += 50)
    windows.push_back(std::accumulate(losses.begin() + i, losses.begin() + i + 50, 0.0) / 50);
  ASSERT_EQ(windows.size(), 6u);
  for (std::size_t k = 1; k < windows.size(); ++k)
    EXPECT_LE(windows[k], 1.05 * windows[k - 1]) << "window " << k;
  EXPECT_LT(windows.back(), windows.front());
}

TEST(Training, GoldenOutputAfterSeededRun) {
  const Schedule s = default_schedule();
  const auto data = phantom_examples(4, 32);
  TrainOptions opt;
  opt.epochs = 5;
  opt.lr = 0.05;
  auto m = ToyDenoiser::initialized(ToyArchitecture{}, 7);
  train(m, data, s, opt);
  const Latent z = random_latent(1, 4, 4, 11);
  const Latent c = random_latent(1, 4, 4, 12, 0.3);
  const Latent out = m.predict_noise(z, 9, {c, ConditionKind::global});
  const double golden[4] = {-0.018159371814151039, -0.054242574967482637, -0.10818301588786139,
                            -0.18795000111659693};
  for (int i = 0; i < 4; ++i)
    EXPECT_NEAR(out.values[static_cast<std::size_t>(i) * 5], golden[i], 1e-9)
        << std::setprecision(17) << out.values[static_cast<std::size_t>(i) * 5];
}

TEST(Checkpoint, RoundTripThroughFloat32) {
  ToyArchitecture a;
  a.hidden = {4, 6};
  a.timesteps = 10;
  const auto m = ToyDenoiser::initialized(a, 21);
  std::stringstream buf;
  save_checkpoint(buf, m);
  const std::string bytes = buf.str();
  EXPECT_EQ(bytes.substr(0, 8), "GLCMTOY1");
  const auto back = load_checkpoint(buf);
  EXPECT_EQ(back.architecture(), a);
  const auto p = m.parameters(), q = back.parameters();
  ASSERT_EQ(p.size(), q.size());
  for (std::size_t i = 0; i < p.size(); ++i)
    EXPECT_EQ(q[i], static_cast<double>(static_cast<float>(p[i])));
}

TEST(Checkpoint, RejectsCorruptInput) {
  std::stringstream bad("NOTAMODEL");
  EXPECT_THROW(load_checkpoint(bad), ConfigError);
  const auto m = ToyDenoiser::initialized(ToyArchitecture{}, 1);
  std::stringstream buf;
  save_checkpoint(buf, m);
  std::string bytes = buf.str();
  bytes.resize(bytes.size() - 3);
  std::stringstream truncated(bytes);
  EXPECT_THROW(load_checkpoint(truncated), ConfigError);
}

}  // namespace
}  // namespace glcm
