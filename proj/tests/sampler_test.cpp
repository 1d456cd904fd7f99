#include <gtest/gtest.h>

#include <cmath>

#include "glcm/codec.hpp"
#include "glcm/phantom.hpp"
#include "glcm/sampler.hpp"
#include "glcm/segmentation.hpp"
#include "glcm/toy_denoiser.hpp"

namespace glcm {
namespace {

constexpr double kGoldenAlphaBar50 = 0.76376328567376313860;

Schedule default_schedule() { return make_schedule(50, 0.00085, 0.012); }

Latent scalar(double v) { return Latent(1, 1, 1, v); }

Latent random_latent(int c, int h, int w, std::uint64_t seed, double scale = 1.0) {
  Latent z(c, h, w);
  NoiseStream(seed).fill_normal(z.values);
  for (double& v : z.values) v *= scale;
  return z;
}

TEST(ForwardNoise, Degenerate) {
  const Schedule s = default_schedule();
  const Latent z0 = random_latent(1, 3, 3, 1), eps = random_latent(1, 3, 3, 2);
  const Latent a = forward_noise(z0, 10, Latent(1, 3, 3, 0.0), s);
  const Latent b = forward_noise(Latent(1, 3, 3, 0.0), 10, eps, s);
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_DOUBLE_EQ(a.values[i], std::sqrt(s.alpha_bar(10)) * z0.values[i]);
    EXPECT_DOUBLE_EQ(b.values[i], std::sqrt(1 - s.alpha_bar(10)) * eps.values[i]);
  }
  EXPECT_THROW(forward_noise(z0, 10, Latent(1, 3, 4), s), ConfigError);
  EXPECT_THROW(forward_noise(z0, 0, eps, s), ConfigError);
}

TEST(ForwardNoise, GoldenScalarAtT) {
  const double expected = std::sqrt(kGoldenAlphaBar50) + std::sqrt(1.0 - kGoldenAlphaBar50);
  EXPECT_NEAR(forward_noise(scalar(1), 50, scalar(1), default_schedule()).values[0], expected, 1e-14);
}

TEST(ReverseStep, FinalStepIdentity) {
  const Schedule s = default_schedule();
  const double z = 0.37;
  // eps chosen so that the inner term equals z_1.
  const double k = (1 - s.alpha(1)) / std::sqrt(1 - s.alpha_bar(1));
  const double eps = z * (1 - std::sqrt(s.alpha(1))) / k;
  const Latent out = reverse_step(scalar(z), 1, scalar(eps), s, scalar(123.0));
  EXPECT_NEAR(out.values[0], (c_out(s, 1) + c_skip(s, 1)) * z, 1e-15);
}

TEST(ReverseStep, ClosedFormAtTwoWithoutNoise) {
  for (double scale : {1.0, kDefaultTimestepScale}) {
    const Schedule s = make_schedule(50, 0.00085, 0.012, 0.5, scale);
    const long double z = 0.8L, e = -0.3L;
    const long double a2 = s.alpha(2), ab2 = s.alpha_bar(2), a1 = s.alpha(1);
    const long double tau = scale * 2.0L / 50.0L;
    const long double cs = 0.25L / (tau * tau + 0.25L);
    const long double co = tau / std::sqrt(tau * tau + 0.25L);
    const long double m = (z - (1 - a2) / std::sqrt(1 - ab2) * e) / std::sqrt(a2);
    const long double expected = std::sqrt(a1) * (co * m + cs * z);
    const Latent out = reverse_step(scalar(0.8), 2, scalar(-0.3), s, scalar(0.0));
    EXPECT_NEAR(out.values[0], static_cast<double>(expected), 1e-14) << "scale " << scale;
  }
}

TEST(ReverseStep, NoiseEntersWithExpectedCoefficient) {
  const Schedule s = default_schedule();
  const Latent a = reverse_step(scalar(0.1), 5, scalar(0.2), s, scalar(0.0));
  const Latent b = reverse_step(scalar(0.1), 5, scalar(0.2), s, scalar(1.0));
  EXPECT_NEAR(b.values[0] - a.values[0], (1 - s.alpha(4)) / std::sqrt(1 - s.alpha_bar(4)), 1e-15);
  EXPECT_THROW(reverse_step(scalar(0.1), 51, scalar(0.2), s, scalar(0.0)), ConfigError);
}

TEST(LegMix, Reductions) {
  const Latent l = random_latent(2, 3, 3, 5), g = random_latent(2, 3, 3, 6);
  EXPECT_EQ(leg_mix(l, g, 1.0), l);
  EXPECT_EQ(leg_mix(l, g, 0.0), g);
  EXPECT_EQ(leg_mix(scalar(1), scalar(0), 3.0).values[0], 3.0);
  for (double w : {-1.5, 0.25, 3.0, 10.0}) EXPECT_LE(max_abs_diff(leg_mix(l, l, w), l), 1e-14);
  EXPECT_THROW(leg_mix(l, scalar(0), 3.0), ConfigError);
}

SamplerConfig config(SamplePath path, std::uint64_t seed, double alpha_l = kDefaultAlphaL) {
  SamplerConfig c;
  c.path = path;
  c.seed = seed;
  c.alpha_l = alpha_l;
  return c;
}

TEST(Sample, OracleRoundTrip) {
  const Schedule s = default_schedule();
  for (std::uint64_t seed : {0u, 1u, 99u}) {
    const Latent target = random_latent(1, 16, 16, 1000 + seed, 0.25);
    const OracleDenoiser oracle(s, target);
    const Latent out = sample(oracle, {target, target}, s, config(SamplePath::global, seed));
    EXPECT_LE(max_abs_diff(out, target), 1e-6);
    EXPECT_EQ(out.channels, 1);
    EXPECT_EQ(out.height, 16);
  }
}

TEST(Sample, OracleRoundTripPosteriorMeanAndX0Variants) {
  const Schedule s = default_schedule();
  const Latent target = random_latent(4, 8, 8, 3, 0.25);
  const OracleDenoiser oracle(s, target);
  for (InnerTerm inner : {InnerTerm::posterior_mean, InnerTerm::x0_prediction}) {
    SamplerConfig c = config(SamplePath::global, 5);
    c.inner = inner;
    EXPECT_LE(max_abs_diff(sample(oracle, {target, {}}, s, c), target), 1e-6) << to_string(inner);
  }
}

TEST(Sample, UnitTimestepScaleDoesNotRecover) {
  // c_skip(1) ~ 1 keeps the final state instead of the consistency estimate.
  const Schedule s = make_schedule(50, 0.00085, 0.012, 0.5, 1.0);
  const Latent target = random_latent(1, 8, 8, 3, 0.25);
  const OracleDenoiser oracle(s, target);
  EXPECT_GT(max_abs_diff(sample(oracle, {target, {}}, s, config(SamplePath::global, 1)), target),
            1e-2);
}

TEST(Sample, DeterministicPerSeed) {
  const Schedule s = default_schedule();
  const auto m = ToyDenoiser::initialized(ToyArchitecture{}, 8);
  const Latent cg = random_latent(1, 8, 8, 1, 0.3), cl = random_latent(1, 8, 8, 2, 0.3);
  const auto a = sample(m, {cg, cl}, s, config(SamplePath::local, 17));
  const auto b = sample(m, {cg, cl}, s, config(SamplePath::local, 17));
  const auto c = sample(m, {cg, cl}, s, config(SamplePath::local, 18));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

// Wraps an estimator and forwards only one kind of condition.
class OnlyKind final : public NoiseEstimator {
public:
  OnlyKind(const NoiseEstimator& inner, const Latent& cond, ConditionKind kind)
      : inner_(inner), cond_(cond), kind_(kind) {}
  Latent predict_noise(const Latent& z, int t, const Condition&) const override {
    return inner_.predict_noise(z, t, {cond_, kind_});
  }

private:
  const NoiseEstimator& inner_;
  const Latent& cond_;
  ConditionKind kind_;
};

TEST(Sample, LegReductionsAreBitwise) {
  const Schedule s = default_schedule();
  const auto m = ToyDenoiser::initialized(ToyArchitecture{}, 8);
  const Latent cg = random_latent(1, 8, 8, 1, 0.3), cl = random_latent(1, 8, 8, 2, 0.3);
  const OnlyKind local_only(m, cl, ConditionKind::local);
  EXPECT_EQ(sample(m, {cg, cl}, s, config(SamplePath::local, 4, 1.0)),
            sample(local_only, {cg, {}}, s, config(SamplePath::global, 4)));
  EXPECT_EQ(sample(m, {cg, cl}, s, config(SamplePath::local, 4, 0.0)),
            sample(m, {cg, cl}, s, config(SamplePath::global, 4)));
}

TEST(Sample, Preconditions) {
  const Schedule s = default_schedule();
  const Latent c(1, 4, 4);
  const OracleDenoiser oracle(s, c);
  SamplerConfig bad = config(SamplePath::global, 1);
  bad.steps = 25;
  EXPECT_THROW(sample(oracle, {c, {}}, s, bad), ConfigError);
  EXPECT_THROW(sample(oracle, {c, {}}, s, config(SamplePath::local, 1)), ConfigError);
  EXPECT_THROW(sample(oracle, {c, c}, s, config(SamplePath::dual, 1)), ConfigError);
}

TEST(DualPath, OracleRecoversBothTargets) {
  const Schedule s = default_schedule();
  const Latent tg = random_latent(1, 12, 12, 7, 0.2), tl = random_latent(1, 12, 12, 8, 0.2);
  const OracleDenoiser oracle(s, tg, tl);
  SamplerConfig c = config(SamplePath::dual, 3, 1.0);
  const DualResult r = dual_path_sample(oracle, tg, tl, s, c);
  EXPECT_LE(max_abs_diff(r.global_latent, tg), 1e-6);
  EXPECT_LE(max_abs_diff(r.local_latent, tl), 1e-6);
  // With LEG the local path lands on the affine mix of the two targets.
  c.alpha_l = 3.0;
  const Latent mixed = leg_mix(tl, tg, 3.0);
  EXPECT_LE(max_abs_diff(dual_path_sample(oracle, tg, tl, s, c).local_latent, mixed), 1e-6);
}

TEST(DualPath, FullMaskWithSharedNoiseGivesEqualPaths) {
  const Schedule s = default_schedule();
  const auto phantom = make_phantom(3, 0, 32);
  const PatchCodec codec(1);
  const Mask ones(32, 32, 1);
  const Latent zg = codec.encode(phantom.cxr);
  const Latent zl = codec.encode(apply_mask(phantom.cxr, ones));
  ASSERT_EQ(zg, zl);
  const auto m = ToyDenoiser::initialized(ToyArchitecture{.kind_flag = false}, 2);
  SamplerConfig c = config(SamplePath::dual, 9);
  c.shared_noise = true;
  const DualResult r = dual_path_sample(m, zg, zl, s, c);
  EXPECT_LE(max_abs_diff(r.global_latent, r.local_latent), 1e-12);
  c.shared_noise = false;
  const DualResult r2 = dual_path_sample(m, zg, zl, s, c);
  EXPECT_EQ(r2.global_latent, r.global_latent);
  EXPECT_NE(r2.local_latent, r.local_latent);
}

}  // namespace
}  // namespace glcm
