#include <gtest/gtest.h>

#include <cmath>

#include "glcm/codec.hpp"
#include "glcm/metrics.hpp"
#include "glcm/phantom.hpp"
#include "glcm/rng.hpp"

namespace glcm {
namespace {

Image random_image(int h, int w, std::uint64_t seed) {
  Image im(h, w);
  Rng rng(seed);
  for (double& p : im.pixels) p = rng.uniform();
  return im;
}

TEST(Codec, IdentityConstantHalfIsZeroLatent) {
  const PatchCodec c(1);
  const Latent z = c.encode(Image(4, 6, 0.5));
  EXPECT_EQ(z.channels, 1);
  for (double v : z.values) EXPECT_EQ(v, 0.0);
  const Image back = c.decode(Latent(1, 3, 3, 0.0));
  for (double p : back.pixels) EXPECT_EQ(p, 0.5);
}

TEST(Codec, DecodeClamps) {
  const PatchCodec c(1);
  EXPECT_EQ(c.decode(Latent(1, 1, 1, 0.7)).pixels[0], 1.0);
  EXPECT_EQ(c.decode(Latent(1, 1, 1, -0.9)).pixels[0], 0.0);
  EXPECT_NEAR(c.decode_unclamped(Latent(1, 1, 1, 0.7)).pixels[0], 1.2, 1e-15);
}

TEST(Codec, PatchTwoByTwo) {
  Image im(2, 2);
  im.pixels = {0.1, 0.2, 0.3, 0.4};
  const Latent z = PatchCodec(2).encode(im);
  ASSERT_EQ(z.channels, 4);
  ASSERT_EQ(z.height, 1);
  ASSERT_EQ(z.width, 1);
  EXPECT_DOUBLE_EQ(z.at(0, 0, 0), 0.1 - 0.5);
  EXPECT_DOUBLE_EQ(z.at(1, 0, 0), 0.2 - 0.5);
  EXPECT_DOUBLE_EQ(z.at(2, 0, 0), 0.3 - 0.5);
  EXPECT_DOUBLE_EQ(z.at(3, 0, 0), 0.4 - 0.5);
}

TEST(Codec, RoundTripIsIdentity) {
  for (int k : {1, 2, 4}) {
    const PatchCodec c(k);
    const Image x = random_image(16, 24, 99 + k);
    const Image y = c.decode(c.encode(x));
    EXPECT_LE(max_abs_diff(x, y), 1e-7) << "k=" << k;
  }
}

TEST(Codec, PhantomRoundTripPsnr) {
  for (const auto& s : generate_phantoms(5, 3, 64)) {
    for (int k : {1, 2}) {
      const PatchCodec c(k);
      EXPECT_GE(psnr(c.decode_unclamped(c.encode(s.cxr)), s.cxr), 80.0);
    }
  }
}

TEST(Codec, ShiftFreeTransformIsLinear) {
  const Image x = random_image(8, 8, 1), y = random_image(8, 8, 2);
  Image mix(8, 8);
  for (std::size_t i = 0; i < mix.size(); ++i) mix.pixels[i] = 0.3 * x.pixels[i] - 1.7 * y.pixels[i];
  const Latent a = space_to_depth(x, 2), b = space_to_depth(y, 2), m = space_to_depth(mix, 2);
  for (std::size_t i = 0; i < m.size(); ++i)
    EXPECT_NEAR(m.values[i], 0.3 * a.values[i] - 1.7 * b.values[i], 1e-15);
}

TEST(Codec, RejectsBadShapes) {
  EXPECT_THROW(PatchCodec(2).encode(Image(3, 4)), ConfigError);
  EXPECT_THROW(PatchCodec(2).decode(Latent(1, 2, 2)), ConfigError);
  EXPECT_THROW(PatchCodec(0), ConfigError);
}

TEST(Codec, Factory) {
  EXPECT_EQ(make_codec("identity")->name(), "identity");
  EXPECT_EQ(make_codec("patch4")->name(), "patch4");
  EXPECT_THROW(make_codec("vqgan"), ConfigError);
  EXPECT_THROW(make_codec("patch"), ConfigError);
  EXPECT_THROW(make_codec("patchx"), ConfigError);
}

}  // namespace
}  // namespace glcm
