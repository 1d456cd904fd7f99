#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "glcm/metrics.hpp"
#include "glcm/phantom.hpp"

namespace glcm {
namespace {

TEST(Mse, Examples) {
  const PhantomSample s = make_phantom(5, 0, 32);
  EXPECT_EQ(mse(s.soft, s.soft), 0.0);
  Image shifted = s.soft;
  for (double& v : shifted.pixels) v += 0.1;
  EXPECT_NEAR(mse(shifted, s.soft), 0.01, 1e-12);
  EXPECT_EQ(mse(s.cxr, s.soft), mse(s.soft, s.cxr));
  EXPECT_THROW(mse(s.soft, Image(16, 32)), ConfigError);
}

TEST(Mse, MatchesScalarLoopOnPhantom) {
  const PhantomSample s = make_phantom(42, 0, 64);
  long double acc = 0.0L;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 64; ++x) {
      const long double d = static_cast<long double>(s.cxr.at(y, x)) - s.soft.at(y, x);
      acc += d * d;
    }
  EXPECT_NEAR(mse(s.cxr, s.soft), static_cast<double>(acc / 4096.0L), 1e-15);
}

TEST(Psnr, Examples) {
  Image a(10, 10, 0.5);
  EXPECT_EQ(psnr(a, a), 100.0);
  EXPECT_EQ(psnr(a, a, 60.0), 60.0);
  Image b = a;
  for (double& v : b.pixels) v += 0.1;  // mse 0.01
  EXPECT_NEAR(psnr(b, a), 20.0, 1e-9);
  Image c = a;
  const double d = std::sqrt(1e-3);
  for (double& v : c.pixels) v += d;
  EXPECT_NEAR(psnr(c, a), 30.0, 1e-9);
}

TEST(Psnr, NotCappedForTinyError) {
  Image a(4, 4, 0.5), b = a;
  b.pixels[0] += 1e-8;  // mse 6.25e-18 -> ~172 dB
  EXPECT_NEAR(psnr(b, a), 10.0 * std::log10(1.0 / mse(b, a)), 1e-9);
  EXPECT_GT(psnr(b, a), 100.0);
}

TEST(Psnr, OrderConsistentWithMse) {
  const PhantomSample s = make_phantom(6, 0, 32);
  Image near = s.soft, far = s.soft;
  for (std::size_t i = 0; i < near.size(); ++i) {
    near.pixels[i] += 0.01 * ((i % 3) - 1.0);
    far.pixels[i] += 0.05 * ((i % 5) - 2.0);
  }
  EXPECT_LT(mse(near, s.soft), mse(far, s.soft));
  EXPECT_GT(psnr(near, s.soft), psnr(far, s.soft));
}

TEST(Bsr, Examples) {
  const PhantomSample s = make_phantom(7, 0, 64);
  ASSERT_GT(s.bone_mask.count(), 0u);
  EXPECT_EQ(bsr(s.soft, s.cxr, s.soft, s.bone_mask), 1.0);
  EXPECT_EQ(bsr(s.cxr, s.cxr, s.soft, s.bone_mask), 0.0);
  Image half = s.soft;
  for (std::size_t i = 0; i < half.size(); ++i)
    half.pixels[i] += 0.5 * (s.cxr.pixels[i] - s.soft.pixels[i]);
  EXPECT_NEAR(bsr(half, s.cxr, s.soft, s.bone_mask), 0.75, 1e-12);
}

TEST(Bsr, NoBoneAndMonotone) {
  PhantomOptions opt;
  opt.rib_amplitude_scale = 0.0;
  const PhantomSample flat = make_phantom(7, 0, 32, opt);
  EXPECT_EQ(bsr(flat.cxr, flat.cxr, flat.soft, flat.bone_mask), 1.0);

  const PhantomSample s = make_phantom(8, 0, 64);
  double prev = 2.0;
  for (double k : {0.0, 0.25, 0.5, 1.0, 1.5}) {
    Image p = s.soft;
    for (std::size_t i = 0; i < p.size(); ++i) p.pixels[i] += k * (s.cxr.pixels[i] - s.soft.pixels[i]);
    const double b = bsr(p, s.cxr, s.soft, s.bone_mask);
    EXPECT_LE(b, 1.0);
    EXPECT_LT(b, prev);
    prev = b;
  }
}

TEST(GradientSimilarity, Basics) {
  const PhantomSample s = make_phantom(9, 0, 64);
  EXPECT_NEAR(gradient_similarity(s.soft, s.soft, s.lung_mask), 1.0, 1e-12);
  Image neg = s.soft;
  for (double& v : neg.pixels) v = 1.0 - v;
  EXPECT_LT(gradient_similarity(neg, s.soft, s.lung_mask), -0.9);
  EXPECT_EQ(gradient_similarity(neg, s.soft, Mask(64, 64)), 1.0);
  // Invariant to affine intensity changes with positive gain.
  Image scaled = s.soft;
  for (double& v : scaled.pixels) v = 0.5 * v + 0.2;
  EXPECT_NEAR(gradient_similarity(scaled, s.soft, s.lung_mask), 1.0, 1e-12);
}

TEST(Summary, SampleStd) {
  const Summary s = summarize({1.0, 2.0, 3.0, 4.0});
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std, std::sqrt(5.0 / 3.0), 1e-15);
  EXPECT_EQ(summarize({3.0}).std, 0.0);
}

TEST(Report, CsvAndTable) {
  const PhantomSample s = make_phantom(10, 0, 32);
  MetricsReport r;
  r.rows.push_back(evaluate_image("a", s.soft, s.cxr, s.soft, s.bone_mask, s.lung_mask));
  r.rows.push_back(evaluate_image("b", s.cxr, s.cxr, s.soft, s.bone_mask, s.lung_mask));
  EXPECT_EQ(r.rows[0].psnr, 100.0);
  EXPECT_EQ(r.rows[0].bsr, 1.0);
  std::ostringstream csv, table;
  write_csv(csv, r);
  write_table(table, r);
  const std::string c = csv.str();
  EXPECT_EQ(c.substr(0, c.find('\n')), "image_id,bsr,mse,psnr,grad_sim");
  EXPECT_EQ(std::count(c.begin(), c.end(), '\n'), 3);
  EXPECT_NE(c.find("\na,1,0,100,1\n"), std::string::npos) << c;
  EXPECT_NE(table.str().find("mean"), std::string::npos);
}

}  // namespace
}  // namespace glcm
