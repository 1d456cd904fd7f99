#ifndef GLCM_CODEC_HPP
#define GLCM_CODEC_HPP

#include <algorithm>
#include <memory>
#include <string>

#include "glcm/error.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

// Maps pixel-space images to latents and back.
class Codec {
public:
  virtual ~Codec() = default;

  virtual std::string name() const = 0;
  virtual Latent encode(const Image& image) const = 0;
  // Inverse of encode without clamping.
  virtual Image decode_unclamped(const Latent& latent) const = 0;

  Image decode(const Latent& latent) const {
    Image im = decode_unclamped(latent);
    for (double& p : im.pixels) p = std::clamp(p, 0.0, 1.0);
    return im;
  }
};

// Pixel offset applied before rearrangement; latents are zero-mean for mid-grey.
inline constexpr double kLatentShift = 0.5;

// Space-to-depth rearrangement: factor k turns HxW into k*k channels of (H/k)x(W/k).
// Channel index is dy*k + dx. This is the shift-free linear part of the codec.
inline Latent space_to_depth(const Image& image, int k) {
  detail::require(k >= 1, "codec factor must be >= 1");
  detail::require(image.height % k == 0 && image.width % k == 0,
                  "image " + std::to_string(image.height) + "x" + std::to_string(image.width) +
                      " not divisible by codec factor " + std::to_string(k));
  const int h = image.height / k;
  const int w = image.width / k;
  Latent z(k * k, h, w);
  for (int dy = 0; dy < k; ++dy)
    for (int dx = 0; dx < k; ++dx)
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) z.at(dy * k + dx, y, x) = image.at(y * k + dy, x * k + dx);
  return z;
}

inline Image depth_to_space(const Latent& z, int k) {
  detail::require(z.channels == k * k, "latent has " + std::to_string(z.channels) +
                                           " channels, codec expects " + std::to_string(k * k));
  Image im(z.height * k, z.width * k);
  for (int dy = 0; dy < k; ++dy)
    for (int dx = 0; dx < k; ++dx)
      for (int y = 0; y < z.height; ++y)
        for (int x = 0; x < z.width; ++x) im.at(y * k + dy, x * k + dx) = z.at(dy * k + dx, y, x);
  return im;
}

// Deterministic invertible codec: shift by -0.5 then space-to-depth with factor k.
// k = 1 is the identity codec.
class PatchCodec final : public Codec {
public:
  explicit PatchCodec(int factor) : factor_(factor) {
    detail::require(factor >= 1, "codec factor must be >= 1");
  }

  int factor() const { return factor_; }
  std::string name() const override {
    return factor_ == 1 ? "identity" : "patch" + std::to_string(factor_);
  }

  Latent encode(const Image& image) const override {
    Latent z = space_to_depth(image, factor_);
    for (double& v : z.values) v -= kLatentShift;
    return z;
  }

  Image decode_unclamped(const Latent& latent) const override {
    Image im = depth_to_space(latent, factor_);
    for (double& p : im.pixels) p += kLatentShift;
    return im;
  }

private:
  int factor_;
};

// Parses `identity` or `patch{k}` (e.g. `patch2`).
inline std::unique_ptr<Codec> make_codec(const std::string& spec) {
  if (spec == "identity") return std::make_unique<PatchCodec>(1);
  if (spec.rfind("patch", 0) == 0 && spec.size() > 5) {
    const std::string digits = spec.substr(5);
    if (std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
      const int k = std::stoi(digits);
      if (k >= 1) return std::make_unique<PatchCodec>(k);
    }
  }
  throw ConfigError("unknown codec '" + spec + "' (expected identity or patch<k>)");
}

}  // namespace glcm

#endif  // GLCM_CODEC_HPP
