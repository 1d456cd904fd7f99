#ifndef GLCM_TENSOR_HPP
#define GLCM_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "glcm/error.hpp"

namespace glcm {

// Pixel-space image, row-major, intensities nominally in [0,1].
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(int h, int w, double fill = 0.0)
      : height(h), width(w), pixels(static_cast<std::size_t>(h) * w, fill) {
    detail::require(h > 0 && w > 0, "image dimensions must be positive");
  }

  double& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
  double at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return pixels.size(); }
  bool same_shape(const Image& o) const { return height == o.height && width == o.width; }

  friend bool operator==(const Image&, const Image&) = default;
};

// Latent-space tensor, channel-major (c, y, x). Values are unbounded.
struct Latent {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> values;

  Latent() = default;
  Latent(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), values(static_cast<std::size_t>(c) * h * w, fill) {
    detail::require(c > 0 && h > 0 && w > 0, "latent dimensions must be positive");
  }

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int y, int x) {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }
  double at(int c, int y, int x) const {
    return values[static_cast<std::size_t>(c) * plane() + static_cast<std::size_t>(y) * width + x];
  }
  std::span<double> channel(int c) { return {values.data() + c * plane(), plane()}; }
  std::span<const double> channel(int c) const { return {values.data() + c * plane(), plane()}; }
  std::size_t size() const { return values.size(); }
  bool same_shape(const Latent& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }

  friend bool operator==(const Latent&, const Latent&) = default;
};

// Binary region mask; 1 marks the region (lungs, bones).
struct Mask {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> bits;

  Mask() = default;
  Mask(int h, int w, std::uint8_t fill = 0)
      : height(h), width(w), bits(static_cast<std::size_t>(h) * w, fill) {
    detail::require(h > 0 && w > 0, "mask dimensions must be positive");
  }

  std::uint8_t& at(int y, int x) { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::uint8_t at(int y, int x) const { return bits[static_cast<std::size_t>(y) * width + x]; }
  std::size_t size() const { return bits.size(); }
  std::size_t count() const {
    return static_cast<std::size_t>(std::count(bits.begin(), bits.end(), std::uint8_t{1}));
  }
  bool matches(const Image& im) const { return height == im.height && width == im.width; }

  friend bool operator==(const Mask&, const Mask&) = default;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  detail::require(a.same_shape(b), std::string(what) + ": image dimensions differ (" +
                                       std::to_string(a.height) + "x" + std::to_string(a.width) +
                                       " vs " + std::to_string(b.height) + "x" +
                                       std::to_string(b.width) + ")");
}

inline void require_same_shape(const Latent& a, const Latent& b, const char* what) {
  detail::require(a.same_shape(b), std::string(what) + ": latent shapes differ");
}

inline void require_same_shape(const Image& a, const Mask& m, const char* what) {
  detail::require(m.matches(a), std::string(what) + ": mask dimensions differ from image");
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

inline double max_abs_diff(const Latent& a, const Latent& b) {
  require_same_shape(a, b, "max_abs_diff");
  return max_abs_diff(a.values, b.values);
}

inline double max_abs_diff(const Image& a, const Image& b) {
  require_same_shape(a, b, "max_abs_diff");
  return max_abs_diff(a.pixels, b.pixels);
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

}  // namespace glcm

#endif  // GLCM_TENSOR_HPP
