#ifndef GLCM_SEGMENTATION_HPP
#define GLCM_SEGMENTATION_HPP

#include <algorithm>
#include <array>
#include <string>

#include "glcm/error.hpp"
#include "glcm/phantom.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

enum class MaskProvider { phantom_truth, threshold };

inline MaskProvider parse_mask_provider(const std::string& s) {
  if (s == "phantom_truth") return MaskProvider::phantom_truth;
  if (s == "threshold") return MaskProvider::threshold;
  throw ConfigError("unknown mask provider '" + s + "' (phantom_truth|threshold)");
}

// Otsu threshold over a 256-bin histogram of [0,1] intensities. Returns the upper edge of
// the dark class, or nullopt when the image has a single intensity level.
inline std::optional<double> otsu_threshold(const Image& image) {
  std::array<double, 256> hist{};
  for (double p : image.pixels) {
    const int bin = std::clamp(static_cast<int>(std::clamp(p, 0.0, 1.0) * 255.0 + 0.5), 0, 255);
    hist[bin] += 1.0;
  }
  const double total = static_cast<double>(image.size());
  double sum_all = 0.0;
  for (int i = 0; i < 256; ++i) sum_all += i * hist[i];

  double w0 = 0.0, sum0 = 0.0, best = 0.0;
  int best_bin = -1;
  for (int i = 0; i < 255; ++i) {
    w0 += hist[i];
    sum0 += i * hist[i];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_bin = i;
    }
  }
  if (best_bin < 0) return std::nullopt;
  return (best_bin + 0.5) / 255.0;
}

namespace detail {
// 3x3 erosion (take_min) or dilation; pixels outside the image are ignored.
inline Mask morph3(const Mask& in, bool take_min) {
  Mask out(in.height, in.width);
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      std::uint8_t v = take_min ? 1 : 0;
      for (int dy = -1; dy <= 1; ++dy)
        for (int dx = -1; dx <= 1; ++dx) {
          const int qy = y + dy, qx = x + dx;
          if (qy < 0 || qx < 0 || qy >= in.height || qx >= in.width) continue;
          v = take_min ? std::min(v, in.at(qy, qx)) : std::max(v, in.at(qy, qx));
        }
      out.at(y, x) = v;
    }
  return out;
}
}  // namespace detail

inline Mask erode3(const Mask& m) { return detail::morph3(m, true); }
inline Mask dilate3(const Mask& m) { return detail::morph3(m, false); }
inline Mask open3(const Mask& m) { return dilate3(erode3(m)); }

// Lungs are the dark class: pixels at or below the Otsu threshold, then a 3x3 opening.
inline Mask threshold_lung_mask(const Image& image) {
  Mask m(image.height, image.width);
  const auto thr = otsu_threshold(image);
  if (!thr) return m;
  for (std::size_t i = 0; i < image.size(); ++i) m.bits[i] = image.pixels[i] <= *thr ? 1 : 0;
  return open3(m);
}

// Lung region for `image`. phantom_truth needs the generator parameters of the phantom.
inline Mask lung_mask(const Image& image, MaskProvider provider,
                      const PhantomParams* truth = nullptr) {
  if (provider == MaskProvider::threshold) return threshold_lung_mask(image);
  if (truth == nullptr)
    throw ConfigError("phantom_truth mask requested for an image without phantom metadata");
  detail::require(truth->size == image.height && truth->size == image.width,
                  "phantom metadata does not match image dimensions");
  return ellipse_union_mask(*truth);
}

// Elementwise product; pixels outside the mask become 0.
inline Image apply_mask(const Image& image, const Mask& mask) {
  require_same_shape(image, mask, "apply_mask");
  Image out = image;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (!mask.bits[i]) out.pixels[i] = 0.0;
  return out;
}

inline double mask_iou(const Mask& a, const Mask& b) {
  detail::require(a.height == b.height && a.width == b.width, "mask_iou: dimensions differ");
  std::size_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inter += (a.bits[i] && b.bits[i]) ? 1 : 0;
    uni += (a.bits[i] || b.bits[i]) ? 1 : 0;
  }
  return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

}  // namespace glcm

#endif  // GLCM_SEGMENTATION_HPP
