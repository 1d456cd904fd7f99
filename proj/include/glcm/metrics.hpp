#ifndef GLCM_METRICS_HPP
#define GLCM_METRICS_HPP

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include "glcm/error.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

inline constexpr double kDefaultPsnrCap = 100.0;

inline double mse(const Image& pred, const Image& gt) {
  require_same_shape(pred, gt, "mse");
  double acc = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double d = pred.pixels[i] - gt.pixels[i];
    acc += d * d;
  }
  return acc / static_cast<double>(pred.size());
}

// 10 log10(1 / mse) for unit-range images; `cap` when the images are identical.
inline double psnr(const Image& pred, const Image& gt, double cap = kDefaultPsnrCap) {
  const double e = mse(pred, gt);
  if (e == 0.0) return cap;
  return 10.0 * std::log10(1.0 / e);
}

// Bone suppression ratio over the bone mask:
//   1 - sum (pred - soft)^2 / sum (cxr - soft)^2,   1 when there is no bone energy.
inline double bsr(const Image& pred, const Image& cxr, const Image& gt_soft,
                  const Mask& bone_mask) {
  require_same_shape(pred, cxr, "bsr");
  require_same_shape(pred, gt_soft, "bsr");
  require_same_shape(pred, bone_mask, "bsr");
  double residual = 0.0, bone = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (!bone_mask.bits[i]) continue;
    const double r = pred.pixels[i] - gt_soft.pixels[i];
    const double b = cxr.pixels[i] - gt_soft.pixels[i];
    residual += r * r;
    bone += b * b;
  }
  if (bone == 0.0) return 1.0;
  return 1.0 - residual / bone;
}

namespace detail {
// Sobel derivatives with replicated borders.
inline void sobel(const Image& im, int y, int x, double& gx, double& gy) {
  auto at = [&](int yy, int xx) {
    yy = std::clamp(yy, 0, im.height - 1);
    xx = std::clamp(xx, 0, im.width - 1);
    return im.at(yy, xx);
  };
  gx = (at(y - 1, x + 1) + 2 * at(y, x + 1) + at(y + 1, x + 1)) -
       (at(y - 1, x - 1) + 2 * at(y, x - 1) + at(y + 1, x - 1));
  gy = (at(y + 1, x - 1) + 2 * at(y + 1, x) + at(y + 1, x + 1)) -
       (at(y - 1, x - 1) + 2 * at(y - 1, x) + at(y - 1, x + 1));
}
}  // namespace detail

// Gradient-similarity proxy (not LPIPS): mean cosine similarity of Sobel gradient
// vectors of pred and gt over the mask. Where both gradients vanish the pixel scores 1,
// where only one vanishes it scores 0. An empty mask scores 1.
inline double gradient_similarity(const Image& pred, const Image& gt, const Mask& mask) {
  require_same_shape(pred, gt, "gradient_similarity");
  require_same_shape(pred, mask, "gradient_similarity");
  constexpr double eps = 1e-12;
  double acc = 0.0;
  std::size_t n = 0;
  for (int y = 0; y < pred.height; ++y)
    for (int x = 0; x < pred.width; ++x) {
      if (!mask.at(y, x)) continue;
      double ax, ay, bx, by;
      detail::sobel(pred, y, x, ax, ay);
      detail::sobel(gt, y, x, bx, by);
      const double na = std::hypot(ax, ay), nb = std::hypot(bx, by);
      double c;
      if (na < eps && nb < eps) c = 1.0;
      else if (na < eps || nb < eps) c = 0.0;
      else c = (ax * bx + ay * by) / (na * nb);
      acc += c;
      ++n;
    }
  return n == 0 ? 1.0 : acc / static_cast<double>(n);
}

struct ImageMetrics {
  std::string image_id;
  double bsr = 0, mse = 0, psnr = 0, grad_sim = 0;
};

struct Summary {
  double mean = 0, std = 0;  // sample standard deviation (n - 1)
};

inline Summary summarize(const std::vector<double>& v) {
  Summary s;
  if (v.empty()) return s;
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double acc = 0.0;
    for (double x : v) acc += (x - s.mean) * (x - s.mean);
    s.std = std::sqrt(acc / static_cast<double>(v.size() - 1));
  }
  return s;
}

struct MetricsReport {
  std::vector<ImageMetrics> rows;

  Summary bsr() const { return column(&ImageMetrics::bsr); }
  Summary mse() const { return column(&ImageMetrics::mse); }
  Summary psnr() const { return column(&ImageMetrics::psnr); }
  Summary grad_sim() const { return column(&ImageMetrics::grad_sim); }

  Summary column(double ImageMetrics::*field) const {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.*field);
    return summarize(v);
  }
};

inline ImageMetrics evaluate_image(std::string id, const Image& pred, const Image& cxr,
                                   const Image& gt_soft, const Mask& bone_mask,
                                   const Mask& lung_mask, double psnr_cap = kDefaultPsnrCap) {
  return {std::move(id), bsr(pred, cxr, gt_soft, bone_mask), mse(pred, gt_soft),
          psnr(pred, gt_soft, psnr_cap), gradient_similarity(pred, gt_soft, lung_mask)};
}

inline void write_csv(std::ostream& os, const MetricsReport& report) {
  os << "image_id,bsr,mse,psnr,grad_sim\n";
  char buf[256];
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, ",%.10g,%.10g,%.10g,%.10g\n", r.bsr, r.mse, r.psnr, r.grad_sim);
    os << r.image_id << buf;
  }
}

inline void write_table(std::ostream& os, const MetricsReport& report) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "%-16s %10s %12s %10s %10s\n", "image_id", "BSR", "MSE",
                "PSNR(dB)", "grad_sim*");
  os << buf;
  for (const auto& r : report.rows) {
    std::snprintf(buf, sizeof buf, "%-16s %10.4f %12.6f %10.3f %10.4f\n", r.image_id.c_str(), r.bsr,
                  r.mse, r.psnr, r.grad_sim);
    os << buf;
  }
  const auto b = report.bsr(), m = report.mse(), p = report.psnr(), g = report.grad_sim();
  std::snprintf(buf, sizeof buf, "%-16s %5.4f±%.4f %7.6f±%.6f %6.3f±%.3f %5.4f±%.4f\n",
                "mean±std", b.mean, b.std, m.mean, m.std, p.mean, p.std, g.mean, g.std);
  os << buf;
  os << "* grad_sim: Sobel-gradient cosine similarity inside the lung mask (not LPIPS)\n";
}

}  // namespace glcm

#endif  // GLCM_METRICS_HPP
