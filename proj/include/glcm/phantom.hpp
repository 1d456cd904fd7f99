#ifndef GLCM_PHANTOM_HPP
#define GLCM_PHANTOM_HPP

// Synthetic paired chest phantoms: a soft-tissue image, an additive rib field, and the
// exact lung and bone masks that go with them.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <tuple>
#include <vector>

#include "glcm/error.hpp"
#include "glcm/rng.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

// Bone-field threshold defining the bone mask (fraction of the unit dynamic range).
inline constexpr double kBoneThreshold = 0.02;

struct Ellipse {
  double cx = 0, cy = 0;  // pixel units, pixel centres at (x + 0.5, y + 0.5)
  double ax = 0, ay = 0;  // semi-axes
  bool contains(double x, double y) const {
    const double u = (x - cx) / ax, v = (y - cy) / ay;
    return u * u + v * v <= 1.0;
  }
  double area() const { return std::numbers::pi * ax * ay; }
};

// Quadratic arc y(x) = y0 + curvature * (x - xc)^2 / size with a Gaussian cross-profile.
struct Rib {
  double y0 = 0, xc = 0, curvature = 0, amplitude = 0, width = 0;
};

struct Blob {
  double cx = 0, cy = 0, sigma = 0, amplitude = 0;
};

struct Wave {
  double kx = 0, ky = 0, phase = 0;  // radians per pixel
};

struct PhantomParams {
  int size = 64;
  std::array<Ellipse, 2> lungs{};
  std::vector<Rib> ribs;
  std::vector<Blob> blobs;
  std::vector<Wave> texture;
  double base = 0.62;
  double lung_density = 0.32;
  double texture_amplitude = 0.04;
  double texture_scale = 1.0;
};

struct PhantomSample {
  Image cxr;
  Image soft;
  Mask lung_mask;
  Mask bone_mask;
  std::uint64_t seed = 0;
  std::size_t index = 0;
  PhantomParams params;
};

struct PhantomOptions {
  // Multiplies every rib amplitude; 0 gives bone-free phantoms.
  double rib_amplitude_scale = 1.0;
  double texture_scale = 1.0;
};

inline Mask ellipse_union_mask(const PhantomParams& p) {
  Mask m(p.size, p.size);
  for (int y = 0; y < p.size; ++y)
    for (int x = 0; x < p.size; ++x)
      for (const auto& e : p.lungs)
        if (e.contains(x + 0.5, y + 0.5)) m.at(y, x) = 1;
  return m;
}

// Samples the geometry of one phantom. Lung ellipses are disjoint and inside the image.
inline PhantomParams sample_phantom_params(int size, Rng& rng, const PhantomOptions& opt) {
  const double S = size;
  PhantomParams p;
  p.size = size;
  p.texture_scale = opt.texture_scale;

  const int blobs = rng.uniform_int(5, 10);
  for (int i = 0; i < blobs; ++i)
    p.blobs.push_back({rng.uniform(0.0, S), rng.uniform(0.0, S), rng.uniform(0.15, 0.4) * S,
                       rng.uniform(-0.08, 0.08)});

  for (int side = 0; side < 2; ++side) {
    const double cx = (side == 0 ? 0.3 : 0.7) + rng.uniform(-0.02, 0.02);
    p.lungs[side] = {cx * S, (0.5 + rng.uniform(-0.03, 0.03)) * S, rng.uniform(0.11, 0.15) * S,
                     rng.uniform(0.26, 0.32) * S};
  }

  // Band-limited texture: wavelengths between size/10 and size/4 (scaled).
  for (int i = 0; i < 16; ++i) {
    const double cycles = rng.uniform(4.0, 10.0) * opt.texture_scale;
    const double theta = rng.uniform(0.0, std::numbers::pi);
    const double k = 2.0 * std::numbers::pi * cycles / S;
    p.texture.push_back({k * std::cos(theta), k * std::sin(theta),
                         rng.uniform(0.0, 2.0 * std::numbers::pi)});
  }

  const int ribs = rng.uniform_int(6, 10);
  for (int i = 0; i < ribs; ++i) {
    const double frac = ribs == 1 ? 0.5 : static_cast<double>(i) / (ribs - 1);
    Rib r;
    r.y0 = (0.14 + 0.6 * frac + rng.uniform(-0.02, 0.02)) * S;
    r.xc = (0.5 + rng.uniform(-0.03, 0.03)) * S;
    r.curvature = rng.uniform(0.6, 1.4);
    r.amplitude = rng.uniform(0.1, 0.3) * opt.rib_amplitude_scale;
    r.width = rng.uniform(0.015, 0.025) * S;
    p.ribs.push_back(r);
  }
  return p;
}

inline Image render_soft(const PhantomParams& p) {
  const int S = p.size;
  Image soft(S, S);
  const double tex_norm = p.texture_amplitude / std::sqrt(static_cast<double>(p.texture.size()));
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double v = p.base;
      for (const auto& b : p.blobs) {
        const double dx = px - b.cx, dy = py - b.cy;
        v += b.amplitude * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      if (p.lungs[0].contains(px, py) || p.lungs[1].contains(px, py)) {
        v -= p.lung_density;
        double tex = 0.0;
        for (const auto& w : p.texture) tex += std::cos(w.kx * px + w.ky * py + w.phase);
        v += tex_norm * tex;
      }
      soft.at(y, x) = std::clamp(v, 0.0, 1.0);
    }
  }
  return soft;
}

inline Image render_bone(const PhantomParams& p) {
  const int S = p.size;
  Image bone(S, S);
  for (int y = 0; y < S; ++y) {
    for (int x = 0; x < S; ++x) {
      const double px = x + 0.5, py = y + 0.5;
      double v = 0.0;
      for (const auto& r : p.ribs) {
        const double u = px - r.xc;
        const double d = py - (r.y0 + r.curvature * u * u / S);
        v += r.amplitude * std::exp(-d * d / (2.0 * r.width * r.width));
      }
      bone.at(y, x) = v;
    }
  }
  return bone;
}

inline PhantomSample make_phantom(std::uint64_t seed, std::size_t index, int size,
                                  const PhantomOptions& opt = {}) {
  Rng rng(hash_combine(seed, index));
  PhantomSample s;
  s.seed = seed;
  s.index = index;
  s.params = sample_phantom_params(size, rng, opt);
  s.soft = render_soft(s.params);
  const Image bone = render_bone(s.params);
  s.cxr = Image(size, size);
  s.bone_mask = Mask(size, size);
  for (std::size_t i = 0; i < s.cxr.size(); ++i) {
    s.cxr.pixels[i] = std::clamp(s.soft.pixels[i] + bone.pixels[i], 0.0, 1.0);
    s.bone_mask.bits[i] = bone.pixels[i] > kBoneThreshold ? 1 : 0;
  }
  s.lung_mask = ellipse_union_mask(s.params);
  return s;
}

// `count` phantoms; sample i depends only on (seed, i).
inline std::vector<PhantomSample> generate_phantoms(std::uint64_t seed, int count, int size,
                                                    const PhantomOptions& opt = {}) {
  detail::require(size >= 32, "phantom size must be >= 32, got " + std::to_string(size));
  detail::require(count >= 1, "phantom count must be >= 1");
  std::vector<PhantomSample> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i)
    out.push_back(make_phantom(seed, static_cast<std::size_t>(i), size, opt));
  return out;
}

struct SplitSizes {
  std::size_t train = 0, val = 0, test = 0;
};

// train = floor(n * r_train), val = floor(n * r_val), test = remainder.
inline SplitSizes split_sizes(std::size_t n, std::array<double, 3> ratios) {
  for (double r : ratios) detail::require(r >= 0.0, "split ratios must be non-negative");
  detail::require(std::abs(ratios[0] + ratios[1] + ratios[2] - 1.0) <= 1e-9,
                  "split ratios must sum to 1");
  SplitSizes s;
  s.train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[0] + 1e-9));
  s.val = static_cast<std::size_t>(std::floor(static_cast<double>(n) * ratios[1] + 1e-9));
  detail::require(s.train + s.val <= n, "split ratios overflow the dataset");
  s.test = n - s.train - s.val;
  detail::require(s.train > 0 && s.val > 0 && s.test > 0,
                  "split of " + std::to_string(n) + " items leaves an empty partition");
  return s;
}

// Seeded shuffle, then contiguous train / val / test partitions.
template <class T>
std::tuple<std::vector<T>, std::vector<T>, std::vector<T>> split(std::span<const T> data,
                                                                 std::array<double, 3> ratios,
                                                                 std::uint64_t seed) {
  const SplitSizes s = split_sizes(data.size(), ratios);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_u64() % i]);
  std::vector<T> train, val, test;
  for (std::size_t i = 0; i < order.size(); ++i) {
    auto& dst = i < s.train ? train : i < s.train + s.val ? val : test;
    dst.push_back(data[order[i]]);
  }
  return {std::move(train), std::move(val), std::move(test)};
}

}  // namespace glcm

#endif  // GLCM_PHANTOM_HPP
