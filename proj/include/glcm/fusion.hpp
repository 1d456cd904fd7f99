#ifndef GLCM_FUSION_HPP
#define GLCM_FUSION_HPP

// Gradient-domain fusion: inside the mask the result takes the discrete Laplacian of the
// local image, outside it equals the global image (Dirichlet boundary).

#include <algorithm>
#include <cmath>
#include <sstream>
#include <vector>

#include "glcm/error.hpp"
#include "glcm/tensor.hpp"

namespace glcm {

// 5-point Laplacian over the interior unknowns, stored as CSR.
struct LaplacianSystem {
  int height = 0;
  int width = 0;
  std::vector<int> index;     // pixel -> unknown, -1 for boundary/exterior
  std::vector<int> pixels;    // unknown -> pixel
  std::vector<int> row_ptr;
  std::vector<int> cols;
  std::vector<double> vals;
  std::vector<double> rhs;

  std::size_t unknowns() const { return pixels.size(); }

  void multiply(const std::vector<double>& x, std::vector<double>& y) const {
    y.resize(unknowns());
    for (std::size_t r = 0; r < unknowns(); ++r) {
      double acc = 0.0;
      for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) acc += vals[k] * x[cols[k]];
      y[r] = acc;
    }
  }

  double diagonal(std::size_t r) const {
    for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k)
      if (cols[k] == static_cast<int>(r)) return vals[k];
    return 0.0;
  }
};

// Mask pixels on the image border are treated as boundary, so every unknown has four
// neighbours.
inline bool is_interior(const Mask& mask, int y, int x) {
  return mask.at(y, x) != 0 && y > 0 && x > 0 && y + 1 < mask.height && x + 1 < mask.width;
}

inline LaplacianSystem build_laplacian_system(const Image& s_g, const Image& s_l,
                                              const Mask& mask) {
  require_same_shape(s_g, s_l, "poisson fusion");
  require_same_shape(s_g, mask, "poisson fusion");
  LaplacianSystem sys;
  sys.height = s_g.height;
  sys.width = s_g.width;
  sys.index.assign(s_g.size(), -1);
  for (int y = 0; y < sys.height; ++y)
    for (int x = 0; x < sys.width; ++x)
      if (is_interior(mask, y, x)) {
        const int p = y * sys.width + x;
        sys.index[p] = static_cast<int>(sys.pixels.size());
        sys.pixels.push_back(p);
      }

  constexpr int dy[4] = {-1, 0, 0, 1};
  constexpr int dx[4] = {0, -1, 1, 0};
  sys.row_ptr.reserve(sys.unknowns() + 1);
  sys.row_ptr.push_back(0);
  sys.rhs.reserve(sys.unknowns());
  for (int p : sys.pixels) {
    const int y = p / sys.width, x = p % sys.width;
    double b = 0.0;
    int degree = 0;
    // Neighbours in row-major order with the diagonal slotted between left and right.
    for (int n = 0; n < 4; ++n) {
      const int qy = y + dy[n], qx = x + dx[n];
      if (qy < 0 || qx < 0 || qy >= sys.height || qx >= sys.width) continue;
      ++degree;
      const int q = qy * sys.width + qx;
      b += s_l.pixels[p] - s_l.pixels[q];
      if (n == 2) {
        sys.cols.push_back(sys.index[p]);
        sys.vals.push_back(0.0);  // filled below
      }
      if (sys.index[q] >= 0) {
        sys.cols.push_back(sys.index[q]);
        sys.vals.push_back(-1.0);
      } else {
        b += s_g.pixels[q];
      }
    }
    for (int k = sys.row_ptr.back(); k < static_cast<int>(sys.cols.size()); ++k)
      if (sys.cols[k] == sys.index[p]) sys.vals[k] = static_cast<double>(degree);
    sys.row_ptr.push_back(static_cast<int>(sys.cols.size()));
    sys.rhs.push_back(b);
  }
  return sys;
}

struct CgResult {
  std::vector<double> solution;
  int iterations = 0;
  double relative_residual = 0.0;
  std::vector<double> residual_history;  // relative residual after each iteration
};

// Jacobi-preconditioned conjugate gradient. Stops at ||r|| <= tol * ||b||; throws
// NumericError with the residual history if max_iter is exhausted.
inline CgResult cg_solve(const LaplacianSystem& sys, double tol, int max_iter) {
  detail::require(tol > 0.0, "cg_solve: tol must be positive");
  const std::size_t n = sys.unknowns();
  CgResult res;
  res.solution.assign(n, 0.0);
  if (n == 0) return res;

  auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
  };
  const double bnorm = std::sqrt(dot(sys.rhs, sys.rhs));
  if (bnorm == 0.0) return res;

  std::vector<double> inv_diag(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double d = sys.diagonal(i);
    if (!(d > 0.0)) throw NumericError("cg_solve: non-positive diagonal; system is not SPD");
    inv_diag[i] = 1.0 / d;
  }

  std::vector<double>& x = res.solution;
  std::vector<double> r = sys.rhs, z(n), p(n), q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
  p = z;
  double rz = dot(r, z);
  double rnorm = bnorm;
  const int limit = max_iter > 0 ? max_iter : static_cast<int>(10 * n);
  while (rnorm > tol * bnorm) {
    if (res.iterations >= limit) {
      std::ostringstream msg;
      msg << "conjugate gradient did not converge in " << limit
          << " iterations; relative residual " << rnorm / bnorm << " (tol " << tol
          << "); history:";
      const std::size_t h = res.residual_history.size();
      for (std::size_t i = h > 8 ? h - 8 : 0; i < h; ++i) msg << ' ' << res.residual_history[i];
      throw NumericError(msg.str());
    }
    sys.multiply(p, q);
    const double pq = dot(p, q);
    if (!(pq > 0.0)) throw NumericError("cg_solve: breakdown (p^T A p <= 0)");
    const double step = rz / pq;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += step * p[i];
      r[i] -= step * q[i];
    }
    for (std::size_t i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    rnorm = std::sqrt(dot(r, r));
    ++res.iterations;
    res.residual_history.push_back(rnorm / bnorm);
    if (!std::isfinite(rnorm)) throw NumericError("cg_solve: residual became non-finite");
  }
  res.relative_residual = rnorm / bnorm;
  return res;
}

inline constexpr double kDefaultFusionTol = 1e-8;

struct FusionResult {
  Image image;  // unclamped
  int iterations = 0;
  double relative_residual = 0.0;
  std::size_t unknowns = 0;
};

// Solves the fusion system without clamping. max_iter <= 0 means 10 * unknowns.
inline FusionResult poisson_solve(const Image& s_g, const Image& s_l, const Mask& mask,
                                  double tol = kDefaultFusionTol, int max_iter = 0) {
  detail::require(tol > 0.0, "poisson_fuse: tol must be positive");
  const LaplacianSystem sys = build_laplacian_system(s_g, s_l, mask);
  const CgResult cg = cg_solve(sys, tol, max_iter);
  FusionResult out{s_g, cg.iterations, cg.relative_residual, sys.unknowns()};
  for (std::size_t i = 0; i < sys.unknowns(); ++i) out.image.pixels[sys.pixels[i]] = cg.solution[i];
  return out;
}

// Fusion result clamped to [0,1].
inline Image poisson_fuse(const Image& s_g, const Image& s_l, const Mask& mask,
                          double tol = kDefaultFusionTol, int max_iter = 0) {
  Image r = poisson_solve(s_g, s_l, mask, tol, max_iter).image;
  for (double& v : r.pixels) v = std::clamp(v, 0.0, 1.0);
  return r;
}

}  // namespace glcm

#endif  // GLCM_FUSION_HPP
