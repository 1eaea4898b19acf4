#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "icsim/errors.hpp"
#include "icsim/grid.hpp"

namespace icsim::optics {

/// Focal lengths, wavelengths, magnification, and pump waist of the imaging
/// arm. Defaults describe the reference bench.
struct ImagingGeometry {
  double f_s_mm = 100.0;         ///< collection lens focal length, detection arm
  double f_i_mm = 100.0;         ///< collection lens focal length, probe arm
  double lambda_p_nm = 532.0;    ///< pump wavelength
  double lambda_s_nm = 810.0;    ///< detected photon wavelength
  double lambda_i_nm = 1550.0;   ///< probe photon wavelength
  double magnification = 0.4;    ///< object-to-camera magnification ratio
  double pump_waist_um = 171.0;  ///< pump beam waist at the crystal

  void validate() const {
    const double v[] = {f_s_mm, f_i_mm, lambda_p_nm, lambda_s_nm,
                        lambda_i_nm, magnification, pump_waist_um};
    for (double x : v)
      if (!(x > 0.0) || !std::isfinite(x))
        throw ConfigError("imaging geometry: all lengths and ratios must be > 0");
  }
};

/// Parameters of the edge-spread model I(x) = a - b*erf((x - x_c)/sigma).
struct EsfFit {
  double a = 0.0;         ///< counts, mid-level
  double b = 0.0;         ///< counts, half edge height (sign carries direction)
  double x_c_um = 0.0;    ///< edge position
  double sigma_um = 0.0;  ///< edge width; > 0
};

struct KVec {
  double kx = 0.0;  ///< rad/m
  double ky = 0.0;  ///< rad/m
};

struct PhaseMatchingParams {
  double crystal_length_mm = 2.0;
  double delta_k_rad_per_m = 0.0;

  void validate() const {
    if (!(crystal_length_mm > 0.0))
      throw ConfigError("phase matching: crystal length must be > 0");
  }
};

/// Width of a blurred edge on the camera: sigma = f_s * lambda_s * M / (sqrt(2) * pi * w_p).
inline double edge_sigma_um(const ImagingGeometry& geom) {
  geom.validate();
  const double f_um = geom.f_s_mm * 1e3;
  const double lambda_um = geom.lambda_s_nm * 1e-3;
  return f_um * lambda_um * geom.magnification /
         (std::numbers::sqrt2 * std::numbers::pi * geom.pump_waist_um);
}

/// Resolution cell in the probe arm: sigma_i = f_i * lambda_i / (sqrt(2) * pi * w_p).
inline double fov_sigma_um(double f_mm, double lambda_nm, double pump_waist_um) {
  if (!(f_mm > 0.0) || !(lambda_nm > 0.0) || !(pump_waist_um > 0.0))
    throw ConfigError("fov_sigma_um: inputs must be > 0");
  return (f_mm * 1e3) * (lambda_nm * 1e-3) /
         (std::numbers::sqrt2 * std::numbers::pi * pump_waist_um);
}

/// Spatial bandwidth: number of resolution cells covering the field of view.
inline double spatial_mode_count(double fov_um, double sigma_i_um) {
  if (!(fov_um > 0.0) || !(sigma_i_um > 0.0))
    throw ConfigError("spatial_mode_count: inputs must be > 0");
  const double ratio = fov_um / sigma_i_um;
  return ratio * ratio;
}

namespace detail {

/// Pixel-integrated Gaussian taps with standard deviation s (pixels). A unit
/// step convolved with these taps reproduces erf((x - x_c)/(s*sqrt(2)))
/// exactly at pixel centers, which is what ties the kernel width s = sigma/sqrt(2)
/// to the edge model's sigma.
inline std::vector<double> gaussian_taps(double s_px) {
  const int radius = std::max(1, static_cast<int>(std::ceil(6.0 * s_px)));
  std::vector<double> taps(2 * radius + 1);
  const double inv = 1.0 / (s_px * std::numbers::sqrt2);
  double sum = 0.0;
  for (int t = -radius; t <= radius; ++t) {
    const double hi = std::erf((t + 0.5) * inv);
    const double lo = std::erf((t - 0.5) * inv);
    taps[t + radius] = 0.5 * (hi - lo);
    sum += taps[t + radius];
  }
  for (double& w : taps) w /= sum;
  return taps;
}

/// Half-sample mirror fold: ... 2 1 0 | 0 1 2 ... | n-1 n-1 n-2 ...
/// Keeps the normalized symmetric kernel doubly stochastic, so flux is
/// conserved exactly.
inline int fold_index(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

inline void convolve_rows(const Grid<double>& in, Grid<double>& out,
                          const std::vector<double>& taps) {
  const int radius = static_cast<int>(taps.size() / 2);
  const int w = in.width();
  for (int y = 0; y < in.height(); ++y)
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t)
        acc += taps[t + radius] * in(fold_index(x + t, w), y);
      out(x, y) = acc;
    }
}

}  // namespace detail

/// Gaussian blur matched to the edge-spread model: kernel standard deviation
/// sigma/sqrt(2), separable, mirror boundaries, flux-conserving. sigma = 0 is
/// the identity.
inline Grid<double> blur(const Grid<double>& image, double sigma_um, double pitch_um) {
  if (sigma_um < 0.0) throw ConfigError("blur: sigma must be >= 0");
  if (!(pitch_um > 0.0)) throw ConfigError("blur: pixel pitch must be > 0");
  if (sigma_um == 0.0) return image;

  const double s_px = sigma_um / std::numbers::sqrt2 / pitch_um;
  const auto taps = detail::gaussian_taps(s_px);

  Grid<double> tmp(image.width(), image.height());
  detail::convolve_rows(image, tmp, taps);

  // Column pass via transpose-free indexing.
  Grid<double> out(image.width(), image.height());
  const int radius = static_cast<int>(taps.size() / 2);
  const int h = image.height();
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < image.width(); ++x) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t)
        acc += taps[t + radius] * tmp(x, detail::fold_index(y + t, h));
      out(x, y) = acc;
    }
  return out;
}

/// Edge model evaluated at x.
inline double esf_model(const EsfFit& fit, double x_um) {
  return fit.a - fit.b * std::erf((x_um - fit.x_c_um) / fit.sigma_um);
}

/// Fits I(x) = a - b*erf((x - x_c)/sigma) to (x, counts) samples by
/// Levenberg-Marquardt with an analytic Jacobian. Needs at least 8 samples
/// spanning the edge; flat data is rejected as degenerate.
inline EsfFit fit_esf(std::span<const std::pair<double, double>> samples) {
  if (samples.size() < 8) throw FitError("fit_esf: need at least 8 samples");

  std::vector<std::pair<double, double>> pts(samples.begin(), samples.end());
  std::sort(pts.begin(), pts.end());
  const std::size_t n = pts.size();
  const std::size_t quarter = std::max<std::size_t>(1, n / 4);

  double head = 0.0, tail = 0.0;
  for (std::size_t i = 0; i < quarter; ++i) {
    head += pts[i].second;
    tail += pts[n - 1 - i].second;
  }
  head /= quarter;
  tail /= quarter;

  double scale = 0.0;
  for (const auto& [x, y] : pts) scale = std::max(scale, std::abs(y));
  if (scale == 0.0) scale = 1.0;
  if (std::abs(head - tail) < 1e-6 * scale)
    throw FitError("fit_esf: flat samples, edge height is degenerate (b ~ 0)");

  double a = 0.5 * (head + tail);
  double b = 0.5 * (head - tail);
  // First crossing of the mid-level locates the edge.
  double x_c = 0.5 * (pts.front().first + pts.back().first);
  for (std::size_t i = 0; i + 1 < n; ++i) {
    const double y0 = pts[i].second - a, y1 = pts[i + 1].second - a;
    if (y0 == 0.0 || y0 * y1 < 0.0) {
      x_c = pts[i].first +
            (y1 != y0 ? (0.0 - y0) / (y1 - y0) * (pts[i + 1].first - pts[i].first) : 0.0);
      break;
    }
  }
  double sigma = std::max(1e-6, (pts.back().first - pts.front().first) / 8.0);

  const double two_over_sqrt_pi = 2.0 * std::numbers::inv_sqrtpi;
  double lambda = 1e-3;
  double cost = 0.0;
  auto eval_cost = [&](double pa, double pb, double pc, double ps) {
    double c = 0.0;
    for (const auto& [x, y] : pts) {
      const double r = pa - pb * std::erf((x - pc) / ps) - y;
      c += r * r;
    }
    return c;
  };
  cost = eval_cost(a, b, x_c, sigma);

  bool converged = false;
  for (int iter = 0; iter < 200 && !converged; ++iter) {
    // Normal equations J^T J + lambda*diag, J^T r for the 4 parameters.
    double jtj[4][4] = {};
    double jtr[4] = {};
    for (const auto& [x, y] : pts) {
      const double u = (x - x_c) / sigma;
      const double e = std::exp(-u * u);
      const double r = a - b * std::erf(u) - y;
      const double j[4] = {1.0, -std::erf(u), b * two_over_sqrt_pi * e / sigma,
                           b * two_over_sqrt_pi * e * u / sigma};
      for (int p = 0; p < 4; ++p) {
        jtr[p] += j[p] * r;
        for (int q = 0; q < 4; ++q) jtj[p][q] += j[p] * j[q];
      }
    }

    bool stepped = false;
    for (int attempt = 0; attempt < 12 && !stepped; ++attempt) {
      double m[4][5];
      for (int p = 0; p < 4; ++p) {
        for (int q = 0; q < 4; ++q) m[p][q] = jtj[p][q];
        m[p][p] += lambda * std::max(jtj[p][p], 1e-12);
        m[p][4] = -jtr[p];
      }
      // Gaussian elimination with partial pivoting.
      bool singular = false;
      for (int col = 0; col < 4 && !singular; ++col) {
        int piv = col;
        for (int row = col + 1; row < 4; ++row)
          if (std::abs(m[row][col]) > std::abs(m[piv][col])) piv = row;
        if (std::abs(m[piv][col]) < 1e-300) {
          singular = true;
          break;
        }
        std::swap(m[piv], m[col]);
        for (int row = 0; row < 4; ++row) {
          if (row == col) continue;
          const double f = m[row][col] / m[col][col];
          for (int k = col; k <= 4; ++k) m[row][k] -= f * m[col][k];
        }
      }
      if (singular) {
        lambda *= 10.0;
        continue;
      }
      const double da = m[0][4] / m[0][0];
      const double db = m[1][4] / m[1][1];
      const double dc = m[2][4] / m[2][2];
      const double ds = m[3][4] / m[3][3];
      const double ns = sigma + ds;
      if (!(ns > 0.0) || !std::isfinite(ns)) {
        lambda *= 10.0;
        continue;
      }
      const double new_cost = eval_cost(a + da, b + db, x_c + dc, ns);
      if (new_cost <= cost) {
        const double rel_drop = (cost - new_cost) / std::max(cost, 1e-300);
        a += da;
        b += db;
        x_c += dc;
        sigma = ns;
        cost = new_cost;
        lambda = std::max(lambda * 0.3, 1e-12);
        stepped = true;
        if (rel_drop < 1e-14 ||
            (std::abs(da) + std::abs(db) < 1e-12 * scale &&
             std::abs(dc) + std::abs(ds) < 1e-12 * std::max(1.0, std::abs(x_c))))
          converged = true;
      } else {
        lambda *= 10.0;
      }
    }
    if (!stepped) converged = true;  // no downhill step exists at any damping
  }

  if (!std::isfinite(a) || !std::isfinite(b) || !std::isfinite(x_c) || !(sigma > 0.0)) {
    std::ostringstream os;
    os << "fit_esf: did not converge (a=" << a << ", b=" << b << ", x_c=" << x_c
       << ", sigma=" << sigma << ", cost=" << cost << ")";
    throw FitError(os.str());
  }
  return EsfFit{a, b, x_c, sigma};
}

inline EsfFit fit_esf(const std::vector<std::pair<double, double>>& samples) {
  return fit_esf(std::span<const std::pair<double, double>>(samples));
}

namespace detail {
inline double sinc(double x) { return x == 0.0 ? 1.0 : std::sin(x) / x; }
}  // namespace detail

/// Joint transverse mode amplitude of an emitted pair:
/// exp(-|k_s + k_i|^2 w_p^2 / 4) * sinc(delta_k * L / 2), normalized so the
/// anti-correlated, phase-matched peak is 1.
inline double mode_function(const KVec& k_s, const KVec& k_i, double pump_waist_um,
                            const PhaseMatchingParams& pm) {
  pm.validate();
  if (!(pump_waist_um > 0.0)) throw ConfigError("mode_function: pump waist must be > 0");
  const double waist_m = pump_waist_um * 1e-6;
  const double sx = k_s.kx + k_i.kx;
  const double sy = k_s.ky + k_i.ky;
  const double k2 = sx * sx + sy * sy;
  const double gauss = std::exp(-k2 * waist_m * waist_m / 4.0);
  const double arg = pm.delta_k_rad_per_m * (pm.crystal_length_mm * 1e-3) / 2.0;
  return gauss * detail::sinc(arg);
}

inline double mode_function(const KVec& k_s, const KVec& k_i, double pump_waist_um,
                            double delta_k_rad_per_m, double crystal_length_mm) {
  return mode_function(k_s, k_i, pump_waist_um,
                       PhaseMatchingParams{crystal_length_mm, delta_k_rad_per_m});
}

}  // namespace icsim::optics
