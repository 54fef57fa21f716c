#include "coldmri/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

namespace coldmri {
namespace {

constexpr int kWindow = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

std::vector<double> magnitude(const ComplexImage& img) {
  std::vector<double> out(img.size());
  auto d = img.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::abs(d[i]);
  return out;
}

double max_value(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, x);
  return m;
}

const std::vector<double>& gauss_kernel() {
  static const std::vector<double> kernel = [] {
    std::vector<double> k(kWindow);
    double sum = 0.0;
    for (int i = 0; i < kWindow; ++i) {
      const double d = i - kWindow / 2;
      k[static_cast<std::size_t>(i)] = std::exp(-0.5 * d * d / (kSigma * kSigma));
      sum += k[static_cast<std::size_t>(i)];
    }
    for (double& x : k) x /= sum;
    return k;
  }();
  return kernel;
}

/// Separable Gaussian correlation restricted to positions where the window
/// fits entirely (output is (h - 10) x (w - 10)).
std::vector<double> filter_valid(const std::vector<double>& in, int h, int w) {
  const std::vector<double>& g = gauss_kernel();
  const int pad = kWindow / 2;
  const int ow = w - 2 * pad;
  const int oh = h - 2 * pad;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += g[static_cast<std::size_t>(k)] *
               in[static_cast<std::size_t>(r) * w + c + k];
      }
      tmp[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int r = 0; r < oh; ++r) {
    for (int c = 0; c < ow; ++c) {
      double acc = 0.0;
      for (int k = 0; k < kWindow; ++k) {
        acc += g[static_cast<std::size_t>(k)] *
               tmp[static_cast<std::size_t>(r + k) * ow + c];
      }
      out[static_cast<std::size_t>(r) * ow + c] = acc;
    }
  }
  return out;
}

}  // namespace

double psnr(const ComplexImage& recon, const ComplexImage& truth) {
  require_same_shape(recon, truth, "psnr");
  require_finite(recon, "psnr");
  require_finite(truth, "psnr");
  const std::vector<double> a = magnitude(recon);
  const std::vector<double> b = magnitude(truth);
  const double range = max_value(b);
  if (range == 0.0) {
    throw InvalidInputError("psnr: reference image is identically zero");
  }
  double mse = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse == 0.0) return 99.0;
  return std::min(99.0, 10.0 * std::log10(range * range / mse));
}

double ssim(const ComplexImage& recon, const ComplexImage& truth) {
  require_same_shape(recon, truth, "ssim");
  require_finite(recon, "ssim");
  require_finite(truth, "ssim");
  const int h = recon.height();
  const int w = recon.width();
  if (h < kWindow || w < kWindow) {
    throw ShapeError("ssim: image " + std::to_string(h) + "x" + std::to_string(w) +
                     " is smaller than the " + std::to_string(kWindow) +
                     "-pixel window");
  }
  const std::vector<double> x = magnitude(recon);
  const std::vector<double> y = magnitude(truth);
  const double range = max_value(y);
  if (range == 0.0) {
    throw InvalidInputError("ssim: reference image is identically zero");
  }
  const double c1 = (kK1 * range) * (kK1 * range);
  const double c2 = (kK2 * range) * (kK2 * range);

  std::vector<double> xx(x.size()), yy(x.size()), xy(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    xx[i] = x[i] * x[i];
    yy[i] = y[i] * y[i];
    xy[i] = x[i] * y[i];
  }
  const std::vector<double> ux = filter_valid(x, h, w);
  const std::vector<double> uy = filter_valid(y, h, w);
  const std::vector<double> uxx = filter_valid(xx, h, w);
  const std::vector<double> uyy = filter_valid(yy, h, w);
  const std::vector<double> uxy = filter_valid(xy, h, w);

  double acc = 0.0;
  for (std::size_t i = 0; i < ux.size(); ++i) {
    const double vx = uxx[i] - ux[i] * ux[i];
    const double vy = uyy[i] - uy[i] * uy[i];
    const double cxy = uxy[i] - ux[i] * uy[i];
    const double num = (2.0 * ux[i] * uy[i] + c1) * (2.0 * cxy + c2);
    const double den = (ux[i] * ux[i] + uy[i] * uy[i] + c1) * (vx + vy + c2);
    acc += num / den;
  }
  return acc / static_cast<double>(ux.size());
}

Aggregate aggregate(std::span<const double> values) {
  if (values.empty()) {
    throw InvalidInputError("aggregate: no values");
  }
  Aggregate agg;
  agg.n = static_cast<int>(values.size());
  double sum = 0.0;
  for (double v : values) sum += v;
  agg.mean = sum / agg.n;
  if (agg.n > 1) {
    double ss = 0.0;
    for (double v : values) {
      const double d = v - agg.mean;
      ss += d * d;
    }
    agg.stddev = std::sqrt(ss / (agg.n - 1));
  }
  return agg;
}

}  // namespace coldmri
